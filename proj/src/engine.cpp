#include "tabkit/engine.hpp"

#include <algorithm>
#include <cassert>
#include <memory>
#include <set>
#include <sstream>
#include <stdexcept>

namespace tabkit {

void limits::validate() const {
  if (max_expressions_per_branch < 1 || max_fresh_indices < 1 ||
      max_branches < 1 || max_steps_total < 1)
    throw std::invalid_argument("limits must be >= 1");
}

const char* to_string(branch_status s) {
  switch (s) {
    case branch_status::closed: return "closed";
    case branch_status::open_incomplete: return "open-incomplete";
    case branch_status::open_complete: return "open-complete";
    case branch_status::resource_exceeded: return "resource-exceeded";
  }
  return "?";
}

const char* to_string(verdict_kind v) {
  switch (v) {
    case verdict_kind::proved: return "proved";
    case verdict_kind::refuted: return "refuted";
    case verdict_kind::out_of_resources: return "out-of-resources";
  }
  return "?";
}

std::vector<expr_set> branch::elements() const {
  std::vector<expr_set> out;
  out.push_back(start);
  for (const auto& st : steps) {
    expr_set next = out.back();
    for (const expr& e : st.delta) next.insert(e);
    out.push_back(std::move(next));
  }
  return out;
}

branch start_branch(const std::vector<formula_id>& premises, formula_id goal,
                    const logic_definition& logic, formula_store&) {
  branch b;
  label t = logic.start_label();
  std::vector<expr> items;
  for (formula_id p : premises) items.push_back(expr::tagged(p, false, t));
  items.push_back(expr::tagged(goal, true, t));
  b.start = expr_set(std::move(items));
  b.union_set = b.start;
  return b;
}

branch extend(const branch& b, const rule_application& app, int alt) {
  if (alt < 0 || alt >= static_cast<int>(app.deltas.size()))
    throw std::invalid_argument("alternative out of range");
  branch out = b;
  branch_step st;
  st.app = app;
  st.alt = alt;
  for (const expr& e : app.deltas[alt])
    if (!out.union_set.contains(e)) st.delta.push_back(e);
  if (st.delta.empty())
    throw std::invalid_argument("extension adds nothing: input mismatch");
  for (const expr& e : st.delta) out.union_set.insert(e);
  out.steps.push_back(std::move(st));
  return out;
}

match_context context_of(const branch& b, const logic_definition& logic) {
  match_context ctx;
  for (const auto& st : b.steps) {
    for (const auto& ps : logic.provenance) {
      if (st.app.schema == ps.schema_index && st.alt == ps.alt_index) {
        match_context::pair_rec r;
        r.a = st.app.subst.fmeta[ps.fmeta_a];
        r.b = st.app.subst.fmeta[ps.fmeta_b];
        r.i = st.app.subst.imeta[ps.imeta_i];
        r.j = st.app.subst.imeta[ps.imeta_j];
        ctx.pairs.push_back(r);
      }
    }
  }
  return ctx;
}

branch_status status_of(const branch& b, const logic_definition& logic,
                        formula_store& store) {
  if (is_b_inconsistent(b.union_set)) return branch_status::closed;
  match_context ctx = context_of(b, logic);
  if (first_applicable(logic.rules, b.union_set, store, ctx))
    return branch_status::open_incomplete;
  return branch_status::open_complete;
}

branch tableau::branch_of(int leaf, const logic_definition&) const {
  std::vector<int> path;
  for (int n = leaf; n != -1; n = nodes[n].parent) path.push_back(n);
  std::reverse(path.begin(), path.end());
  branch b;
  b.start = start;
  b.union_set = start;
  for (size_t i = 1; i < path.size(); ++i) {
    const tableau_node& nd = nodes[path[i]];
    branch_step st;
    st.app.schema = nd.rule;
    st.app.subst = nd.subst;
    st.alt = nd.alt;
    st.delta = nd.delta;
    b.steps.push_back(st);
    for (const expr& e : st.delta) b.union_set.insert(e);
  }
  // sibling deltas complete each step's alternative list
  int cur = 0;
  for (size_t i = 1; i < path.size(); ++i) {
    std::vector<std::vector<expr>> deltas;
    for (size_t n = 0; n < nodes.size(); ++n) {
      if (nodes[n].parent == cur &&
          nodes[n].rule == nodes[path[i]].rule &&
          nodes[n].subst.encode() == nodes[path[i]].subst.encode())
        deltas.push_back(nodes[n].delta);
    }
    b.steps[i - 1].app.deltas = std::move(deltas);
    cur = path[i];
  }
  return b;
}

namespace {

struct walker {
  const logic_definition& logic;
  formula_store& store;
  const limits& lim;
  bool stop_on_open;
  bool build_tree;

  struct path_step {
    std::shared_ptr<const rule_application> app;
    int alt = 0;
    std::vector<expr> delta;
  };

  tableau tab;
  std::vector<path_step> path;
  match_context ctx;
  // per-schema first-premise candidates, grown per delta, undone by size;
  // the size snapshots live in one flat stack (stride = rule count)
  std::vector<std::vector<expr>> cands;
  std::vector<uint32_t> cand_sizes;
  // branch expressions in arrival order plus per-schema recheck watermarks
  std::vector<expr> branch_exprs;
  std::vector<uint32_t> watermarks;
  std::optional<branch> witness;
  size_t steps = 0;
  size_t leaf_count = 0;
  bool oor = false;
  bool found_open = false;
  uint32_t start_max_ren = 0;

  walker(const logic_definition& lg, formula_store& st, const limits& lm,
         bool stop, bool tree)
      : logic(lg), store(st), lim(lm), stop_on_open(stop), build_tree(tree) {}

  // sparse undo: only schemas whose candidate list grew are recorded;
  // 0xffffffff marks a frame boundary
  void push_cands(const std::vector<expr>& delta) {
    cand_sizes.push_back(0xffffffffu);
    for (const expr& e : delta) {
      uint32_t key = expr_match_key(e, store);
      for (size_t ri = 0; ri < cands.size(); ++ri)
        if (premise0_key_matches(logic.rules[ri], key)) {
          cands[ri].push_back(e);
          cand_sizes.push_back(static_cast<uint32_t>(ri));
        }
      branch_exprs.push_back(e);
    }
  }
  void pop_cands(size_t delta_size) {
    while (cand_sizes.back() != 0xffffffffu) {
      cands[cand_sizes.back()].pop_back();
      cand_sizes.pop_back();
    }
    cand_sizes.pop_back();
    branch_exprs.resize(branch_exprs.size() - delta_size);
  }

  branch snapshot(const expr_set& x) const {
    branch b;
    b.start = tab.start;
    for (const path_step& ps : path) {
      branch_step st;
      st.app = *ps.app;
      st.alt = ps.alt;
      st.delta = ps.delta;
      b.steps.push_back(std::move(st));
    }
    b.union_set = x;
    return b;
  }

  void mark_leaf(int node, branch_status s) {
    ++leaf_count;
    if (build_tree) {
      tab.nodes[node].status = s;
      tab.leaves.push_back(node);
    }
  }

  // x is the element set at `node`; consistent unless flagged
  void rec(int node, const expr_set& x, bool inconsistent) {
    if (++steps > lim.max_steps_total || leaf_count >= lim.max_branches) {
      oor = true;
      mark_leaf(node, branch_status::resource_exceeded);
      return;
    }
    if (inconsistent) {
      mark_leaf(node, branch_status::closed);
      return;
    }
    if (x.size() > lim.max_expressions_per_branch ||
        max_renameable(x) - start_max_ren > lim.max_fresh_indices) {
      oor = true;
      mark_leaf(node, branch_status::resource_exceeded);
      return;
    }
    int chosen = -1;
    watermark_moves moved;
    auto found = first_applicable_indexed(logic.rules, x, store, ctx, cands,
                                          branch_exprs, watermarks, moved,
                                          &chosen);
    if (!found) {
      moved.undo(watermarks);
      mark_leaf(node, branch_status::open_complete);
      if (stop_on_open) {
        witness = snapshot(x);
        found_open = true;
      }
      return;
    }
    auto app = std::make_shared<const rule_application>(std::move(*found));
    for (int alt = 0; alt < static_cast<int>(app->deltas.size()); ++alt) {
      expr_set child = x;
      bool child_incons = false;
      std::vector<expr> delta;
      for (const expr& e : app->deltas[alt]) {
        if (child.insert(e)) {
          delta.push_back(e);
          if (child.contains(e.complement())) child_incons = true;
        }
      }
      int child_id = node;
      if (build_tree) {
        tableau_node nd;
        nd.parent = node;
        nd.rule = app->schema;
        nd.alt = alt;
        nd.delta = delta;
        nd.subst = app->subst;
        nd.depth = tab.nodes[node].depth + 1;
        tab.nodes.push_back(nd);
        child_id = static_cast<int>(tab.nodes.size() - 1);
      }
      push_cands(delta);
      path.push_back({app, alt, delta});
      bool pushed_pair = false;
      for (const auto& ps : logic.provenance) {
        if (app->schema == ps.schema_index && alt == ps.alt_index) {
          match_context::pair_rec r;
          r.a = app->subst.fmeta[ps.fmeta_a];
          r.b = app->subst.fmeta[ps.fmeta_b];
          r.i = app->subst.imeta[ps.imeta_i];
          r.j = app->subst.imeta[ps.imeta_j];
          ctx.pairs.push_back(r);
          pushed_pair = true;
        }
      }
      size_t delta_size = delta.size();
      rec(child_id, child, child_incons);
      if (pushed_pair) ctx.pairs.pop_back();
      path.pop_back();
      pop_cands(delta_size);
      if (found_open && stop_on_open) {
        moved.undo(watermarks);
        return;
      }
      if (oor && leaf_count >= lim.max_branches) {
        moved.undo(watermarks);
        return;
      }
    }
    moved.undo(watermarks);
  }
};

walker run_walk(const std::vector<formula_id>& premises, formula_id goal,
                const logic_definition& logic, const limits& lim,
                formula_store& store, bool stop_on_open, bool build_tree) {
  lim.validate();
  walker w(logic, store, lim, stop_on_open, build_tree);
  branch b0 = start_branch(premises, goal, logic, store);
  w.tab.premises = premises;
  w.tab.goal = goal;
  w.tab.logic = logic.name;
  w.tab.start = b0.start;
  w.start_max_ren = max_renameable(b0.start);
  if (build_tree) {
    tableau_node root;
    root.depth = 0;
    w.tab.nodes.push_back(root);
  }
  w.cands.resize(logic.rules.size());
  w.watermarks.assign(logic.rules.size(), 0);
  w.push_cands(b0.start.items());
  w.rec(0, b0.start, is_b_inconsistent(b0.start));
  return w;
}

}  // namespace

saturation_result saturate(const std::vector<formula_id>& premises,
                           formula_id goal, const logic_definition& logic,
                           const limits& lim, formula_store& store) {
  walker w = run_walk(premises, goal, logic, lim, store, false, true);
  saturation_result out;
  out.out_of_resources = w.oor;
  out.tab = std::move(w.tab);
  for (int leaf : out.tab.leaves)
    out.branches.push_back(out.tab.branch_of(leaf, logic));
  return out;
}

namespace {
proof_result decide_impl(const std::vector<formula_id>& premises,
                         formula_id goal, const logic_definition& logic,
                         const limits& lim, formula_store& store,
                         bool build_tree) {
  walker w = run_walk(premises, goal, logic, lim, store, true, build_tree);
  proof_result r;
  r.tab = std::move(w.tab);
  r.steps_used = w.steps;
  r.leaves_used = w.leaf_count;
  if (w.found_open) {
    r.kind = verdict_kind::refuted;
    r.witness = std::move(w.witness);
  } else if (w.oor) {
    r.kind = verdict_kind::out_of_resources;
  } else {
    r.kind = verdict_kind::proved;
  }
  return r;
}
}  // namespace

proof_result decide(const std::vector<formula_id>& premises, formula_id goal,
                    const logic_definition& logic, const limits& lim,
                    formula_store& store) {
  return decide_impl(premises, goal, logic, lim, store, true);
}

proof_result decide_quick(const std::vector<formula_id>& premises,
                          formula_id goal, const logic_definition& logic,
                          const limits& lim, formula_store& store) {
  return decide_impl(premises, goal, logic, lim, store, false);
}

namespace {

std::string encode_set_bytes(const expr_set& x) {
  std::string out;
  out.reserve(x.size() * 16 + 4);
  uint32_t n = static_cast<uint32_t>(x.size());
  out.append(reinterpret_cast<const char*>(&n), 4);
  for (const expr& e : x) {
    uint64_t w1 = static_cast<uint64_t>(e.kind) |
                  (static_cast<uint64_t>(e.neg) << 2) |
                  (static_cast<uint64_t>(e.sym) << 3) |
                  (static_cast<uint64_t>(e.argc) << 11) |
                  (static_cast<uint64_t>(static_cast<uint32_t>(e.f)) << 13);
    uint64_t w2 = static_cast<uint64_t>(e.a0.bits) |
                  (static_cast<uint64_t>(e.a1.bits) << 32);
    out.append(reinterpret_cast<const char*>(&w1), 8);
    out.append(reinterpret_cast<const char*>(&w2), 8);
  }
  return out;
}

}  // namespace

kind_count enumerate_branch_kinds(const std::vector<formula_id>& premises,
                                  formula_id goal,
                                  const logic_definition& logic,
                                  const limits& lim, formula_store& store) {
  lim.validate();
  kind_count out;
  branch b0 = start_branch(premises, goal, logic, store);
  std::set<std::string> kinds, complete_kinds;
  size_t steps = 0;

  struct frame {
    branch b;
    std::string kind_key;
  };

  // depth-first over every (instance, alternative) choice
  std::vector<frame> stack;
  stack.push_back({b0, encode_set_bytes(canonical_form(b0.start))});
  while (!stack.empty()) {
    frame f = std::move(stack.back());
    stack.pop_back();
    if (++steps > lim.max_steps_total || kinds.size() > lim.max_branches) {
      out.out_of_resources = true;
      break;
    }
    kinds.insert(f.kind_key);
    bool closed = is_b_inconsistent(f.b.union_set);
    std::vector<rule_application> apps;
    if (!closed) {
      match_context ctx = context_of(f.b, logic);
      apps = applicable_instances(logic.rules, f.b.union_set, store, ctx);
    }
    if (closed || apps.empty()) {
      if (complete_kinds.insert(f.kind_key).second) {
        out.representatives.push_back(f.b);
        if (!closed) out.all_complete_closed = false;
      }
      continue;
    }
    if (f.b.union_set.size() > lim.max_expressions_per_branch ||
        max_renameable(f.b.union_set) - max_renameable(b0.start) >
            lim.max_fresh_indices) {
      out.out_of_resources = true;
      continue;
    }
    // push children in reverse so exploration follows canonical order
    std::vector<frame> children;
    for (const auto& app : apps) {
      for (int alt = 0; alt < static_cast<int>(app.deltas.size()); ++alt) {
        branch nb = extend(f.b, app, alt);
        std::string key =
            f.kind_key + "|" + encode_set_bytes(canonical_form(nb.union_set));
        children.push_back({std::move(nb), std::move(key)});
      }
    }
    for (auto it = children.rbegin(); it != children.rend(); ++it)
      stack.push_back(std::move(*it));
  }
  out.total_kinds = kinds.size();
  out.complete_kinds = complete_kinds.size();
  return out;
}

bool is_redundant_variant(const branch& psi, const branch& phi) {
  auto pe = psi.elements();
  auto fe = phi.elements();
  size_t common = 0;
  while (common < pe.size() && common < fe.size() && pe[common] == fe[common])
    ++common;
  // need agreement on positions 1..i and divergence at i+1, both defined
  if (common == 0 || common >= pe.size() || common >= fe.size()) return false;
  size_t i = common;  // first differing position (0-based)
  const branch_step& phis = phi.steps[i - 1];
  const branch_step& psis = psi.steps[i - 1];
  size_t n = 1 + phis.app.deltas.size();
  size_t m = 1 + psis.app.deltas.size();
  if (!(n < m)) return false;
  // every output of phi's instance must appear among psi's instance outputs,
  // away from the alternative psi actually took
  for (const auto& dl : phis.app.deltas) {
    bool found = false;
    for (size_t o = 0; o < psis.app.deltas.size(); ++o) {
      if (static_cast<int>(o) == psis.alt) continue;
      if (psis.app.deltas[o] == dl) {
        found = true;
        break;
      }
    }
    if (!found) return false;
  }
  return true;
}

verification_report verify_tableau(const tableau& t,
                                   const logic_definition& logic,
                                   formula_store& store) {
  verification_report rep;
  auto fail = [&](std::string s) { rep.failures.push_back(std::move(s)); };

  if (t.nodes.empty()) {
    fail("empty tableau");
    return rep;
  }
  {
    branch b0;
    label tl = logic.start_label();
    std::vector<expr> items;
    for (formula_id p : t.premises) items.push_back(expr::tagged(p, false, tl));
    items.push_back(expr::tagged(t.goal, true, tl));
    if (!(expr_set(items) == t.start))
      fail("start set does not match the goal pair");
  }
  // recompute element sets per node
  std::vector<expr_set> sets(t.nodes.size());
  sets[0] = t.start;
  for (size_t n = 1; n < t.nodes.size(); ++n) {
    const auto& nd = t.nodes[n];
    if (nd.parent < 0 || nd.parent >= static_cast<int>(n)) {
      fail("node " + std::to_string(n) + ": bad parent");
      return rep;
    }
    sets[n] = sets[nd.parent];
    bool grew = false;
    for (const expr& e : nd.delta) grew |= sets[n].insert(e);
    if (!grew) fail("node " + std::to_string(n) + ": no strict growth");
  }
  // children of one node must be the alternatives of a single instance
  std::vector<std::vector<int>> kids(t.nodes.size());
  for (size_t n = 1; n < t.nodes.size(); ++n)
    kids[t.nodes[n].parent].push_back(static_cast<int>(n));
  std::set<int> leafset(t.leaves.begin(), t.leaves.end());
  for (size_t n = 0; n < t.nodes.size(); ++n) {
    if (kids[n].empty()) {
      if (!leafset.count(static_cast<int>(n)))
        fail("node " + std::to_string(n) + ": childless but not a leaf");
      continue;
    }
    if (leafset.count(static_cast<int>(n)))
      fail("node " + std::to_string(n) +
           ": marked as a leaf but has children (prefix branch)");
    int rule = t.nodes[kids[n][0]].rule;
    std::string se = t.nodes[kids[n][0]].subst.encode();
    for (int c : kids[n]) {
      if (t.nodes[c].rule != rule || t.nodes[c].subst.encode() != se)
        fail("node " + std::to_string(n) +
             ": siblings from different instances");
    }
    if (rule < 0 || rule >= static_cast<int>(logic.rules.size())) {
      fail("node " + std::to_string(n) + ": unknown rule");
      continue;
    }
    // re-derive the instance at this node and compare the forks
    if (is_b_inconsistent(sets[n])) {
      fail("node " + std::to_string(n) + ": expansion of a closed set");
      continue;
    }
    auto app = instantiate(logic.rules[rule], rule, t.nodes[kids[n][0]].subst,
                           sets[n], store, {}, true);
    if (!app) {
      // pair-provenance rules need their context; re-check with it
      branch pb = t.branch_of(static_cast<int>(n), logic);
      match_context ctx = context_of(pb, logic);
      app = instantiate(logic.rules[rule], rule, t.nodes[kids[n][0]].subst,
                        sets[n], store, ctx, true);
    }
    if (!app) {
      fail("node " + std::to_string(n) + ": recorded instance not derivable");
      continue;
    }
    if (app->deltas.size() != kids[n].size())
      fail("node " + std::to_string(n) + ": fork count mismatch");
  }
  // leaf statuses
  for (int leaf : t.leaves) {
    const auto& nd = t.nodes[leaf];
    bool incons = is_b_inconsistent(sets[leaf]);
    switch (nd.status) {
      case branch_status::closed:
        if (!incons) fail("leaf " + std::to_string(leaf) + ": not closed");
        break;
      case branch_status::open_complete: {
        if (incons) {
          fail("leaf " + std::to_string(leaf) + ": closed but marked open");
          break;
        }
        branch pb = t.branch_of(leaf, logic);
        match_context ctx = context_of(pb, logic);
        if (first_applicable(logic.rules, sets[leaf], store, ctx))
          fail("leaf " + std::to_string(leaf) + ": not complete");
        break;
      }
      case branch_status::resource_exceeded:
        break;
      case branch_status::open_incomplete:
        fail("leaf " + std::to_string(leaf) + ": dangling incomplete leaf");
        break;
    }
  }
  return rep;
}

namespace {

void render_node_text(const tableau& t, const logic_definition& logic,
                      const formula_store& store, int node, int indent,
                      const std::vector<std::vector<int>>& kids,
                      std::string& out) {
  const auto& nd = t.nodes[node];
  out.append(static_cast<size_t>(indent) * 2, ' ');
  if (node == 0) {
    out += "start " + render_set(store, logic.lang, t.start);
  } else {
    out += "[" + logic.rules[nd.rule].name + "/" + std::to_string(nd.alt) +
           "] +{";
    for (size_t i = 0; i < nd.delta.size(); ++i) {
      if (i) out += ", ";
      out += render_expr(store, logic.lang, nd.delta[i]);
    }
    out += "}";
  }
  if (kids[node].empty()) {
    out += "  => ";
    out += to_string(nd.status);
  }
  out += "\n";
  for (int c : kids[node])
    render_node_text(t, logic, store, c, indent + 1, kids, out);
}

}  // namespace

std::string render_trace_text(const proof_result& r,
                              const logic_definition& logic,
                              const formula_store& store) {
  std::string out;
  out += "logic: " + logic.name + "\n";
  out += "verdict: ";
  out += to_string(r.kind);
  out += "\n";
  std::vector<std::vector<int>> kids(r.tab.nodes.size());
  for (size_t n = 1; n < r.tab.nodes.size(); ++n)
    kids[r.tab.nodes[n].parent].push_back(static_cast<int>(n));
  render_node_text(r.tab, logic, store, 0, 0, kids, out);
  if (r.kind == verdict_kind::refuted && r.witness) {
    out += "open complete branch: " +
           render_set(store, logic.lang, r.witness->union_set) + "\n";
  }
  return out;
}

std::string render_trace_json(const proof_result& r,
                              const logic_definition& logic,
                              const formula_store& store, const limits& lim) {
  std::ostringstream os;
  auto esc = [](const std::string& s) {
    std::string o;
    for (char c : s) {
      if (c == '"' || c == '\\') o += '\\';
      o += c;
    }
    return o;
  };
  os << "{\"goal\":{\"premises\":[";
  for (size_t i = 0; i < r.tab.premises.size(); ++i) {
    if (i) os << ",";
    os << "\"" << esc(render_formula(store, r.tab.premises[i])) << "\"";
  }
  os << "],\"formula\":\"" << esc(render_formula(store, r.tab.goal))
     << "\"},\"logic\":\"" << logic.name << "\",";
  os << "\"limits\":{\"max_expressions_per_branch\":"
     << lim.max_expressions_per_branch
     << ",\"max_fresh_indices\":" << lim.max_fresh_indices
     << ",\"max_branches\":" << lim.max_branches
     << ",\"max_steps_total\":" << lim.max_steps_total << "},";
  os << "\"nodes\":[";
  for (size_t n = 0; n < r.tab.nodes.size(); ++n) {
    const auto& nd = r.tab.nodes[n];
    if (n) os << ",";
    os << "{\"id\":" << n << ",\"parent\":" << nd.parent << ",\"rule\":";
    if (nd.rule >= 0)
      os << "\"" << esc(logic.rules[nd.rule].name) << "\"";
    else
      os << "null";
    os << ",\"substitution\":\"" << esc([&] {
      std::string s;
      for (int m = 0; m < 4; ++m) {
        if (nd.subst.fmeta[m] == no_formula) continue;
        if (!s.empty()) s += " ";
        s += "F" + std::to_string(m) + "=" +
             render_formula(store, nd.subst.fmeta[m]);
      }
      for (int m = 0; m < 8; ++m) {
        if (!nd.subst.has_imeta(m)) continue;
        if (!s.empty()) s += " ";
        s += "i" + std::to_string(m) + "=" +
             render_index(nd.subst.imeta[m], logic.lang);
      }
      return s;
    }()) << "\"";
    os << ",\"alternative\":" << nd.alt << ",\"delta\":[";
    for (size_t i = 0; i < nd.delta.size(); ++i) {
      if (i) os << ",";
      os << "\"" << esc(render_expr(store, logic.lang, nd.delta[i])) << "\"";
    }
    os << "],\"status\":\"" << to_string(nd.status) << "\"}";
  }
  os << "],\"verdict\":\"" << to_string(r.kind) << "\"}";
  return os.str();
}

}  // namespace tabkit
