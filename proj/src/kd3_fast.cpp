#include "tabkit/kd3_fast.hpp"

#include <algorithm>
#include <atomic>
#include <cstring>
#include <map>
#include <tuple>
#include <sstream>
#include <thread>

#include "tabkit/logics.hpp"

namespace tabkit::kd3fast {

namespace {

// flattened formula program: ids ascend from subformulas to parents
struct fnode {
  uint8_t op;  // 0 !  1 &  2 |  3 ->  4 <->  5 <>  6 K  7 var
  int32_t a = 0, b = 0;
};

std::vector<uint8_t> modal_closure(const std::vector<fnode>& prog) {
  std::vector<uint8_t> dyn(prog.size(), 0);
  for (size_t f = 0; f < prog.size(); ++f) {
    const fnode& nd = prog[f];
    if (nd.op == 7) continue;
    if (nd.op == 5 || nd.op == 6) {
      dyn[f] = 1;
      continue;
    }
    dyn[f] = dyn[nd.a] | (nd.op >= 1 && nd.op <= 4 ? dyn[nd.b] : 0);
  }
  return dyn;
}

void mark_needed(const std::vector<fnode>& prog, formula_id f,
                 std::vector<uint8_t>& need) {
  if (need[f]) return;
  need[f] = 1;
  const fnode& nd = prog[f];
  if (nd.op == 7) return;
  mark_needed(prog, nd.a, need);
  if (nd.op >= 1 && nd.op <= 4) mark_needed(prog, nd.b, need);
}

std::vector<fnode> flatten(const formula_store& store, formula_id max_fid,
                           int num_vars, bool& ok) {
  std::vector<fnode> out(static_cast<size_t>(max_fid) + 1);
  ok = true;
  for (formula_id f = 0; f <= max_fid; ++f) {
    if (store.is_var(f)) {
      out[f] = {7, store.var_index(f), 0};
      if (store.var_index(f) >= num_vars) ok = false;
      continue;
    }
    const auto& id = store.conn(f).id;
    uint8_t op = id == "not"   ? 0
                 : id == "and" ? 1
                 : id == "or"  ? 2
                 : id == "imp" ? 3
                 : id == "iff" ? 4
                 : id == "dia" ? 5
                               : 6;
    out[f] = {op, store.arg(f, 0),
              store.arity(f) > 1 ? store.arg(f, 1) : 0};
  }
  return out;
}

struct model {
  int n = 1;
  uint16_t rk = 0, rd = 0;          // row-major bits w*3+u, w,u < n
  uint8_t val[3][3] = {};           // [world][var]
  bool edge(uint16_t bits, int w, int u) const {
    return bits & (1u << (w * 3 + u));
  }
};

// lexicographic key of the model under a world permutation
uint64_t perm_key(const model& m, const int* perm, int num_vars) {
  uint64_t key = 0;
  for (int w = 0; w < m.n; ++w)
    for (int u = 0; u < m.n; ++u) {
      key = (key << 1) | (m.edge(m.rk, perm[w], perm[u]) ? 1 : 0);
      key = (key << 1) | (m.edge(m.rd, perm[w], perm[u]) ? 1 : 0);
    }
  for (int w = 0; w < m.n; ++w)
    for (int v = 0; v < num_vars; ++v)
      key = key * 3 + m.val[perm[w]][v];
  return key;
}

bool is_canonical(const model& m, int num_vars) {
  static const int perms2[2][3] = {{0, 1, 2}, {1, 0, 2}};
  static const int perms3[6][3] = {{0, 1, 2}, {0, 2, 1}, {1, 0, 2},
                                   {1, 2, 0}, {2, 0, 1}, {2, 1, 0}};
  if (m.n == 1) return true;
  const int(*perms)[3] = m.n == 2 ? perms2 : perms3;
  int np = m.n == 2 ? 2 : 6;
  uint64_t base = perm_key(m, perms[0], num_vars);
  for (int p = 1; p < np; ++p)
    if (perm_key(m, perms[p], num_vars) < base) return false;
  return true;
}

struct vtable {
  // values[fid*3 + world]; only marked formulas are evaluated. Formulas with
  // no modal subterm depend on the valuation alone, so they are evaluated
  // once per valuation and kept across the frame loops.
  std::vector<uint8_t> values;
  void compute_layer(const std::vector<fnode>& prog,
                     const std::vector<uint8_t>& need, const model& m,
                     const std::vector<uint8_t>& dynamic, bool dynamic_pass) {
    values.resize(prog.size() * 3);
    for (size_t f = 0; f < prog.size(); ++f) {
      if (!need[f] || dynamic[f] != (dynamic_pass ? 1 : 0)) continue;
      const fnode& nd = prog[f];
      for (int w = 0; w < m.n; ++w) {
        uint8_t v = 0;
        switch (nd.op) {
          case 7: v = m.val[w][nd.a]; break;
          case 0: v = static_cast<uint8_t>(2 - values[nd.a * 3 + w]); break;
          case 1:
            v = std::min(values[nd.a * 3 + w], values[nd.b * 3 + w]);
            break;
          case 2:
            v = std::max(values[nd.a * 3 + w], values[nd.b * 3 + w]);
            break;
          case 3:
            v = static_cast<uint8_t>(std::min(
                2, 2 - values[nd.a * 3 + w] + values[nd.b * 3 + w]));
            break;
          case 4:
            v = static_cast<uint8_t>(
                2 - std::abs(values[nd.a * 3 + w] - values[nd.b * 3 + w]));
            break;
          case 6: {  // K: min over successors, empty = 1
            int acc = 2;
            for (int u = 0; u < m.n; ++u)
              if (m.edge(m.rk, w, u))
                acc = std::min<int>(acc, values[nd.a * 3 + u]);
            v = static_cast<uint8_t>(acc);
            break;
          }
          case 5: {  // <>: max over successors, empty = 0
            int acc = 0;
            for (int u = 0; u < m.n; ++u)
              if (m.edge(m.rd, w, u))
                acc = std::max<int>(acc, values[nd.a * 3 + u]);
            v = static_cast<uint8_t>(acc);
            break;
          }
        }
        values[f * 3 + w] = v;
      }
    }
  }
  uint8_t at(formula_id f, int w) const { return values[f * 3 + w]; }
};

// tiny CSP: slot masks plus relational constraints
bool solve(const model& m, const uint8_t* masks, int n_slots,
           const std::vector<crel>* rels1, const std::vector<crel>* rels2) {
  int assign[5];
  // recursive lambda via explicit stack-free recursion
  struct rec_t {
    const model& m;
    const uint8_t* masks;
    int n_slots;
    const std::vector<crel>* r1;
    const std::vector<crel>* r2;
    int* assign;
    bool check_rels(const std::vector<crel>& rels, int upto) const {
      for (const crel& r : rels) {
        if (r.i > upto || r.j > upto) continue;
        bool has = m.edge(r.rk ? m.rk : m.rd, assign[r.i], assign[r.j]);
        if (has == r.neg) return false;
      }
      return true;
    }
    bool go(int k) const {
      if (k == n_slots) return true;
      uint8_t mk = masks[k];
      for (int w = 0; w < m.n; ++w) {
        if (!(mk & (1 << w))) continue;
        assign[k] = w;
        if (r1 && !check_rels(*r1, k)) continue;
        if (r2 && !check_rels(*r2, k)) continue;
        if (go(k + 1)) return true;
      }
      return false;
    }
  } rec{m, masks, n_slots, rels1, rels2, assign};
  return rec.go(0);
}

// constraints remapped onto a shared table of (formula, value, neq) triples
struct tcons {
  uint8_t slot;
  uint16_t triple;
};
struct fast_alt {
  std::vector<tcons> cons;
  std::vector<crel> rels;
};
struct fast_instance {
  int schema = -1, sample = -1;
  int n_slots = 0;
  bool has_fresh = false;
  std::vector<tcons> in_cons;
  std::vector<crel> in_rels;
  std::vector<fast_alt> alts;
};

struct triple_table {
  std::vector<ccons> triples;  // slot field unused
  std::map<std::tuple<formula_id, bool, uint8_t>, uint16_t> index;
  uint16_t intern(const ccons& c) {
    auto key = std::make_tuple(c.f, c.neq, c.value);
    auto it = index.find(key);
    if (it != index.end()) return it->second;
    uint16_t id = static_cast<uint16_t>(triples.size());
    triples.push_back(c);
    index.emplace(key, id);
    return id;
  }
  void masks_layer(const vtable& vt, const model& m,
                   const std::vector<uint8_t>& dynamic, bool dynamic_pass,
                   std::vector<uint8_t>& out) const {
    out.resize(triples.size());
    for (size_t t = 0; t < triples.size(); ++t) {
      const ccons& c = triples[t];
      if ((dynamic[c.f] != 0) != dynamic_pass) continue;
      uint8_t mk = 0;
      for (int w = 0; w < m.n; ++w) {
        uint8_t v = vt.at(c.f, w);
        bool hit = c.neq ? (v != c.value) : (v == c.value);
        if (hit) mk |= (1 << w);
      }
      out[t] = mk;
    }
  }
};

bool instance_violates(const fast_instance& ci,
                       const std::vector<uint8_t>& tmask, const model& m) {
  uint8_t in_masks[5];
  uint8_t full = static_cast<uint8_t>((1 << m.n) - 1);
  for (int s = 0; s < ci.n_slots; ++s) in_masks[s] = full;
  for (const tcons& c : ci.in_cons) {
    in_masks[c.slot] &= tmask[c.triple];
    if (!in_masks[c.slot]) return false;
  }
  int total_slots = ci.n_slots + (ci.has_fresh ? 1 : 0);
  if (!solve(m, in_masks, ci.n_slots, &ci.in_rels, nullptr)) return false;
  for (const auto& alt : ci.alts) {
    uint8_t masks[5];
    std::memcpy(masks, in_masks, sizeof(in_masks));
    if (ci.has_fresh) masks[ci.n_slots] = full;
    bool ok = true;
    for (const tcons& c : alt.cons) {
      masks[c.slot] &= tmask[c.triple];
      if (!masks[c.slot]) {
        ok = false;
        break;
      }
    }
    if (!ok) continue;
    if (solve(m, masks, total_slots, &ci.in_rels, &alt.rels)) return false;
  }
  return true;
}

std::string describe(const model& m, int num_vars) {
  std::ostringstream os;
  os << "worlds=" << m.n << " rK=" << m.rk << " r<> = " << m.rd << " val=";
  for (int w = 0; w < m.n; ++w) {
    os << "[";
    for (int v = 0; v < num_vars; ++v) os << int(m.val[w][v]);
    os << "]";
  }
  return os.str();
}

// valuations iterate outermost so valuation-only work hoists out of the
// frame loops; fn(m, vals_changed) sees vals_changed on the first frame of
// each valuation
template <typename F>
void for_each_model(int max_worlds, int num_vars, int shard, int num_shards,
                    F&& fn) {
  for (int n = 1; n <= max_worlds; ++n) {
    int offdiag = n * n - n;
    uint16_t diag = 0;
    for (int w = 0; w < n; ++w) diag |= (1u << (w * 3 + w));
    std::vector<int> off_positions;
    for (int w = 0; w < n; ++w)
      for (int u = 0; u < n; ++u)
        if (w != u) off_positions.push_back(w * 3 + u);
    int rd_bits_count = n * n;
    std::vector<int> rd_positions;
    for (int w = 0; w < n; ++w)
      for (int u = 0; u < n; ++u) rd_positions.push_back(w * 3 + u);
    long vcount = 1;
    for (int i = 0; i < n * num_vars; ++i) vcount *= 3;
    long shard_counter = 0;
    for (long vi = 0; vi < vcount; ++vi) {
      if ((shard_counter++ % num_shards) != shard) continue;
      model m;
      m.n = n;
      long x = vi;
      for (int w = 0; w < n; ++w)
        for (int v = 0; v < num_vars; ++v) {
          m.val[w][v] = static_cast<uint8_t>(x % 3);
          x /= 3;
        }
      bool vals_changed = true;
      for (uint32_t ko = 0; ko < (1u << offdiag); ++ko) {
        uint16_t rk = diag;
        for (int b = 0; b < offdiag; ++b)
          if (ko & (1u << b)) rk |= (1u << off_positions[b]);
        m.rk = rk;
        for (uint32_t kd = 0; kd < (1u << rd_bits_count); ++kd) {
          uint16_t rd = 0;
          for (int b = 0; b < rd_bits_count; ++b)
            if (kd & (1u << b)) rd |= (1u << rd_positions[b]);
          m.rd = rd;
          fn(m, vals_changed);
          vals_changed = false;
        }
      }
    }
  }
}

}  // namespace

std::optional<compiled_instance> compile_instance(
    const expr_set& input, const rule_application& app,
    const logic_definition& logic, const formula_store& store) {
  compiled_instance ci;
  std::map<uint32_t, int> slot_of;
  auto slot = [&](index_term t, bool allow_fresh) -> int {
    if (t.is_reserved()) return -1;
    auto it = slot_of.find(t.value());
    if (it != slot_of.end()) return it->second;
    if (!allow_fresh) {
      int s = static_cast<int>(slot_of.size());
      if (s >= 4) return -2;
      slot_of[t.value()] = s;
      return s;
    }
    if (ci.has_fresh) return -2;  // a single fresh index is supported
    ci.has_fresh = true;
    slot_of[t.value()] = ci.n_slots;  // placed after the input slots
    return ci.n_slots;
  };
  auto compile_expr = [&](const expr& e, bool output, std::vector<ccons>& cons,
                          std::vector<crel>& rels) -> bool {
    switch (e.kind) {
      case expr_kind::tagged: {
        int s = slot(e.a0, output);
        if (s < 0) return false;
        ci.max_fid = std::max(ci.max_fid, e.f);
        if (e.argc == 1) {
          cons.push_back({static_cast<uint8_t>(s), e.f, e.neg, 2});
        } else {
          if (!e.a1.is_reserved()) return false;
          cons.push_back({static_cast<uint8_t>(s), e.f, e.neg,
                          static_cast<uint8_t>(e.a1.value())});
        }
        return true;
      }
      case expr_kind::rel: {
        int si = slot(e.a0, output);
        int sj = slot(e.a1, output);
        if (si < 0 || sj < 0) return false;
        rels.push_back({e.sym == sym::psym_rk, static_cast<uint8_t>(si),
                        static_cast<uint8_t>(sj), e.neg});
        return true;
      }
      case expr_kind::eq:
        return false;
    }
    return false;
  };
  for (const expr& e : input)
    if (!compile_expr(e, false, ci.in_cons, ci.in_rels)) return std::nullopt;
  ci.n_slots = static_cast<int>(slot_of.size());
  for (const auto& d : app.deltas) {
    compiled_alt alt;
    for (const expr& e : d)
      if (!compile_expr(e, true, alt.cons, alt.rels)) return std::nullopt;
    ci.alts.push_back(std::move(alt));
  }
  if (ci.n_slots + (ci.has_fresh ? 1 : 0) > 4) return std::nullopt;
  (void)logic;
  return ci;
}

fast_audit_result scan_models(const std::vector<compiled_instance>& instances,
                              const formula_store& store, int max_worlds,
                              int num_vars, int jobs) {
  fast_audit_result out;
  formula_id max_fid = 0;
  for (const auto& ci : instances) max_fid = std::max(max_fid, ci.max_fid);
  bool ok = true;
  std::vector<fnode> prog = flatten(store, max_fid, num_vars, ok);
  if (!ok)
    throw std::invalid_argument("audit pool uses more variables than scanned");

  // duplicate instances collapse onto one representative each
  triple_table tt;
  std::vector<fast_instance> fast;
  std::vector<std::vector<std::pair<int, int>>> origins;
  std::map<std::string, size_t> seen;
  for (const auto& ci : instances) {
    fast_instance fi;
    fi.schema = ci.schema;
    fi.sample = ci.sample;
    fi.n_slots = ci.n_slots;
    fi.has_fresh = ci.has_fresh;
    std::string sig;
    auto encode_cons = [&](const ccons& c, std::vector<tcons>& dst) {
      uint16_t t = tt.intern(c);
      dst.push_back({c.slot, t});
      sig += std::to_string(c.slot) + ":" + std::to_string(t) + ",";
    };
    for (const ccons& c : ci.in_cons) encode_cons(c, fi.in_cons);
    sig += "|";
    for (const crel& r : ci.in_rels) {
      fi.in_rels.push_back(r);
      sig += std::to_string(r.rk * 4 + r.neg * 2) + std::to_string(r.i) +
             std::to_string(r.j) + ",";
    }
    for (const auto& a : ci.alts) {
      fast_alt fa;
      sig += "/";
      for (const ccons& c : a.cons) encode_cons(c, fa.cons);
      for (const crel& r : a.rels) {
        fa.rels.push_back(r);
        sig += std::to_string(r.rk * 4 + r.neg * 2) + std::to_string(r.i) +
               std::to_string(r.j) + ",";
      }
      fi.alts.push_back(std::move(fa));
    }
    sig += "#" + std::to_string(fi.n_slots) + std::to_string(fi.has_fresh);
    auto it = seen.find(sig);
    if (it != seen.end()) {
      origins[it->second].push_back({ci.schema, ci.sample});
      continue;
    }
    seen.emplace(sig, fast.size());
    origins.push_back({{ci.schema, ci.sample}});
    fast.push_back(std::move(fi));
  }

  int threads = std::max(1, jobs);
  std::vector<fast_audit_result> partial(threads);
  std::vector<std::vector<uint8_t>> hit(threads);
  for (auto& h : hit) h.assign(fast.size(), 0);
  std::vector<uint8_t> need(prog.size(), 0);
  for (const ccons& c : tt.triples) mark_needed(prog, c.f, need);
  std::vector<uint8_t> dynamic = modal_closure(prog);
  auto work = [&](int shard) {
    vtable vt;
    std::vector<uint8_t> tmask;
    auto& res = partial[shard];
    for_each_model(
        max_worlds, num_vars, shard, threads,
        [&](const model& m, bool vals_changed) {
          if (vals_changed) {
            vt.compute_layer(prog, need, m, dynamic, false);
            tt.masks_layer(vt, m, dynamic, false, tmask);
          }
          if (!is_canonical(m, num_vars)) return;
          ++res.models;
          vt.compute_layer(prog, need, m, dynamic, true);
          tt.masks_layer(vt, m, dynamic, true, tmask);
          for (size_t i = 0; i < fast.size(); ++i) {
            if (hit[shard][i]) continue;  // one witness per instance is enough
            if (instance_violates(fast[i], tmask, m)) {
              hit[shard][i] = 1;
              for (auto [sc, sa] : origins[i])
                res.violations.push_back({sc, sa, describe(m, num_vars)});
            }
          }
        });
  };
  std::vector<std::thread> pool;
  for (int t = 0; t < threads; ++t) pool.emplace_back(work, t);
  for (auto& th : pool) th.join();
  for (auto& res : partial) {
    out.models += res.models;
    for (auto& v : res.violations) out.violations.push_back(v);
  }
  std::sort(out.violations.begin(), out.violations.end(),
            [](const fast_violation& a, const fast_violation& b) {
              return std::tie(a.schema, a.sample, a.model_desc) <
                     std::tie(b.schema, b.sample, b.model_desc);
            });
  // collapse duplicate (schema, sample) hits from different shards
  out.violations.erase(
      std::unique(out.violations.begin(), out.violations.end(),
                  [](const fast_violation& a, const fast_violation& b) {
                    return a.schema == b.schema && a.sample == b.sample;
                  }),
      out.violations.end());
  return out;
}

oracle_result oracle(const std::vector<formula_id>& premises, formula_id goal,
                     const formula_store& store, int max_worlds, int num_vars,
                     const std::vector<int>& var_ids) {
  oracle_result out;
  formula_id max_fid = goal;
  for (formula_id p : premises) max_fid = std::max(max_fid, p);
  // remap variable indices onto compact slots
  std::vector<fnode> prog(static_cast<size_t>(max_fid) + 1);
  for (formula_id f = 0; f <= max_fid; ++f) {
    if (store.is_var(f)) {
      int slot = -1;
      for (size_t i = 0; i < var_ids.size(); ++i)
        if (var_ids[i] == store.var_index(f)) slot = static_cast<int>(i);
      prog[f] = {7, slot < 0 ? 0 : slot, 0};
      continue;
    }
    const auto& id = store.conn(f).id;
    uint8_t op = id == "not"   ? 0
                 : id == "and" ? 1
                 : id == "or"  ? 2
                 : id == "imp" ? 3
                 : id == "iff" ? 4
                 : id == "dia" ? 5
                               : 6;
    prog[f] = {op, store.arg(f, 0), store.arity(f) > 1 ? store.arg(f, 1) : 0};
  }
  vtable vt;
  std::vector<uint8_t> need(prog.size(), 0);
  mark_needed(prog, goal, need);
  for (formula_id p : premises) mark_needed(prog, p, need);
  std::vector<uint8_t> dynamic = modal_closure(prog);
  bool found = false;
  for_each_model(max_worlds, std::max(1, num_vars), 0, 1, [&](const model& m,
                                                              bool vc) {
    if (found) return;
    if (vc) vt.compute_layer(prog, need, m, dynamic, false);
    if (!is_canonical(m, std::max(1, num_vars))) return;
    ++out.models;
    vt.compute_layer(prog, need, m, dynamic, true);
    for (int w = 0; w < m.n; ++w) {
      bool prem_ok = true;
      for (formula_id p : premises)
        if (vt.at(p, w) != 2) prem_ok = false;
      if (prem_ok && vt.at(goal, w) != 2) {
        found = true;
        out.holds = false;
        out.n = m.n;
        out.rk = m.rk;
        out.rd = m.rd;
        std::memcpy(out.val, m.val, sizeof(out.val));
        out.world = w;
        return;
      }
    }
  });
  return out;
}

bool check_input_suitable(const compiled_instance& ci,
                          const formula_store& store, int n, uint16_t rk,
                          uint16_t rd, const uint8_t val[3][3], int num_vars) {
  model m;
  m.n = n;
  m.rk = rk;
  m.rd = rd;
  std::memcpy(m.val, val, sizeof(m.val));
  bool ok = true;
  std::vector<fnode> prog = flatten(store, ci.max_fid, num_vars, ok);
  if (!ok) throw std::invalid_argument("variables outside the scan");
  std::vector<uint8_t> need(prog.size(), 0);
  for (const ccons& cc : ci.in_cons) mark_needed(prog, cc.f, need);
  std::vector<uint8_t> dynamic = modal_closure(prog);
  vtable vt;
  vt.compute_layer(prog, need, m, dynamic, false);
  vt.compute_layer(prog, need, m, dynamic, true);
  uint8_t masks[5];
  uint8_t full = static_cast<uint8_t>((1 << m.n) - 1);
  for (int s = 0; s < ci.n_slots; ++s) masks[s] = full;
  for (const ccons& cc : ci.in_cons) {
    uint8_t mk = 0;
    for (int w = 0; w < m.n; ++w) {
      uint8_t v = vt.at(cc.f, w);
      bool hit = cc.neq ? (v != cc.value) : (v == cc.value);
      if (hit) mk |= (1 << w);
    }
    masks[cc.slot] &= mk;
    if (!masks[cc.slot]) return false;
  }
  return solve(m, masks, ci.n_slots, &ci.in_rels, nullptr);
}

finite_structure to_structure(const oracle_result& r,
                              const std::vector<int>& var_ids) {
  finite_structure m;
  m.designated_domain = 1;
  for (int w = 0; w < r.n; ++w) m.add_element(1, {w + 1});
  m.domains[2] = {{0}, {1}, {2}};
  for (int w = 0; w < r.n; ++w)
    for (int n = 0; n < 3; ++n) m.add_element(3, {w + 1, n});
  for (int w = 0; w < r.n; ++w)
    for (int u = 0; u < r.n; ++u) {
      if (r.rk & (1u << (w * 3 + u)))
        m.relations[1].push_back({{w + 1}, {u + 1}});
      if (r.rd & (1u << (w * 3 + u)))
        m.relations[2].push_back({{w + 1}, {u + 1}});
    }
  for (int a = 0; a < 3; ++a)
    for (int b = a; b < 3; ++b) m.relations[3].push_back({{a}, {b}});
  for (int w = 0; w < r.n; ++w)
    for (size_t v = 0; v < var_ids.size(); ++v) {
      m.set_true(3, {w + 1, r.val[w][v]}, var_ids[v]);
      if (r.val[w][v] == 2) m.set_true(1, {w + 1}, var_ids[v]);
    }
  return m;
}

}  // namespace tabkit::kd3fast
