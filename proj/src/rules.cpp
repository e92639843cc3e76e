#include "tabkit/rules.hpp"

#include <algorithm>
#include <cassert>
#include <random>
#include <set>
#include <sstream>
#include <functional>

namespace tabkit {

namespace {

uint32_t expr_key(const expr& e, const formula_store& st) {
  uint32_t k = static_cast<uint32_t>(e.kind);
  k |= static_cast<uint32_t>(e.neg) << 2;
  k |= static_cast<uint32_t>(e.sym & 0x7) << 3;
  k |= static_cast<uint32_t>(e.argc & 0x3) << 6;
  uint32_t head = 0;
  if (e.kind == expr_kind::tagged)
    head = st.is_var(e.f) ? 1u : static_cast<uint32_t>(2 + st.conn_index(e.f));
  k |= (head & 0x1f) << 8;
  uint32_t a0 = e.a0.is_reserved() ? (1 + e.a0.value()) : 0;
  k |= (a0 & 0xff) << 13;
  if (e.kind != expr_kind::tagged || e.argc > 1) {
    uint32_t a1 = e.a1.is_reserved() ? (1 + e.a1.value()) : 0;
    k |= (a1 & 0xff) << 21;
  }
  return k;
}

void compile_pat(pat_expr& p) {
  uint32_t mask = 0x3 | (1u << 2) | (0x7u << 3) | (0x3u << 6);
  uint32_t want = static_cast<uint32_t>(p.kind) |
                  (static_cast<uint32_t>(p.neg) << 2) |
                  (static_cast<uint32_t>(p.sym & 0x7) << 3) |
                  (static_cast<uint32_t>(p.argc & 0x3) << 6);
  if (p.kind == expr_kind::tagged && p.formula.conn >= 0) {
    mask |= 0x1fu << 8;
    want |= static_cast<uint32_t>(2 + p.formula.conn) << 8;
  }
  auto field = [&](const ipat& ip, int shift) {
    if (ip.k == ipat::kinds::lit) {
      mask |= 0xffu << shift;
      want |= static_cast<uint32_t>(1 + ip.id) << shift;
    } else if (ip.k == ipat::kinds::imeta) {
      mask |= 0xffu << shift;  // want 0: renameable
    }
  };
  field(p.a0, 13);
  if (p.kind != expr_kind::tagged || p.argc > 1) field(p.a1, 21);
  p.key_mask = mask;
  p.key_want = want;
}

bool match_fpat(const fpat& p, formula_id f, const formula_store& st,
                substitution& s) {
  if (p.conn < 0) {
    if (s.fmeta[p.meta] == no_formula) {
      s.fmeta[p.meta] = f;
      return true;
    }
    return s.fmeta[p.meta] == f;
  }
  if (st.is_var(f) || st.conn_index(f) != p.conn) return false;
  for (size_t k = 0; k < p.args.size(); ++k)
    if (!match_fpat(p.args[k], st.arg(f, static_cast<int>(k)), st, s))
      return false;
  return true;
}

bool bind_ipat(const ipat& p, index_term t, substitution& s) {
  switch (p.k) {
    case ipat::kinds::imeta:
      if (t.is_reserved()) return false;
      if (s.has_imeta(p.id)) return s.imeta[p.id] == t;
      s.set_imeta(p.id, t);
      return true;
    case ipat::kinds::vmeta:
      if (!t.is_reserved()) return false;
      if (s.vmeta[p.id] != 0xff) return s.vmeta[p.id] == t.value();
      s.vmeta[p.id] = static_cast<uint8_t>(t.value());
      return true;
    case ipat::kinds::lit:
      return t.is_reserved() && t.value() == p.id;
  }
  return false;
}

bool match_pat(const pat_expr& p, const expr& e, const formula_store& st,
               substitution& s) {
  if (p.kind == expr_kind::tagged && !match_fpat(p.formula, e.f, st, s))
    return false;
  if (!bind_ipat(p.a0, e.a0, s)) return false;
  if (p.kind != expr_kind::tagged || p.argc > 1)
    if (!bind_ipat(p.a1, e.a1, s)) return false;
  return true;
}

formula_id build_fpat(const fpat& p, const substitution& s, formula_store& st,
                      int override_meta, formula_id override_f) {
  if (p.conn < 0) {
    if (p.meta == override_meta && override_f != no_formula) return override_f;
    return s.fmeta[p.meta];
  }
  formula_id args[2];
  for (size_t k = 0; k < p.args.size(); ++k)
    args[k] = build_fpat(p.args[k], s, st, override_meta, override_f);
  return st.app(p.conn, std::span<const formula_id>(args, p.args.size()));
}

index_term resolve_ipat(const ipat& p, const substitution& s) {
  switch (p.k) {
    case ipat::kinds::imeta:
      assert(s.has_imeta(p.id));
      return s.imeta[p.id];
    case ipat::kinds::vmeta:
      assert(s.vmeta[p.id] != 0xff);
      return index_term::reserved(s.vmeta[p.id]);
    case ipat::kinds::lit:
      return index_term::reserved(p.id);
  }
  return {};
}

expr instantiate_template(const pat_expr& t, const substitution& s,
                          formula_store& st, int override_meta = -1,
                          formula_id override_f = no_formula) {
  expr e;
  e.kind = t.kind;
  e.neg = t.neg;
  e.sym = t.sym;
  e.argc = t.argc;
  if (t.kind == expr_kind::tagged)
    e.f = build_fpat(t.formula, s, st, override_meta, override_f);
  e.a0 = resolve_ipat(t.a0, s);
  if (t.kind != expr_kind::tagged || t.argc > 1)
    e.a1 = resolve_ipat(t.a1, s);
  return e;
}

bool absent_found(const guard& g, size_t ti, substitution& s,
                  const expr_set& x, const uint32_t* keys,
                  const formula_store& st) {
  if (ti == g.templates.size()) {
    for (auto [a, b] : g.distinct)
      if (s.imeta[a] == s.imeta[b]) return false;
    return true;
  }
  const pat_expr& t = g.templates[ti];
  for (size_t i = 0; i < x.size(); ++i) {
    if ((keys[i] & t.key_mask) != t.key_want) continue;
    substitution s2 = s;
    if (match_pat(t, x[i], st, s2) && absent_found(g, ti + 1, s2, x, keys, st))
      return true;
  }
  return false;
}

bool guards_pass(const rule_schema& sch, const substitution& s,
                 const expr_set& x, const uint32_t* keys,
                 const formula_store& st) {
  for (const guard& g : sch.guards) {
    switch (g.k) {
      case guard::kinds::fresh:
        break;  // satisfied by construction: fresh metas never match premises
      case guard::kinds::distinct_index:
        if (s.imeta[g.a] == s.imeta[g.b]) return false;
        break;
      case guard::kinds::distinct_value:
        if (s.vmeta[g.a] == s.vmeta[g.b]) return false;
        break;
      case guard::kinds::value_lt:
        if (!(s.vmeta[g.a] < s.vmeta[g.b])) return false;
        break;
      case guard::kinds::absent_instance: {
        substitution probe = s;
        if (absent_found(g, 0, probe, x, keys, st)) return false;
        break;
      }
    }
  }
  return true;
}

}  // namespace

void rule_schema::compile(const signature&) {
  for (auto& p : premises) compile_pat(p);
  for (auto& alt : alts)
    for (auto& t : alt) compile_pat(t);
  for (auto& g : guards)
    for (auto& t : g.templates) compile_pat(t);
}

subst_key substitution::key() const {
  subst_key k;
  for (int i = 0; i < 4; ++i) k.w[i] = static_cast<uint32_t>(fmeta[i] + 1);
  for (int i = 0; i < 8; ++i) k.w[4 + i] = has_imeta(i) ? imeta[i].bits + 1 : 0;
  k.w[12] = (static_cast<uint32_t>(vmeta[0]) << 24) |
            (static_cast<uint32_t>(vmeta[1]) << 16) |
            (static_cast<uint32_t>(vmeta[2]) << 8) | vmeta[3];
  k.w[13] = imeta_set;
  return k;
}

std::string substitution::encode() const {
  subst_key k = key();
  std::string out;
  out.reserve(k.w.size() * 4);
  for (uint32_t v : k.w)
    for (int i = 3; i >= 0; --i)
      out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
  return out;
}

namespace {

thread_local std::vector<uint32_t> tl_keys;

const uint32_t* cache_keys(const expr_set& x, const formula_store& st) {
  tl_keys.resize(x.size());
  for (size_t i = 0; i < x.size(); ++i) tl_keys[i] = expr_key(x[i], st);
  return tl_keys.data();
}

void match_rec(const rule_schema& sch, size_t pi, substitution s,
               const expr_set& x, const uint32_t* keys,
               const formula_store& st, std::vector<substitution>& out) {
  if (pi == sch.premises.size()) {
    out.push_back(s);
    return;
  }
  const pat_expr& p = sch.premises[pi];
  for (size_t i = 0; i < x.size(); ++i) {
    if ((keys[i] & p.key_mask) != p.key_want) continue;
    substitution s2 = s;
    if (match_pat(p, x[i], st, s2)) match_rec(sch, pi + 1, s2, x, keys, st, out);
  }
}

std::vector<substitution> match_pairs(const rule_schema& sch,
                                      const expr_set& x,
                                      const match_context& ctx) {
  // Pair-provenance matching: the premise triple is bound from a recorded
  // pair in the two orientations the source system actually uses, so each
  // pair yields at most two applications.
  std::vector<substitution> out;
  auto content_sym = sch.premises.empty() ? 0 : sch.premises[0].sym;
  for (const auto& pr : ctx.pairs) {
    expr left = expr::tagged(pr.a, false, label::one(content_sym, pr.i));
    expr right = expr::tagged(pr.b, false, label::one(content_sym, pr.j));
    if (!x.contains(left) || !x.contains(right)) continue;
    {
      substitution s;
      s.fmeta[0] = pr.a;  // A
      s.fmeta[1] = pr.b;  // B
      s.set_imeta(0, pr.i);
      s.set_imeta(1, pr.j);
      s.set_imeta(2, pr.i);  // k = i, third premise is the pair's left
      out.push_back(s);
    }
    {
      substitution s;
      s.fmeta[0] = pr.b;
      s.fmeta[1] = pr.a;
      s.set_imeta(0, pr.j);
      s.set_imeta(1, pr.i);
      s.set_imeta(2, pr.j);  // k = j, third premise is the pair's right
      out.push_back(s);
    }
  }
  return out;
}

}  // namespace

namespace {

void sort_matches(std::vector<substitution>& out) {
  if (out.size() <= 1) return;
  std::vector<std::pair<subst_key, uint32_t>> order(out.size());
  for (size_t i = 0; i < out.size(); ++i) order[i] = {out[i].key(), i};
  std::sort(order.begin(), order.end());
  std::vector<substitution> sorted;
  sorted.reserve(out.size());
  for (size_t i = 0; i < order.size(); ++i) {
    if (i && order[i].first == order[i - 1].first) continue;
    sorted.push_back(out[order[i].second]);
  }
  out = std::move(sorted);
}

}  // namespace

namespace {

std::vector<substitution> match_core_keys(const rule_schema& schema,
                                          const expr_set& x,
                                          const uint32_t* keys,
                                          const formula_store& store,
                                          const match_context& ctx) {
  std::vector<substitution> out;
  if (schema.matcher == matcher_kind::pair_provenance) {
    out = match_pairs(schema, x, ctx);
  } else {
    match_rec(schema, 0, substitution{}, x, keys, store, out);
  }
  sort_matches(out);
  return out;
}

}  // namespace

std::vector<substitution> match_core(const rule_schema& schema,
                                     const expr_set& x,
                                     const formula_store& store,
                                     const match_context& ctx) {
  return match_core_keys(schema, x, cache_keys(x, store), store, ctx);
}

namespace {

std::string encode_delta(const std::vector<expr>& delta) {
  std::string out;
  for (const expr& e : delta) {
    uint64_t h[2] = {static_cast<uint64_t>(e.kind) |
                         (static_cast<uint64_t>(e.neg) << 2) |
                         (static_cast<uint64_t>(e.sym) << 3) |
                         (static_cast<uint64_t>(e.argc) << 11) |
                         (static_cast<uint64_t>(static_cast<uint32_t>(e.f)) << 13),
                     static_cast<uint64_t>(e.a0.bits) |
                         (static_cast<uint64_t>(e.a1.bits) << 32)};
    out.append(reinterpret_cast<const char*>(h), sizeof(h));
  }
  return out;
}

}  // namespace

namespace {
std::optional<rule_application> instantiate_impl(
    const rule_schema& schema, int schema_index, const substitution& subst,
    const expr_set& x, const uint32_t* keys, formula_store& store,
    bool input_known_consistent,
    const std::vector<index_term>* fresh_override) {
  if (!input_known_consistent && is_b_inconsistent(x)) return std::nullopt;
  if (!guards_pass(schema, subst, x, keys, store)) return std::nullopt;
  substitution s = subst;
  uint32_t next = max_renameable(x) + 1;
  for (size_t fi = 0; fi < schema.fresh_imetas.size(); ++fi) {
    uint8_t m = schema.fresh_imetas[fi];
    if (fresh_override) {
      s.set_imeta(m, (*fresh_override)[fi]);
    } else {
      s.set_imeta(m, index_term::renameable(next++));
    }
  }

  std::vector<std::vector<expr>> deltas;
  auto build_alt = [&](const std::vector<pat_expr>& templates,
                       int override_meta,
                       formula_id override_f) -> std::vector<expr> {
    std::vector<expr> delta;
    for (const pat_expr& t : templates) {
      if (t.var_expand >= 0) {
        formula_id host = (t.var_expand == override_meta && override_f != no_formula)
                              ? override_f
                              : s.fmeta[t.var_expand];
        for (int vi : vars_of(store, host)) {
          expr e = instantiate_template(t, s, store, t.var_expand,
                                        store.var_node(vi));
          if (!x.contains(e)) delta.push_back(e);
        }
      } else {
        expr e = instantiate_template(t, s, store, override_meta, override_f);
        if (!x.contains(e)) delta.push_back(e);
      }
    }
    std::sort(delta.begin(), delta.end());
    delta.erase(std::unique(delta.begin(), delta.end()), delta.end());
    return delta;
  };

  if (schema.amode == alt_mode::fixed) {
    for (const auto& alt : schema.alts) {
      auto d = build_alt(alt, -1, no_formula);
      if (d.empty()) return std::nullopt;  // an output would equal the input
      deltas.push_back(std::move(d));
    }
  } else {
    formula_id host = s.fmeta[schema.alt_var_meta];
    for (int vi : vars_of(store, host)) {
      auto d = build_alt(schema.alts[0], schema.alt_var_meta,
                         store.var_node(vi));
      if (d.empty()) return std::nullopt;
      deltas.push_back(std::move(d));
    }
    if (deltas.empty()) return std::nullopt;
  }

  // collapse duplicate outputs (keeps the induced tuple inside the rule)
  {
    std::vector<std::vector<expr>> uniq;
    std::set<std::string> seen;
    for (auto& d : deltas)
      if (seen.insert(encode_delta(d)).second) uniq.push_back(std::move(d));
    deltas = std::move(uniq);
  }

  rule_application app;
  app.schema = schema_index;
  app.subst = s;
  app.deltas = std::move(deltas);
  return app;
}
}  // namespace

std::optional<rule_application> instantiate(const rule_schema& schema,
                                            int schema_index,
                                            const substitution& subst,
                                            const expr_set& x,
                                            formula_store& store,
                                            const match_context&,
                                            bool input_known_consistent) {
  return instantiate_impl(schema, schema_index, subst, x,
                          cache_keys(x, store), store,
                          input_known_consistent, nullptr);
}

expr instantiate_premise(const rule_schema& schema, size_t premise_idx,
                         const substitution& s, formula_store& store) {
  return instantiate_template(schema.premises.at(premise_idx), s, store);
}

rule_instance materialize(const rule_application& app, const expr_set& input) {
  rule_instance inst;
  inst.schema = app.schema;
  inst.subst = app.subst;
  inst.input = input;
  for (const auto& d : app.deltas) {
    expr_set out = input;
    for (const expr& e : d) out.insert(e);
    inst.outputs.push_back(std::move(out));
  }
  return inst;
}

std::vector<rule_application> applicable_instances(
    const std::vector<rule_schema>& rules, const expr_set& x,
    formula_store& store, const match_context& ctx) {
  std::vector<rule_application> out;
  if (is_b_inconsistent(x)) return out;
  const uint32_t* keys = cache_keys(x, store);
  std::set<std::pair<int, std::string>> seen;
  for (size_t ri = 0; ri < rules.size(); ++ri) {
    for (const substitution& s :
         match_core_keys(rules[ri], x, keys, store, ctx)) {
      auto app = instantiate_impl(rules[ri], static_cast<int>(ri), s, x, keys,
                                  store, true, nullptr);
      if (!app) continue;
      std::string dk;
      for (auto& d : app->deltas) dk += encode_delta(d) + "|";
      if (!seen.insert({static_cast<int>(ri), dk}).second) continue;
      out.push_back(std::move(*app));
    }
  }
  return out;
}

std::optional<rule_application> first_applicable(
    const std::vector<rule_schema>& rules, const expr_set& x,
    formula_store& store, const match_context& ctx) {
  if (is_b_inconsistent(x)) return std::nullopt;
  const uint32_t* keys = cache_keys(x, store);
  for (size_t ri = 0; ri < rules.size(); ++ri) {
    for (const substitution& s :
         match_core_keys(rules[ri], x, keys, store, ctx)) {
      auto app = instantiate_impl(rules[ri], static_cast<int>(ri), s, x, keys,
                                  store, true, nullptr);
      if (app) return app;
    }
  }
  return std::nullopt;
}

uint32_t expr_match_key(const expr& e, const formula_store& st) {
  return expr_key(e, st);
}

bool premise0_key_matches(const rule_schema& schema, uint32_t key) {
  if (schema.premises.empty()) return true;
  const pat_expr& p = schema.premises[0];
  return (key & p.key_mask) == p.key_want;
}

namespace {

bool in_tail(const expr& e, const std::vector<expr>& branch_exprs,
             uint32_t from) {
  for (size_t i = from; i < branch_exprs.size(); ++i)
    if (branch_exprs[i] == e) return true;
  return false;
}

// completes premises pi.. and keeps only matches that use at least one
// expression past the watermark (tracked by `fresh_used`)
void match_rec_tail(const rule_schema& sch, size_t pi, substitution s,
                    bool fresh_used, const expr_set& x, const uint32_t* keys,
                    const formula_store& st,
                    const std::vector<expr>& branch_exprs, uint32_t from,
                    std::vector<substitution>& out) {
  if (pi == sch.premises.size()) {
    if (fresh_used) out.push_back(s);
    return;
  }
  const pat_expr& p = sch.premises[pi];
  for (size_t i = 0; i < x.size(); ++i) {
    if ((keys[i] & p.key_mask) != p.key_want) continue;
    substitution s2 = s;
    if (match_pat(p, x[i], st, s2))
      match_rec_tail(sch, pi + 1, s2,
                     fresh_used || in_tail(x[i], branch_exprs, from), x, keys,
                     st, branch_exprs, from, out);
  }
}

}  // namespace

std::optional<rule_application> first_applicable_indexed(
    const std::vector<rule_schema>& rules, const expr_set& x,
    formula_store& store, const match_context& ctx,
    const std::vector<std::vector<expr>>& premise0_cands,
    const std::vector<expr>& branch_exprs, std::vector<uint32_t>& watermarks,
    watermark_moves& moved, int* chosen_schema) {
  const uint32_t* keys = cache_keys(x, store);
  const uint32_t here = static_cast<uint32_t>(branch_exprs.size());
  std::vector<substitution> matches;
  for (size_t ri = 0; ri < rules.size(); ++ri) {
    const rule_schema& sch = rules[ri];
    matches.clear();
    uint32_t wm = watermarks[ri];
    if (sch.matcher == matcher_kind::pair_provenance) {
      // pair bindings live outside the expression sequence: always rescan
      if (ctx.pairs.empty()) continue;
      matches = match_pairs(sch, x, ctx);
    } else {
      if (premise0_cands[ri].empty()) continue;
      if (wm >= here) continue;  // nothing new since the last verification
      const pat_expr& p0 = sch.premises[0];
      if (wm > 0) {
        for (const expr& e : premise0_cands[ri]) {
          substitution s;
          if (!match_pat(p0, e, store, s)) continue;
          if (in_tail(e, branch_exprs, wm)) {
            match_rec(sch, 1, s, x, keys, store, matches);
          } else if (sch.premises.size() > 1) {
            match_rec_tail(sch, 1, s, false, x, keys, store, branch_exprs, wm,
                           matches);
          }
        }
      } else {
        for (const expr& e : premise0_cands[ri]) {
          substitution s;
          if (!match_pat(p0, e, store, s)) continue;
          match_rec(sch, 1, s, x, keys, store, matches);
        }
      }
    }
    if (!matches.empty()) {
      sort_matches(matches);
      for (const substitution& s : matches) {
        auto app = instantiate_impl(sch, static_cast<int>(ri), s, x, keys,
                                    store, true, nullptr);
        if (app) {
          if (chosen_schema) *chosen_schema = static_cast<int>(ri);
          return app;
        }
      }
    }
    if (sch.matcher != matcher_kind::pair_provenance && watermarks[ri] < here) {
      moved.record(static_cast<uint32_t>(ri), watermarks[ri]);
      watermarks[ri] = here;
    }
  }
  return std::nullopt;
}

// --- audit ---------------------------------------------------------------

namespace {

std::string ipat_repr(const ipat& p) {
  switch (p.k) {
    case ipat::kinds::imeta: return "i" + std::to_string(p.id);
    case ipat::kinds::vmeta: return "v" + std::to_string(p.id);
    case ipat::kinds::lit: return "#" + std::to_string(p.id);
  }
  return "?";
}

std::string fpat_repr(const fpat& p) {
  if (p.conn < 0) return "F" + std::to_string(p.meta);
  std::string out = "c" + std::to_string(p.conn) + "(";
  for (size_t k = 0; k < p.args.size(); ++k) {
    if (k) out += ",";
    out += fpat_repr(p.args[k]);
  }
  return out + ")";
}

std::string pattern_repr(const pat_expr& t) {
  std::string out;
  out += std::to_string(static_cast<int>(t.kind));
  out += t.neg ? "~" : "+";
  out += "s" + std::to_string(t.sym);
  if (t.kind == expr_kind::tagged) out += fpat_repr(t.formula);
  out += "[" + ipat_repr(t.a0);
  if (t.kind != expr_kind::tagged || t.argc > 1) out += "," + ipat_repr(t.a1);
  out += "]";
  if (t.var_expand >= 0) out += "*" + std::to_string(t.var_expand);
  return out;
}

// random bijection over the renameable indices of x, onto shifted targets
index_bijection random_renaming(const expr_set& x, std::mt19937_64& rng) {
  std::vector<uint32_t> src;
  for (auto t : indices_of(x))
    if (!t.is_reserved()) src.push_back(t.value());
  uint32_t base = 1;
  for (uint32_t v : src) base = std::max(base, v + 1);
  std::vector<uint32_t> dst;
  uint32_t span = static_cast<uint32_t>(src.size()) * 3 + 4;
  while (dst.size() < src.size()) {
    uint32_t cand = 1 + static_cast<uint32_t>(rng() % (base + span));
    if (std::find(dst.begin(), dst.end(), cand) == dst.end())
      dst.push_back(cand);
  }
  index_bijection b;
  for (size_t i = 0; i < src.size(); ++i) b.map.push_back({src[i], dst[i]});
  std::sort(b.map.begin(), b.map.end());
  return b;
}

match_context rename_ctx(const match_context& ctx, const index_bijection& b) {
  match_context out;
  for (const auto& pr : ctx.pairs) {
    match_context::pair_rec r = pr;
    try {
      r.i = b.apply_term(pr.i);
      r.j = b.apply_term(pr.j);
    } catch (const std::invalid_argument&) {
      continue;  // pair indices no longer in scope
    }
    out.pairs.push_back(r);
  }
  return out;
}

bool delta_sets_equal(const expr_set& base1, const std::vector<expr>& d1,
                      const expr_set& base2, const std::vector<expr>& d2) {
  expr_set a = base1, b = base2;
  for (const expr& e : d1) a.insert(e);
  for (const expr& e : d2) b.insert(e);
  return a == b;
}

void subsets_rec(const std::vector<expr>& items, size_t i,
                 std::vector<expr>& acc, std::vector<expr_set>& out) {
  if (i == items.size()) {
    out.push_back(expr_set(acc));
    return;
  }
  subsets_rec(items, i + 1, acc, out);
  acc.push_back(items[i]);
  subsets_rec(items, i + 1, acc, out);
  acc.pop_back();
}

// all subsets of z with the given size (desk scale)
void sized_subsets(const expr_set& z, size_t size,
                   std::vector<expr_set>& out) {
  std::vector<expr> items(z.begin(), z.end());
  std::vector<int> pick;
  std::vector<expr> acc;
  std::function<void(size_t)> rec = [&](size_t i) {
    if (acc.size() == size) {
      out.push_back(expr_set(acc));
      return;
    }
    if (i == items.size() || items.size() - i < size - acc.size()) return;
    acc.push_back(items[i]);
    rec(i + 1);
    acc.pop_back();
    rec(i + 1);
  };
  rec(0);
}

}  // namespace

audit_report audit_rule_schema(const rule_schema& schema, int schema_index,
                               const std::vector<expr_set>& sample_inputs,
                               const std::vector<index_term>& lv,
                               formula_store& store, const match_context& ctx,
                               const audit_options& opts) {
  audit_report rep;
  std::mt19937_64 rng(opts.seed ^ 0x9e3779b9ull);
  auto add = [&](const char* cond, int sample, bool viol, std::string w) {
    rep.entries.push_back(
        {schema.name, cond, sample, viol, std::move(w)});
  };

  // static shape checks
  if (schema.amode == alt_mode::fixed) {
    bool adds_everywhere = true;
    for (const auto& alt : schema.alts) {
      bool adds = false;
      for (const auto& t : alt) {
        bool dup = false;
        for (const auto& p : schema.premises)
          if (pattern_repr(t) == pattern_repr(p)) dup = true;
        if (!dup) adds = true;
      }
      if (!adds) adds_everywhere = false;
    }
    add("proper-extension", -1, !adds_everywhere,
        adds_everywhere ? "every alternative extends the premises"
                        : "an alternative repeats the premises verbatim");
    std::set<std::string> reprs;
    bool distinct = true;
    for (const auto& alt : schema.alts) {
      std::string r;
      for (const auto& t : alt) r += pattern_repr(t) + ";";
      if (!reprs.insert(r).second) distinct = false;
    }
    add("distinct-outputs", -1, !distinct,
        distinct ? "alternatives pairwise distinct"
                 : "duplicate alternative template lists");
  } else {
    add("proper-extension", -1, schema.alts.size() != 1 || schema.alts[0].empty(),
        "per-variable fork");
    add("distinct-outputs", -1, false, "per-variable forks are distinct per variable");
  }
  add("finite-outputs", -1, false, "outputs add finitely many expressions by shape");

  for (size_t si = 0; si < sample_inputs.size(); ++si) {
    const expr_set& x = sample_inputs[si];
    auto substs = match_core(schema, x, store, ctx);
    if (is_b_inconsistent(x)) {
      for (const auto& s : substs) {
        if (instantiate(schema, schema_index, s, x, store, ctx))
          add("consistent-input", static_cast<int>(si), true,
              "instance produced on a b-inconsistent input");
      }
      continue;
    }
    for (const auto& s : substs) {
      auto app =
          instantiate(schema, schema_index, s, x, store, ctx, true);
      if (!app) continue;

      for (const auto& d : app->deltas)
        if (d.empty())
          add("proper-extension", static_cast<int>(si), true, "empty output delta");
      {
        std::set<std::string> dk;
        for (const auto& d : app->deltas)
          if (!dk.insert(encode_delta(d)).second)
            add("distinct-outputs", static_cast<int>(si), true, "duplicate outputs");
      }

      // (CC) core containment and minimality
      std::vector<expr> core_exprs;
      for (const auto& p : schema.premises)
        core_exprs.push_back(instantiate_template(p, app->subst, store));
      expr_set core(core_exprs);
      if (!core.subset_of(x)) {
        add("minimal-core", static_cast<int>(si), true, "core escapes the input");
        continue;
      }
      std::vector<index_term> fresh_vals;
      for (uint8_t m : schema.fresh_imetas)
        fresh_vals.push_back(app->subst.imeta[m]);
      bool cc_viol = false;
      {
        std::vector<expr> items(core.begin(), core.end());
        std::vector<expr_set> subs;
        std::vector<expr> acc;
        subsets_rec(items, 0, acc, subs);
        for (const auto& u : subs) {
          if (u.size() == core.size()) continue;  // proper subsets only
          for (const auto& s2 : match_core(schema, u, store, ctx)) {
            auto app2 = instantiate_impl(schema, schema_index, s2, u,
                                         cache_keys(u, store), store, true,
                                         &fresh_vals);
            if (!app2 || app2->deltas.size() != app->deltas.size()) continue;
            bool all_same = true;
            for (size_t k = 0; k < app->deltas.size(); ++k)
              if (!delta_sets_equal(u, app2->deltas[k], u, app->deltas[k]))
                all_same = false;
            if (all_same) cc_viol = true;
          }
        }
      }
      add("minimal-core", static_cast<int>(si), cc_viol,
          cc_viol ? "a proper subset of the core supports the same expansion"
                  : "core minimal and contained in the input");

      // (CS) closure under similar sets, probed with random renamings
      for (int t = 0; t < opts.renamings_per_sample; ++t) {
        index_bijection b = random_renaming(x, rng);
        expr_set xr = apply_renaming(x, b);
        match_context cr = rename_ctx(ctx, b);
        bool found = false;
        for (const auto& sr : match_core(schema, xr, store, cr)) {
          auto appr =
              instantiate(schema, schema_index, sr, xr, store, cr, true);
          if (!appr || appr->deltas.size() != app->deltas.size()) continue;
          bool all_sim = true;
          for (size_t k = 0; k < app->deltas.size() && all_sim; ++k) {
            expr_set o1 = x, o2 = xr;
            for (const expr& e : app->deltas[k]) o1.insert(e);
            for (const expr& e : appr->deltas[k]) o2.insert(e);
            if (!are_similar(o1, o2, lv)) all_sim = false;
          }
          if (all_sim) {
            found = true;
            break;
          }
        }
        add("renaming-closure", static_cast<int>(si), !found,
            found ? "renamed input instantiates with similar outputs"
                  : "no similar instance on a renamed input");
      }

      // (CE) closure under expansion, probed with noise supersets
      std::vector<formula_id> pool;
      for (const expr& e : x)
        if (e.kind == expr_kind::tagged) pool.push_back(e.f);
      for (int t = 0; t < opts.supersets_per_sample && !pool.empty(); ++t) {
        expr_set z = x;
        uint32_t hi = max_renameable(x) + 20 + t;
        int n_noise = 1 + static_cast<int>(rng() % 2);
        for (int q = 0; q < n_noise; ++q) {
          formula_id nf = pool[rng() % pool.size()];
          const expr& sample_e = x[rng() % x.size()];
          if (sample_e.kind != expr_kind::tagged) continue;
          label l = sample_e.get_label();
          l.args[0] = index_term::renameable(hi + q);
          expr noise = expr::tagged(nf, rng() % 2 == 0, l);
          z.insert(noise);
        }
        if (z.size() == x.size() || is_b_inconsistent(z)) continue;
        // faithful precondition: no output similar to a subset of z
        bool precondition = true;
        for (const auto& d : app->deltas) {
          expr_set out = x;
          for (const expr& e : d) out.insert(e);
          std::vector<expr_set> cands;
          sized_subsets(z, out.size(), cands);
          for (const auto& cand : cands)
            if (are_similar(out, cand, lv)) precondition = false;
        }
        if (!precondition) continue;
        bool found = false;
        for (const auto& s3 : match_core(schema, z, store, ctx)) {
          if (s3.encode() != s.encode()) continue;  // same core binding
          auto app3 =
              instantiate(schema, schema_index, s3, z, store, ctx, true);
          if (!app3 || app3->deltas.size() != app->deltas.size()) continue;
          bool all_sim = true;
          for (size_t k = 0; k < app->deltas.size() && all_sim; ++k) {
            expr_set w1 = core, w2 = core;
            for (const expr& e : app->deltas[k]) w1.insert(e);
            for (const expr& e : app3->deltas[k]) w2.insert(e);
            if (!are_similar(w1, w2, lv)) all_sim = false;
          }
          if (all_sim) {
            found = true;
            break;
          }
        }
        add("superset-closure", static_cast<int>(si), !found,
            found ? "expansion instance exists on the superset"
                  : "no instance over the same core on a clean superset");
      }
    }
  }
  return rep;
}

std::string audit_report::to_json() const {
  std::ostringstream os;
  auto esc = [](const std::string& s) {
    std::string o;
    for (char c : s) {
      if (c == '"' || c == '\\') o += '\\';
      o += c;
    }
    return o;
  };
  os << "[";
  for (size_t i = 0; i < entries.size(); ++i) {
    const auto& e = entries[i];
    if (i) os << ",";
    os << "{\"schema\":\"" << esc(e.schema) << "\",\"condition\":\""
       << esc(e.condition) << "\",\"sample\":" << e.sample << ",\"verdict\":\""
       << (e.violation ? "violation" : "pass") << "\",\"witness\":\""
       << esc(e.witness) << "\"}";
  }
  os << "]";
  return os.str();
}

}  // namespace tabkit
