#include "tabkit/tablang.hpp"

#include <algorithm>
#include <cassert>
#include <map>
#include <numeric>
#include <set>
#include <stdexcept>

namespace tabkit {

expr_set::expr_set(std::vector<expr> items) : items_(std::move(items)) {
  std::sort(items_.begin(), items_.end());
  items_.erase(std::unique(items_.begin(), items_.end()), items_.end());
}

bool expr_set::contains(const expr& e) const {
  return std::binary_search(items_.begin(), items_.end(), e);
}

bool expr_set::insert(const expr& e) {
  auto it = std::lower_bound(items_.begin(), items_.end(), e);
  if (it != items_.end() && *it == e) return false;
  items_.insert(it, e);
  return true;
}

void expr_set::merge(const expr_set& other) {
  for (const expr& e : other) insert(e);
}

bool expr_set::subset_of(const expr_set& other) const {
  for (const expr& e : items_)
    if (!other.contains(e)) return false;
  return true;
}

std::strong_ordering operator<=>(const expr_set& x, const expr_set& y) {
  size_t n = std::min(x.items_.size(), y.items_.size());
  for (size_t i = 0; i < n; ++i) {
    if (auto c = x.items_[i] <=> y.items_[i]; c != 0) return c;
  }
  return x.items_.size() <=> y.items_.size();
}

std::optional<uint32_t> index_bijection::apply(uint32_t ren) const {
  auto it = std::lower_bound(
      map.begin(), map.end(), std::make_pair(ren, uint32_t{0}),
      [](const auto& a, const auto& b) { return a.first < b.first; });
  if (it != map.end() && it->first == ren) return it->second;
  return std::nullopt;
}

index_term index_bijection::apply_term(index_term t) const {
  if (t.is_reserved()) return t;
  auto v = apply(t.value());
  if (!v) throw std::invalid_argument("renaming undefined on an index");
  return index_term::renameable(*v);
}

index_bijection index_bijection::inverse() const {
  index_bijection out;
  out.map.reserve(map.size());
  for (auto [a, b] : map) out.map.push_back({b, a});
  std::sort(out.map.begin(), out.map.end());
  return out;
}

index_bijection index_bijection::identity_on(
    const std::vector<index_term>& idx) {
  index_bijection out;
  for (const auto& t : idx)
    if (!t.is_reserved()) out.map.push_back({t.value(), t.value()});
  std::sort(out.map.begin(), out.map.end());
  out.map.erase(std::unique(out.map.begin(), out.map.end()), out.map.end());
  return out;
}

std::vector<index_term> indices_of(const expr& e) {
  std::vector<index_term> out;
  out.push_back(e.a0);
  if (e.argc > 1 || e.kind != expr_kind::tagged) out.push_back(e.a1);
  if (e.kind == expr_kind::tagged && e.argc < 2) out.resize(1);
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

std::vector<index_term> indices_of(const expr_set& x) {
  std::vector<index_term> out;
  for (const expr& e : x) {
    out.push_back(e.a0);
    if (e.kind != expr_kind::tagged || e.argc > 1) out.push_back(e.a1);
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

bool is_b_inconsistent(const expr_set& x) {
  // complementary twins sort adjacently (neg compares last)
  for (size_t i = 0; i + 1 < x.size(); ++i) {
    if (!x[i].neg && x[i + 1].neg && x[i].complement() == x[i + 1]) return true;
  }
  return false;
}

std::optional<std::pair<expr, expr>> find_complementary_pair(
    const expr_set& x) {
  for (size_t i = 0; i + 1 < x.size(); ++i) {
    if (!x[i].neg && x[i + 1].neg && x[i].complement() == x[i + 1])
      return std::make_pair(x[i], x[i + 1]);
  }
  return std::nullopt;
}

expr apply_renaming(const expr& e, const index_bijection& b) {
  expr out = e;
  out.a0 = b.apply_term(e.a0);
  if (e.kind != expr_kind::tagged || e.argc > 1) out.a1 = b.apply_term(e.a1);
  return out;
}

expr_set apply_renaming(const expr_set& x, const index_bijection& b) {
  std::vector<expr> items;
  items.reserve(x.size());
  for (const expr& e : x) items.push_back(apply_renaming(e, b));
  expr_set out(std::move(items));
  if (out.size() != x.size())
    throw std::invalid_argument("renaming is not injective on this set");
  return out;
}

uint32_t max_renameable(const expr_set& x) {
  uint32_t m = 0;
  for (const expr& e : x) {
    if (!e.a0.is_reserved()) m = std::max(m, e.a0.value());
    if ((e.kind != expr_kind::tagged || e.argc > 1) && !e.a1.is_reserved())
      m = std::max(m, e.a1.value());
  }
  return m;
}

index_term fresh_index(const expr_set& x) {
  return index_term::renameable(max_renameable(x) + 1);
}

namespace {

// Structure-only fingerprint of an expression with its indices masked.
uint64_t masked_key(const expr& e) {
  uint64_t h = static_cast<uint64_t>(e.kind) * 1315423911ull;
  h = h * 31 + e.sym;
  h = h * 31 + static_cast<uint32_t>(e.f + 1);
  h = h * 31 + e.argc;
  h = h * 31 + e.neg;
  return h;
}

// Per-index colour refinement used both as a similarity prefilter and to cut
// the canonical-form search space.
std::map<uint32_t, uint64_t> refine_colors(const expr_set& x) {
  std::map<uint32_t, uint64_t> color;
  for (const auto& t : indices_of(x))
    if (!t.is_reserved()) color[t.value()] = 1;
  for (int round = 0; round < 4; ++round) {
    std::map<uint32_t, uint64_t> next;
    for (auto& [idx, c] : color) next[idx] = c * 0x9e3779b97f4a7c15ull;
    for (const expr& e : x) {
      uint64_t base = masked_key(e);
      index_term args[2] = {e.a0, e.a1};
      int argc = (e.kind != expr_kind::tagged || e.argc > 1) ? 2 : 1;
      for (int pos = 0; pos < argc; ++pos) {
        if (args[pos].is_reserved()) continue;
        uint64_t contrib = base * 1000003ull + static_cast<uint64_t>(pos);
        for (int q = 0; q < argc; ++q) {
          uint64_t oc = args[q].is_reserved()
                            ? (0xabcddcbaull + args[q].value())
                            : color[args[q].value()];
          contrib = contrib * 131 + oc + static_cast<uint64_t>(q == pos);
        }
        // order-independent accumulation per index
        next[args[pos].value()] += contrib ^ (contrib >> 17);
      }
    }
    if (next == color) break;
    color = std::move(next);
  }
  return color;
}

bool verify_bijection(const expr_set& x, const expr_set& y,
                      const index_bijection& b) {
  if (x.size() != y.size()) return false;
  try {
    return apply_renaming(x, b) == y;
  } catch (const std::invalid_argument&) {
    return false;
  }
}

bool extend_match(const std::vector<uint32_t>& xs,
                  const std::vector<uint32_t>& ys,
                  const std::map<uint32_t, uint64_t>& cx,
                  const std::map<uint32_t, uint64_t>& cy, size_t pos,
                  std::vector<std::pair<uint32_t, uint32_t>>& acc,
                  std::vector<bool>& used, const expr_set& x,
                  const expr_set& y, index_bijection& out) {
  if (pos == xs.size()) {
    index_bijection b;
    b.map = acc;
    std::sort(b.map.begin(), b.map.end());
    if (verify_bijection(x, y, b)) {
      out = b;
      return true;
    }
    return false;
  }
  uint32_t xi = xs[pos];
  for (size_t j = 0; j < ys.size(); ++j) {
    if (used[j]) continue;
    if (cx.at(xi) != cy.at(ys[j])) continue;
    used[j] = true;
    acc.push_back({xi, ys[j]});
    if (extend_match(xs, ys, cx, cy, pos + 1, acc, used, x, y, out))
      return true;
    acc.pop_back();
    used[j] = false;
  }
  return false;
}

}  // namespace

std::optional<index_bijection> are_similar(const expr_set& x,
                                           const expr_set& y,
                                           const std::vector<index_term>&) {
  if (x.size() != y.size()) return std::nullopt;
  // reserved constants must match exactly
  std::vector<index_term> ix = indices_of(x), iy = indices_of(y);
  std::vector<uint32_t> rx, ry;
  std::vector<index_term> resx, resy;
  for (auto t : ix) (t.is_reserved() ? resx.push_back(t) : (void)rx.push_back(t.value()));
  for (auto t : iy) (t.is_reserved() ? resy.push_back(t) : (void)ry.push_back(t.value()));
  if (resx != resy || rx.size() != ry.size()) return std::nullopt;

  auto cx = refine_colors(x);
  auto cy = refine_colors(y);
  {  // colour multisets must agree
    std::vector<uint64_t> mx, my;
    for (auto& [k, v] : cx) mx.push_back(v);
    for (auto& [k, v] : cy) my.push_back(v);
    std::sort(mx.begin(), mx.end());
    std::sort(my.begin(), my.end());
    if (mx != my) return std::nullopt;
  }
  std::vector<std::pair<uint32_t, uint32_t>> acc;
  std::vector<bool> used(ry.size(), false);
  index_bijection out;
  if (extend_match(rx, ry, cx, cy, 0, acc, used, x, y, out)) return out;
  return std::nullopt;
}

namespace {

expr_set rename_with(const expr_set& x,
                     const std::map<uint32_t, uint32_t>& m) {
  std::vector<expr> items;
  items.reserve(x.size());
  for (const expr& e : x) {
    expr o = e;
    if (!o.a0.is_reserved()) o.a0 = index_term::renameable(m.at(o.a0.value()));
    if ((o.kind != expr_kind::tagged || o.argc > 1) && !o.a1.is_reserved())
      o.a1 = index_term::renameable(m.at(o.a1.value()));
    items.push_back(o);
  }
  return expr_set(std::move(items));
}

void search_min(const std::vector<std::vector<uint32_t>>& classes, size_t ci,
                std::vector<uint32_t>& order, const expr_set& x,
                std::optional<expr_set>& best) {
  if (ci == classes.size()) {
    std::map<uint32_t, uint32_t> m;
    for (size_t i = 0; i < order.size(); ++i) m[order[i]] = static_cast<uint32_t>(i + 1);
    expr_set cand = rename_with(x, m);
    if (!best || cand < *best) best = std::move(cand);
    return;
  }
  std::vector<uint32_t> cls = classes[ci];
  std::sort(cls.begin(), cls.end());
  do {
    for (uint32_t v : cls) order.push_back(v);
    search_min(classes, ci + 1, order, x, best);
    order.resize(order.size() - cls.size());
  } while (std::next_permutation(cls.begin(), cls.end()));
}

}  // namespace

expr_set canonical_form(const expr_set& x, const std::vector<index_term>&) {
  auto colors = refine_colors(x);
  if (colors.empty()) return x;
  // indices grouped by colour; exhaustive permutation only within a class
  std::map<uint64_t, std::vector<uint32_t>> by_color;
  for (auto& [idx, c] : colors) by_color[c].push_back(idx);
  std::vector<std::vector<uint32_t>> classes;
  for (auto& [c, v] : by_color) classes.push_back(v);
  size_t combos = 1;
  for (auto& cls : classes) {
    size_t f = 1;
    for (size_t i = 2; i <= cls.size(); ++i) f *= i;
    combos *= f;
    if (combos > 1000000) throw std::invalid_argument("canonical_form: set too large");
  }
  std::optional<expr_set> best;
  std::vector<uint32_t> order;
  search_min(classes, 0, order, x, best);
  return *best;
}

std::string render_index(const index_term& t, const tab_language& lang) {
  if (t.is_reserved()) {
    if (lang.compact_values && t.value() < lang.reserved_compact.size())
      return lang.reserved_compact[t.value()];
    return lang.reserved_names.at(t.value());
  }
  return std::to_string(t.value());
}

std::string render_expr(const formula_store& store, const tab_language& lang,
                        const expr& e) {
  std::string out;
  switch (e.kind) {
    case expr_kind::tagged: {
      std::string body = render_formula(store, e.f);
      if (e.neg) {
        bool atomic = store.is_var(e.f) || store.conn(e.f).arity == 1;
        out += "~";
        if (!atomic) {
          out += "(" + body + ")";
        } else {
          out += body;
        }
      } else {
        out += body;
      }
      if (lang.implicit_world && e.sym == lang.world_fsym) return out;
      out += " @ ";
      out += lang.fsyms.at(e.sym).name;
      out += "(";
      out += render_index(e.a0, lang);
      if (e.argc > 1) {
        out += ", ";
        out += render_index(e.a1, lang);
      }
      out += ")";
      return out;
    }
    case expr_kind::rel: {
      std::string atom = lang.psyms.at(e.sym).name + "(" +
                         render_index(e.a0, lang) + "," +
                         render_index(e.a1, lang) + ")";
      return e.neg ? "~" + atom : atom;
    }
    case expr_kind::eq: {
      std::string atom =
          render_index(e.a0, lang) + " == " + render_index(e.a1, lang);
      return e.neg ? "!(" + atom + ")" : atom;
    }
  }
  return out;
}

std::string render_set(const formula_store& store, const tab_language& lang,
                       const expr_set& x) {
  std::string out = "{";
  bool first = true;
  for (const expr& e : x) {
    if (!first) out += ", ";
    first = false;
    out += render_expr(store, lang, e);
  }
  out += "}";
  return out;
}

}  // namespace tabkit
