#include <random>

#include "doctest.h"
#include "tabkit/logics.hpp"
#include "tabkit/tablang.hpp"

using namespace tabkit;

namespace {

index_term R(uint32_t n) { return index_term::renameable(n); }

expr tag(formula_id f, bool neg, uint8_t fsym, uint32_t i) {
  return expr::tagged(f, neg, label::one(fsym, R(i)));
}

// random expression sets over a tiny vocabulary, for the property checks
expr_set random_set(std::mt19937_64& rng, formula_store& st, int max_idx = 4) {
  std::vector<expr> items;
  formula_id p = st.var("p"), q = st.var("q");
  int n = 1 + static_cast<int>(rng() % 5);
  for (int i = 0; i < n; ++i) {
    uint32_t a = 1 + static_cast<uint32_t>(rng() % max_idx);
    uint32_t b = 1 + static_cast<uint32_t>(rng() % max_idx);
    switch (rng() % 3) {
      case 0:
        items.push_back(tag(rng() % 2 ? p : q, rng() % 2, 0, a));
        break;
      case 1:
        items.push_back(expr::rel(0, rng() % 2, R(a), R(b)));
        break;
      case 2:
        items.push_back(expr::eq(rng() % 2, R(a), R(b)));
        break;
    }
  }
  return expr_set(std::move(items));
}

index_bijection random_bijection(const expr_set& x, std::mt19937_64& rng) {
  std::vector<uint32_t> src;
  for (auto t : indices_of(x))
    if (!t.is_reserved()) src.push_back(t.value());
  std::vector<uint32_t> dst = src;
  for (auto& v : dst) v += 10;
  std::shuffle(dst.begin(), dst.end(), rng);
  index_bijection b;
  for (size_t i = 0; i < src.size(); ++i) b.map.push_back({src[i], dst[i]});
  std::sort(b.map.begin(), b.map.end());
  return b;
}

// independent oracle: exhaustive search over all index bijections
bool similar_brute(const expr_set& x, const expr_set& y) {
  std::vector<uint32_t> rx, ry;
  for (auto t : indices_of(x))
    if (!t.is_reserved()) rx.push_back(t.value());
  for (auto t : indices_of(y))
    if (!t.is_reserved()) ry.push_back(t.value());
  if (rx.size() != ry.size()) return false;
  std::sort(ry.begin(), ry.end());
  do {
    index_bijection b;
    for (size_t i = 0; i < rx.size(); ++i) b.map.push_back({rx[i], ry[i]});
    std::sort(b.map.begin(), b.map.end());
    bool injective = true;
    for (size_t i = 1; i < b.map.size(); ++i)
      if (b.map[i].first == b.map[i - 1].first) injective = false;
    if (!injective) continue;
    try {
      if (apply_renaming(x, b) == y) return true;
    } catch (const std::invalid_argument&) {
    }
  } while (std::next_permutation(ry.begin(), ry.end()));
  return false;
}

}  // namespace

TEST_CASE("the index-choosing function") {
  formula_store st(kd3_logic().sig);
  expr r = expr::rel(0, false, R(1), R(2));
  auto ir = indices_of(r);
  CHECK(ir == std::vector<index_term>{R(1), R(2)});
  expr q = expr::eq(false, R(1), R(2));
  CHECK(indices_of(q) == std::vector<index_term>{R(1), R(2)});
  CHECK(indices_of(expr_set{}).empty());
  // union over members
  expr_set x({r, tag(st.var("p"), false, 0, 7)});
  CHECK(indices_of(x) == std::vector<index_term>{R(1), R(2), R(7)});
}

TEST_CASE("branch inconsistency finds complementary pairs") {
  formula_store st(sublogic_s().sig);
  formula_id a = parse_formula("p -> q", st);
  expr_set closed({tag(a, false, 0, 1), tag(a, true, 0, 1)});
  CHECK(is_b_inconsistent(closed));

  // A together with !!!A is still b-consistent: no complementary pair
  formula_id nnna = parse_formula("!!!(p -> q)", st);
  expr_set fine({tag(a, false, 0, 1), tag(nnna, false, 0, 1)});
  CHECK_FALSE(is_b_inconsistent(fine));
  CHECK_FALSE(is_b_inconsistent(expr_set{}));
  CHECK_FALSE(find_complementary_pair(fine).has_value());

  formula_id p = st.var("p"), q = st.var("q");
  expr_set w({tag(p, false, 0, 1), tag(p, true, 0, 1), tag(q, false, 0, 1)});
  auto pr = find_complementary_pair(w);
  REQUIRE(pr.has_value());
  CHECK(pr->first == tag(p, false, 0, 1));
  CHECK(pr->second == tag(p, true, 0, 1));

  // relational and equality pairs close too
  CHECK(is_b_inconsistent(
      expr_set({expr::rel(0, false, R(1), R(2)), expr::rel(0, true, R(1), R(2))})));
  CHECK(is_b_inconsistent(
      expr_set({expr::eq(false, R(1), R(2)), expr::eq(true, R(1), R(2))})));
}

TEST_CASE("similarity: identity, shift, and reserved rigidity") {
  formula_store st(kd3_logic().sig);
  formula_id p = st.var("p");
  expr_set x({tag(p, false, 0, 1)});
  auto self = are_similar(x, x);
  REQUIRE(self.has_value());
  CHECK(apply_renaming(x, *self) == x);

  expr_set y({tag(p, false, 0, 5)});
  auto b = are_similar(x, y);
  REQUIRE(b.has_value());
  CHECK(b->apply(1) == 5);
  CHECK(similar_brute(x, y));

  // value signs never move: (1, val1) is not similar to (1, val0)
  expr v1 = expr::tagged(p, false,
                         label::two(sym::fsym_valued, R(1),
                                    index_term::reserved(sym::v1)));
  expr v0 = expr::tagged(p, false,
                         label::two(sym::fsym_valued, R(1),
                                    index_term::reserved(sym::v0)));
  CHECK_FALSE(are_similar(expr_set({v1}), expr_set({v0})).has_value());
}

TEST_CASE("similarity search agrees with the brute-force oracle") {
  formula_store st(sublogic_s().sig);
  std::mt19937_64 rng(7);
  int positives = 0;
  for (int t = 0; t < 400; ++t) {
    expr_set x = random_set(rng, st, 3);
    // half the probes compare independent sets, half renamed copies, so both
    // answers occur in the sample
    expr_set y = (t % 2 == 0) ? random_set(rng, st, 3)
                              : apply_renaming(x, random_bijection(x, rng));
    bool fast = are_similar(x, y).has_value();
    bool brute = similar_brute(x, y);
    REQUIRE(fast == brute);
    positives += fast;
  }
  CHECK(positives > 0);
  CHECK(positives < 400);
}

TEST_CASE("similarity is an equivalence on sampled sets") {
  formula_store st(sublogic_s().sig);
  std::mt19937_64 rng(11);
  for (int t = 0; t < 300; ++t) {
    expr_set x = random_set(rng, st);
    index_bijection b1 = random_bijection(x, rng);
    expr_set y = apply_renaming(x, b1);
    auto xy = are_similar(x, y);
    REQUIRE(xy.has_value());
    // symmetric: invert
    auto yx = are_similar(y, x);
    REQUIRE(yx.has_value());
    CHECK(apply_renaming(y, xy->inverse()) == x);
    // transitive: compose through another renaming
    index_bijection b2 = random_bijection(y, rng);
    expr_set z = apply_renaming(y, b2);
    REQUIRE(are_similar(x, z).has_value());
  }
}

TEST_CASE("renaming: identity, swaps, totality errors") {
  formula_store st(sublogic_s().sig);
  expr_set x({expr::rel(0, false, R(1), R(2))});
  index_bijection ident = index_bijection::identity_on(indices_of(x));
  CHECK(apply_renaming(x, ident) == x);
  index_bijection swap;
  swap.map = {{1, 2}, {2, 1}};
  expr_set sw = apply_renaming(x, swap);
  CHECK(sw.contains(expr::rel(0, false, R(2), R(1))));
  index_bijection partial;
  partial.map = {{1, 5}};
  CHECK_THROWS_AS(apply_renaming(x, partial), std::invalid_argument);
}

TEST_CASE("renaming preserves the b-consistency status") {
  formula_store st(sublogic_s().sig);
  std::mt19937_64 rng(23);
  for (int t = 0; t < 1000; ++t) {
    expr_set x = random_set(rng, st);
    index_bijection b = random_bijection(x, rng);
    expr_set y = apply_renaming(x, b);
    REQUIRE(is_b_inconsistent(x) == is_b_inconsistent(y));
    REQUIRE(is_b_inconsistent(x) == find_complementary_pair(x).has_value());
  }
}

TEST_CASE("fresh indices never collide") {
  formula_store st(sublogic_s().sig);
  CHECK(fresh_index(expr_set{}) == R(1));
  expr_set x({expr::rel(0, false, R(1), R(2))});
  CHECK(fresh_index(x) == R(3));
  std::mt19937_64 rng(3);
  for (int t = 0; t < 1000; ++t) {
    expr_set s = random_set(rng, st, 6);
    index_term f = fresh_index(s);
    auto idx = indices_of(s);
    CHECK(std::find(idx.begin(), idx.end(), f) == idx.end());
  }
}

TEST_CASE("canonical_form: shape, idempotence, renaming invariance") {
  formula_store st(sublogic_s().sig);
  formula_id p = st.var("p");
  expr_set x({tag(p, false, 0, 7), expr::rel(0, false, R(7), R(9))});
  expr_set cx = canonical_form(x);
  CHECK(cx.contains(tag(p, false, 0, 1)));
  CHECK(cx.contains(expr::rel(0, false, R(1), R(2))));
  CHECK(canonical_form(cx) == cx);

  std::mt19937_64 rng(41);
  for (int t = 0; t < 1000; ++t) {
    expr_set s = random_set(rng, st);
    index_bijection b = random_bijection(s, rng);
    expr_set sr = apply_renaming(s, b);
    expr_set c1 = canonical_form(s);
    expr_set c2 = canonical_form(sr);
    REQUIRE(c1 == c2);
    REQUIRE(are_similar(s, c1).has_value());
    REQUIRE(canonical_form(c1) == c1);
  }
  // equal canonical forms iff similar, on random pairs
  for (int t = 0; t < 300; ++t) {
    expr_set a = random_set(rng, st, 3);
    expr_set bb = random_set(rng, st, 3);
    bool sim = are_similar(a, bb).has_value();
    bool ceq = canonical_form(a) == canonical_form(bb);
    REQUIRE(sim == ceq);
  }
}

TEST_CASE("canonical expression rendering") {
  const logic_definition& lg = kd3_logic();
  formula_store st(lg.sig);
  formula_id p = st.var("p");
  expr e1 = expr::tagged(p, false, label::one(sym::fsym_world, R(1)));
  CHECK(render_expr(st, lg.lang, e1) == "p @ w(1)");
  expr e2 = expr::tagged(p, true, label::one(sym::fsym_world, R(1)));
  CHECK(render_expr(st, lg.lang, e2) == "~p @ w(1)");
  expr e3 = expr::tagged(p, false,
                         label::two(sym::fsym_valued, R(1),
                                    index_term::reserved(sym::vh)));
  CHECK(render_expr(st, lg.lang, e3) == "p @ w(1, 1/2)");
  expr e4 = expr::rel(sym::psym_rk, false, R(1), R(2));
  CHECK(render_expr(st, lg.lang, e4) == "r^K(1,2)");
  expr e5 = expr::eq(false, R(1), R(2));
  CHECK(render_expr(st, lg.lang, e5) == "1 == 2");
  expr e6 = expr::eq(true, R(1), R(2));
  CHECK(render_expr(st, lg.lang, e6) == "!(1 == 2)");
  tab_language compact = lg.lang;
  compact.compact_values = true;
  CHECK(render_expr(st, compact, e3) == "p @ w(1, h)");
}
