#include <random>

#include <algorithm>
#include <set>

#include "doctest.h"
#include "tabkit/kd3_fast.hpp"
#include "tabkit/semantics.hpp"

using namespace tabkit;

namespace {

finite_structure subs_model(formula_store& st,
                            const std::map<std::string, std::vector<int>>& contents,
                            const std::map<std::string, bool>& truth) {
  finite_structure m;
  m.designated_domain = 1;
  m.add_element(1, {1});
  std::set<int> atoms;
  for (auto& [v, c] : contents)
    for (int a : c) atoms.insert(a);
  for (int a : atoms) m.add_element(2, {a});
  for (auto& [v, c] : contents) {
    int vi = st.var_index(st.var(v));
    for (int a : c) m.set_true(2, {a}, vi);
  }
  for (auto& [v, t] : truth)
    if (t) m.set_true(1, {1}, st.var_index(st.var(v)));
  return m;
}

expr at_world(formula_id f, bool neg, uint32_t i = 1) {
  return expr::tagged(f, neg,
                      label::one(sym::fsym_world, index_term::renameable(i)));
}

}  // namespace

TEST_CASE("two-valued evaluation and the content clause") {
  const logic_definition& lg = sublogic_s();
  formula_store st(lg.sig);
  // s(p) = {a}, s(q) = {b} disjoint, p true at the single world
  finite_structure m = subs_model(st, {{"p", {0}}, {"q", {1}}}, {{"p", true}});
  formula_id p = st.var("p");
  CHECK(eval(m, {1}, p, lg, st).sat);
  formula_id goal = parse_formula("p -> !(!p & !q)", st);
  // truth-functionally fine but the contents miss each other
  CHECK_FALSE(eval(m, {1}, goal, lg, st).sat);

  auto cp = content_of(m, {1}, p, lg, st);
  CHECK(cp == std::vector<int>{0});
  formula_id pq = parse_formula("p & q", st);
  CHECK(content_of(m, {1}, pq, lg, st).empty());
  finite_structure m2 =
      subs_model(st, {{"p", {0, 1}}, {"q", {1, 2}}}, {{"p", true}});
  CHECK(content_of(m2, {1}, pq, lg, st) == std::vector<int>{1});
  // evaluation point must come from the designated domain
  CHECK_THROWS_AS(eval(m, {7}, p, lg, st), std::invalid_argument);
  // content is a subS notion only
  CHECK_THROWS_AS(content_of(m, {1}, p, classical_logic(), st),
                  std::invalid_argument);
}

TEST_CASE("three-valued evaluation rejects excluded middle at a half point") {
  const logic_definition& lg = kd3_logic();
  formula_store st(lg.sig);
  finite_structure m;
  m.designated_domain = 1;
  m.add_element(1, {1});
  m.domains[2] = {{0}, {1}, {2}};
  for (int n = 0; n < 3; ++n) m.add_element(3, {1, n});
  m.relations[1].push_back({{1}, {1}});
  int p = st.var_index(st.var("p"));
  m.set_true(3, {1, 1}, p);  // V(w, p) = 1/2
  formula_id em = parse_formula("p | !p", st);
  auto s = eval(m, {1}, em, lg, st);
  CHECK(s.value == 1);
  CHECK_FALSE(s.sat);
  // empty-successor conventions: no r^<> successors gives <>A value 0,
  // no r^K successors gives K A value 1
  finite_structure m2 = m;
  m2.relations.clear();
  CHECK(eval(m2, {1}, parse_formula("<>p", st), lg, st).value == 0);
  CHECK(eval(m2, {1}, parse_formula("K p", st), lg, st).value == 2);
}

TEST_CASE("modal-free evaluation ignores other worlds") {
  const logic_definition& lg = kd3_logic();
  formula_store st(lg.sig);
  std::mt19937_64 rng(17);
  signature modal_free;
  modal_free.connectives = {conn_not(), conn_and(), conn_or(), conn_imp(),
                            conn_iff()};
  formula_store fs(modal_free);
  formula_enumerator en(fs, {"p", "q"}, 2);
  std::vector<formula_id> pool;
  while (auto f = en.next())
    pool.push_back(decode_formula(encode_formula(fs, *f), st, {{"p", "q"}}));
  int p = st.var_index(st.var("p")), q = st.var_index(st.var("q"));
  for (int t = 0; t < 300; ++t) {
    formula_id f = pool[rng() % pool.size()];
    finite_structure m;
    m.designated_domain = 1;
    m.add_element(1, {1});
    m.add_element(1, {2});
    m.domains[2] = {{0}, {1}, {2}};
    for (int w = 1; w <= 2; ++w)
      for (int n = 0; n < 3; ++n) m.add_element(3, {w, n});
    m.relations[1] = {{{1}, {1}}, {{2}, {2}}, {{1}, {2}}};
    m.relations[2] = {{{1}, {2}}};
    uint8_t vp = rng() % 3, vq = rng() % 3;
    m.set_true(3, {1, vp}, p);
    m.set_true(3, {1, vq}, q);
    finite_structure m_mut = m;
    m.set_true(3, {2, static_cast<int>(rng() % 3)}, p);
    m.set_true(3, {2, static_cast<int>(rng() % 3)}, q);
    m_mut.set_true(3, {2, static_cast<int>(rng() % 3)}, p);
    m_mut.set_true(3, {2, static_cast<int>(rng() % 3)}, q);
    CHECK(eval(m, {1}, f, lg, st).value == eval(m_mut, {1}, f, lg, st).value);
  }
}

TEST_CASE("three-valued functionality: exactly one value everywhere") {
  const logic_definition& lg = kd3_logic();
  formula_store st(lg.sig);
  formula_enumerator en(st, {"p", "q"}, 2);
  std::vector<formula_id> pool;
  while (auto f = en.next())
    if (pool.size() < 200) pool.push_back(*f);
  int p = st.var_index(*st.find_var("p")), q = st.var_index(*st.find_var("q"));
  std::mt19937_64 rng(29);
  for (int t = 0; t < 60; ++t) {
    finite_structure m;
    m.designated_domain = 1;
    int worlds = 1 + static_cast<int>(rng() % 3);
    for (int w = 1; w <= worlds; ++w) {
      m.add_element(1, {w});
      m.relations[1].push_back({{w}, {w}});
      m.set_true(3, {w, static_cast<int>(rng() % 3)}, p);
      m.set_true(3, {w, static_cast<int>(rng() % 3)}, q);
      for (int n = 0; n < 3; ++n) m.add_element(3, {w, n});
    }
    m.domains[2] = {{0}, {1}, {2}};
    for (formula_id f : pool) {
      for (int w = 1; w <= worlds; ++w) {
        uint8_t v = eval(m, {w}, f, lg, st).value;
        CHECK(v <= 2);  // total and single-valued by construction of V
      }
    }
  }
}

TEST_CASE("suitability: base cases and b-inconsistent sets") {
  const logic_definition& lg = classical_logic();
  formula_store st(lg.sig);
  formula_id p = st.var("p");
  finite_structure m;
  m.designated_domain = 1;
  m.add_element(1, {1});
  m.set_true(1, {1}, st.var_index(p));

  CHECK(is_suitable(m, expr_set{}, lg, st).has_value());
  auto f = is_suitable(m, expr_set({at_world(p, false)}), lg, st);
  REQUIRE(f.has_value());
  CHECK(f->at(index_term::renameable(1)) == element{1});
  CHECK_FALSE(is_suitable(m, expr_set({at_world(p, true)}), lg, st));

  // no model suits a b-inconsistent set
  std::mt19937_64 rng(31);
  formula_enumerator en(st, {"p", "q"}, 1);
  std::vector<formula_id> pool;
  while (auto g = en.next()) pool.push_back(*g);
  for (int t = 0; t < 1000; ++t) {
    formula_id g = pool[rng() % pool.size()];
    uint32_t i = 1 + rng() % 3;
    expr_set x({at_world(g, false, i), at_world(g, true, i),
                at_world(pool[rng() % pool.size()], rng() % 2, 1 + rng() % 3)});
    REQUIRE(is_b_inconsistent(x));
    REQUIRE_FALSE(is_suitable(m, x, lg, st).has_value());
  }
}

TEST_CASE("bounded oracles reproduce the worked verdicts") {
  // the content logic rejects its own tableau-proved goal
  {
    const logic_definition& lg = sublogic_s();
    formula_store st(lg.sig);
    formula_id p = st.var("p");
    formula_id goal = parse_formula("p -> !(!p & !q)", st);
    enumeration_bounds b;
    b.max_atoms = 2;
    auto v = consequence_bounded({p}, goal, lg, b, st);
    REQUIRE_FALSE(v.holds);
    // the countermodel realizes the failing content clause
    formula_id q = st.var("q");
    auto cp = content_of(v.model, v.point, p, lg, st);
    auto cq = content_of(v.model, v.point, q, lg, st);
    std::vector<int> meet;
    std::set_intersection(cp.begin(), cp.end(), cq.begin(), cq.end(),
                          std::back_inserter(meet));
    CHECK(meet.empty());
    CHECK(eval(v.model, v.point, p, lg, st).sat);
  }
  // and confirms the positive entailment
  {
    const logic_definition& lg = sublogic_s();
    formula_store st(lg.sig);
    formula_id prem = parse_formula("!(!(p -> q) & !(q -> p))", st);
    formula_id goal = parse_formula("(p & (p -> q)) -> q", st);
    enumeration_bounds b;
    b.max_atoms = 3;
    auto v = consequence_bounded({prem}, goal, lg, b, st);
    CHECK(v.holds);
    CHECK(v.models_checked == 196);
  }
  // reflexive frames validate the epistemic axiom
  {
    const logic_definition& lg = kd3_logic();
    formula_store st(lg.sig);
    enumeration_bounds b;
    b.max_worlds = 3;
    auto v = consequence_bounded({}, parse_formula("K p -> p", st), lg, b, st);
    CHECK(v.holds);
    auto v2 = consequence_bounded({}, parse_formula("p | !p", st), lg, b, st);
    CHECK_FALSE(v2.holds);
  }
}

TEST_CASE("oracle verdicts are monotone in the bounds") {
  const logic_definition& lg = kd3_logic();
  formula_store st(lg.sig);
  std::vector<std::string> goals = {"p | !p", "K p -> p", "<>p -> p",
                                    "p -> K p", "K (p & q) -> K p"};
  for (const auto& text : goals) {
    formula_id g = parse_formula(text, st);
    enumeration_bounds small;
    small.max_worlds = 2;
    enumeration_bounds big;
    big.max_worlds = 3;
    auto vs = consequence_bounded({}, g, lg, small, st);
    auto vb = consequence_bounded({}, g, lg, big, st);
    if (!vs.holds) CHECK_FALSE(vb.holds);
  }
}

TEST_CASE("structures generated from open branches transcribe the union") {
  const logic_definition& lg = kd3_logic();
  formula_store st(lg.sig);
  formula_id p = st.var("p");
  branch b;
  b.start = expr_set(
      {expr::tagged(p, false, label::two(sym::fsym_valued,
                                         index_term::renameable(1),
                                         index_term::reserved(sym::vh))),
       expr::rel(sym::psym_rk, false, index_term::renameable(1),
                 index_term::renameable(1))});
  b.union_set = b.start;
  finite_structure s = generate_structure(b, lg, st);
  CHECK(s.has_element(3, {1, 1}));
  CHECK(s.in_relation(1, {{1}, {1}}));
  CHECK(s.holds(3, {1, 1}, st.var_index(p)));

  finite_structure m = extend_to_model(s, lg, st, {st.var_index(p)});
  CHECK(m.has_element(1, {1}));
  CHECK(eval(m, {1}, p, lg, st).value == 1);

  branch closed;
  closed.start = expr_set({at_world(p, false), at_world(p, true)});
  closed.union_set = closed.start;
  CHECK_THROWS_AS(generate_structure(closed, lg, st), std::invalid_argument);
}

TEST_CASE("equality atoms merge indices onto the smaller representative") {
  const logic_definition& lg = kd3_logic();
  formula_store st(lg.sig);
  formula_id p = st.var("p");
  branch b;
  b.start = expr_set(
      {expr::tagged(p, false, label::one(sym::fsym_world,
                                         index_term::renameable(4))),
       expr::eq(false, index_term::renameable(4), index_term::renameable(2)),
       expr::rel(sym::psym_rk, false, index_term::renameable(4),
                 index_term::renameable(2))});
  b.union_set = b.start;
  finite_structure s = generate_structure(b, lg, st);
  CHECK(s.has_element(1, {2}));
  CHECK_FALSE(s.has_element(1, {4}));
  CHECK(s.in_relation(1, {{2}, {2}}));
}

TEST_CASE("countermodels: extraction, verification, defaults") {
  {
    const logic_definition& lg = kd3_logic();
    formula_store st(lg.sig);
    limits lim;
    auto r = decide({}, parse_formula("p | !p", st), lg, lim, st);
    REQUIRE(r.kind == verdict_kind::refuted);
    auto cm = extract_countermodel(r, lg, st);
    CHECK(cm.verified);
    CHECK(eval(cm.model, cm.point, st.var("p"), lg, st).value == 1);
    // q was never mentioned: defaults to value 0
    CHECK(eval(cm.model, cm.point, st.var("q"), lg, st).value == 0);
    // reflexivity present on every world of the extension
    for (const element& w : cm.model.domains[1])
      CHECK(cm.model.in_relation(1, {w, w}));
  }
  {
    const logic_definition& lg = classical_logic();
    formula_store st(lg.sig);
    limits lim;
    auto r = decide({}, st.var("p"), lg, lim, st);
    auto cm = extract_countermodel(r, lg, st);
    CHECK(cm.verified);
    CHECK_FALSE(eval(cm.model, cm.point, st.var("p"), lg, st).sat);
    formula_id p = st.var("p");
    auto r2 = decide({p}, st.var("q"), lg, lim, st);
    auto cm2 = extract_countermodel(r2, lg, st);
    CHECK(cm2.verified);
    CHECK(eval(cm2.model, cm2.point, p, lg, st).sat);
  }
}

TEST_CASE("model-soundness audit: clean on complete branches, loud on cut ones") {
  const logic_definition& lg = kd3_logic();
  formula_store st(lg.sig);
  limits lim;
  std::vector<branch> open;
  for (const char* text : {"p | !p", "p -> K p", "<>p -> p"}) {
    auto sat = saturate({}, parse_formula(text, st), lg, lim, st);
    for (const branch& b : sat.branches)
      if (!is_b_inconsistent(b.union_set)) open.push_back(b);
  }
  REQUIRE(!open.empty());
  auto rep = audit_models_sound(lg, open, st);
  CHECK(rep.violations() == 0);

  // truncating a branch removes the witnesses completeness provides
  branch cut = open.front();
  REQUIRE(!cut.steps.empty());
  std::vector<branch> truncated;
  while (!cut.steps.empty()) {
    cut.steps.pop_back();
    branch c2;
    c2.start = cut.start;
    c2.steps = cut.steps;
    c2.union_set = c2.elements().back();
    truncated.push_back(c2);
  }
  auto rep2 = audit_models_sound(lg, truncated, st);
  CHECK(rep2.entries.size() > truncated.size());  // ran all checks
  CHECK(rep2.violations() > 0);  // completeness really is the hypothesis
}

TEST_CASE("rule-soundness audit matches the adequacy facts at small scale") {
  enumeration_bounds b;
  b.max_worlds = 2;  // keep the unit-test scan quick; acceptance uses 3
  b.max_atoms = 3;
  {
    const logic_definition& lg = classical_logic();
    formula_store st(lg.sig);
    auto rep = audit_rules_sound(lg, b, 12, 1, st, 2);
    CHECK(rep.violations() == 0);
  }
  {
    const logic_definition& lg = kd3_logic();
    formula_store st(lg.sig);
    auto rep = audit_rules_sound(lg, b, 12, 1, st, 2);
    CHECK(rep.violations() == 0);
  }
  {
    const logic_definition& lg = sublogic_s();
    formula_store st(lg.sig);
    auto rep = audit_rules_sound(lg, b, 12, 1, st, 2);
    CHECK(rep.violations() > 0);
    bool pair_rule_blamed = false;
    for (const auto& e : rep.entries)
      if (e.violation && e.schema == "R_!>(2)") pair_rule_blamed = true;
    CHECK(pair_rule_blamed);
  }
}

TEST_CASE("fast and generic suitability agree on sampled inputs") {
  // the compiled scan is an optimization of is_suitable; this puts the two
  // routes against each other on random inputs and random compact models
  const logic_definition& lg = kd3_logic();
  formula_store st(lg.sig);
  std::mt19937_64 rng(3);
  formula_enumerator en(st, {"p", "q"}, 1);
  std::vector<formula_id> pool;
  while (auto f = en.next()) pool.push_back(*f);
  std::vector<int> var_ids = {st.var_index(*st.find_var("p")),
                              st.var_index(*st.find_var("q"))};
  int suitable_seen = 0, unsuitable_seen = 0;
  for (int t = 0; t < 60; ++t) {
    formula_id a = pool[rng() % pool.size()];
    formula_id bfm = pool[rng() % pool.size()];
    std::vector<expr> items = {
        expr::tagged(a, rng() % 2,
                     label::two(sym::fsym_valued, index_term::renameable(1),
                                index_term::reserved(rng() % 3))),
        expr::tagged(bfm, rng() % 2,
                     label::two(sym::fsym_valued, index_term::renameable(2),
                                index_term::reserved(rng() % 3))),
        expr::rel(rng() % 2 ? sym::psym_rk : sym::psym_rd, false,
                  index_term::renameable(1), index_term::renameable(2))};
    expr_set input(items);
    if (is_b_inconsistent(input)) continue;
    rule_application dummy;
    auto ci = kd3fast::compile_instance(input, dummy, lg, st);
    REQUIRE(ci.has_value());
    for (int mi = 0; mi < 25; ++mi) {
      kd3fast::oracle_result fake;
      fake.n = 1 + static_cast<int>(rng() % 3);
      fake.rk = static_cast<uint16_t>(rng() & 0x1ff);
      for (int w = 0; w < fake.n; ++w) fake.rk |= (1u << (w * 3 + w));
      fake.rd = static_cast<uint16_t>(rng() & 0x1ff);
      for (int w = 0; w < 3; ++w)
        for (int v = 0; v < 3; ++v)
          fake.val[w][v] = static_cast<uint8_t>(rng() % 3);
      finite_structure m = kd3fast::to_structure(fake, var_ids);
      bool generic = is_suitable(m, input, lg, st).has_value();
      // compact worlds are 0-based; the structure's are 1-based, which only
      // matters for index images, not for existence
      bool fast = kd3fast::check_input_suitable(*ci, st, fake.n, fake.rk,
                                                fake.rd, fake.val, 2);
      REQUIRE(generic == fast);
      (generic ? suitable_seen : unsuitable_seen)++;
    }
  }
  CHECK(suitable_seen > 0);
  CHECK(unsuitable_seen > 0);
}
