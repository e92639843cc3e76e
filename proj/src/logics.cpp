#include "tabkit/logics.hpp"

#include <stdexcept>

namespace tabkit {

namespace {

using k = ipat::kinds;

fpat FA() { return fpat::any(0); }
fpat FB() { return fpat::any(1); }

// world-labelled formula patterns
pat_expr at_w(fpat f, bool neg, int imeta) {
  return pat_expr::tagged1(std::move(f), neg, sym::fsym_world, ipat::im(imeta));
}
// content-labelled (subS)
pat_expr at_c(fpat f, bool neg, int imeta) {
  return pat_expr::tagged1(std::move(f), neg, sym::fsym_content,
                           ipat::im(imeta));
}
// value-labelled (kd3)
pat_expr at_v(fpat f, bool neg, int imeta, ipat v) {
  return pat_expr::tagged2(std::move(f), neg, sym::fsym_valued, ipat::im(imeta),
                           v);
}

guard absent(std::vector<pat_expr> templates,
             std::vector<std::pair<uint8_t, uint8_t>> distinct = {}) {
  guard g;
  g.k = guard::kinds::absent_instance;
  g.templates = std::move(templates);
  g.distinct = std::move(distinct);
  return g;
}

guard fresh_of(uint8_t imeta) {
  guard g;
  g.k = guard::kinds::fresh;
  g.a = imeta;
  return g;
}

rule_schema make(std::string name, std::vector<pat_expr> premises,
                 std::vector<std::vector<pat_expr>> alts,
                 std::vector<guard> guards = {},
                 std::vector<uint8_t> fresh = {}) {
  rule_schema r;
  r.name = std::move(name);
  r.premises = std::move(premises);
  r.alts = std::move(alts);
  r.guards = std::move(guards);
  r.fresh_imetas = std::move(fresh);
  return r;
}

}  // namespace

int logic_definition::rule_index(const std::string& rule_name) const {
  for (size_t i = 0; i < rules.size(); ++i)
    if (rules[i].name == rule_name) return static_cast<int>(i);
  return -1;
}

void logic_definition::validate() const {
  sig.validate();
  auto check_ipat = [&](const ipat& p) {
    if (p.k == ipat::kinds::lit && p.id >= reserved_values.size())
      throw std::invalid_argument(name + ": undeclared reserved value");
  };
  auto check_pat = [&](const pat_expr& t) {
    if (t.kind == expr_kind::tagged) {
      if (t.sym >= lang.fsyms.size())
        throw std::invalid_argument(name + ": undeclared label symbol");
      if (t.argc != lang.fsyms[t.sym].arity)
        throw std::invalid_argument(name + ": label arity mismatch");
    } else if (t.kind == expr_kind::rel) {
      if (t.sym >= lang.psyms.size())
        throw std::invalid_argument(name + ": undeclared predicate symbol");
    }
    check_ipat(t.a0);
    if (t.kind != expr_kind::tagged || t.argc > 1) check_ipat(t.a1);
  };
  std::map<std::string, int> names;
  for (const auto& r : rules) {
    if (++names[r.name] > 1)
      throw std::invalid_argument(name + ": duplicate rule name " + r.name);
    for (const auto& p : r.premises) check_pat(p);
    for (const auto& alt : r.alts)
      for (const auto& t : alt) check_pat(t);
    for (const auto& g : r.guards)
      for (const auto& t : g.templates) check_pat(t);
    if (r.alts.empty())
      throw std::invalid_argument(name + ": rule without alternatives");
  }
  if (start_fsym >= lang.fsyms.size() ||
      lang.fsyms[start_fsym].domain_index != designated_domain)
    throw std::invalid_argument(
        name + ": start label must use the designated-domain symbol");
}

logic_definition make_classical() {
  logic_definition d;
  d.name = "classical";
  d.kind = logic_kind::classical;
  d.sig.connectives = {conn_not(), conn_and(), conn_or(), conn_imp()};
  const int NOT = 0, AND = 1, OR = 2, IMP = 3;
  d.lang.fsyms = {{"w", 1, 1}};
  d.lang.world_fsym = sym::fsym_world;
  d.lang.implicit_world = true;
  d.designated_domain = 1;

  auto NA = [&] { return fpat::head(NOT, {FA()}); };
  auto NB = [&] { return fpat::head(NOT, {FB()}); };

  // closure pair first, then the non-branching rules, then the forks
  d.rules.push_back(make("R_~", {at_w(FA(), true, 0)}, {{at_w(NA(), false, 0)}}));
  d.rules.push_back(make("R_!", {at_w(FA(), false, 0), at_w(NA(), false, 0)},
                         {{at_w(FA(), true, 0)}}));
  d.rules.push_back(make("R_&", {at_w(fpat::head(AND, {FA(), FB()}), false, 0)},
                         {{at_w(FA(), false, 0), at_w(FB(), false, 0)}}));
  d.rules.push_back(
      make("R_!|",
           {at_w(fpat::head(NOT, {fpat::head(OR, {FA(), FB()})}), false, 0)},
           {{at_w(NA(), false, 0), at_w(NB(), false, 0)}}));
  d.rules.push_back(
      make("R_!>",
           {at_w(fpat::head(NOT, {fpat::head(IMP, {FA(), FB()})}), false, 0)},
           {{at_w(FA(), false, 0), at_w(NB(), false, 0)}}));
  d.rules.push_back(
      make("R_!!", {at_w(fpat::head(NOT, {NA()}), false, 0)},
           {{at_w(FA(), false, 0)}}));
  d.rules.push_back(
      make("R_!&",
           {at_w(fpat::head(NOT, {fpat::head(AND, {FA(), FB()})}), false, 0)},
           {{at_w(NA(), false, 0)}, {at_w(NB(), false, 0)}}));
  d.rules.push_back(make("R_|", {at_w(fpat::head(OR, {FA(), FB()}), false, 0)},
                         {{at_w(FA(), false, 0)}, {at_w(FB(), false, 0)}}));
  d.rules.push_back(make("R_>", {at_w(fpat::head(IMP, {FA(), FB()}), false, 0)},
                         {{at_w(NA(), false, 0)}, {at_w(FB(), false, 0)}}));

  for (auto& r : d.rules) r.compile(d.sig);
  d.validate();
  return d;
}

logic_definition make_sublogic_s(bool pair_provenance) {
  logic_definition d;
  d.name = "subS";
  d.kind = logic_kind::subs;
  d.subs_pair_provenance = pair_provenance;
  d.sig.connectives = {conn_not(), conn_and(), conn_imp()};
  const int NOT = 0, AND = 1, IMP = 2;
  d.lang.fsyms = {{"w", 1, 1}, {"c", 1, 2}};
  d.lang.world_fsym = sym::fsym_world;
  d.lang.implicit_world = true;
  d.designated_domain = 1;

  auto NA = [&] { return fpat::head(NOT, {FA()}); };
  auto NB = [&] { return fpat::head(NOT, {FB()}); };

  d.rules.push_back(make("R_~", {at_w(FA(), true, 0)}, {{at_w(NA(), false, 0)}}));
  d.rules.push_back(make("R_!", {at_w(FA(), false, 0), at_w(NA(), false, 0)},
                         {{at_w(FA(), true, 0)}}));
  d.rules.push_back(make("R_&", {at_w(fpat::head(AND, {FA(), FB()}), false, 0)},
                         {{at_w(FA(), false, 0), at_w(FB(), false, 0)}}));
  d.rules.push_back(make("R_!!", {at_w(fpat::head(NOT, {NA()}), false, 0)},
                         {{at_w(FA(), false, 0)}}));
  {
    // membership in a content object propagates to every variable
    pat_expr t = at_c(FA(), false, 0);
    t.var_expand = 0;
    d.rules.push_back(make("R_i", {at_c(FA(), false, 0)}, {{t}}));
  }
  d.rules.push_back(
      make("R_!&",
           {at_w(fpat::head(NOT, {fpat::head(AND, {FA(), FB()})}), false, 0)},
           {{at_w(NA(), false, 0)}, {at_w(NB(), false, 0)}}));
  d.rules.push_back(
      make("R_>(1)", {at_w(fpat::head(IMP, {FA(), FB()}), false, 0)},
           {{at_w(NA(), false, 0)}, {at_w(FB(), false, 0)}}));
  {
    // non-membership forks over the variables
    pat_expr t = at_c(FA(), true, 0);
    rule_schema r = make("R_~i", {at_c(FA(), true, 0)}, {{t}});
    r.amode = alt_mode::per_variable;
    r.alt_var_meta = 0;
    d.rules.push_back(std::move(r));
  }
  {
    // from a recorded disjointness pair (A,i),(B,j): an object in one content
    // is not in the other
    rule_schema r =
        make("R_!>(2)", {at_c(FA(), false, 0), at_c(FB(), false, 1),
                         at_c(FA(), false, 2)},
             {{at_c(FB(), true, 2)}});
    if (pair_provenance) r.matcher = matcher_kind::pair_provenance;
    d.rules.push_back(std::move(r));
  }
  {
    rule_schema r = make(
        "R_!>(1)",
        {at_w(fpat::head(NOT, {fpat::head(IMP, {FA(), FB()})}), false, 0)},
        {{at_w(FA(), false, 0), at_w(NB(), false, 0)},
         {at_c(FA(), false, 1), at_c(FB(), false, 2)}},
        {fresh_of(1), fresh_of(2),
         absent({at_c(FA(), false, 5), at_c(FB(), false, 6)}, {{5, 6}})},
        {1, 2});
    d.rules.push_back(std::move(r));
  }
  {
    rule_schema r =
        make("R_>(2)", {at_w(fpat::head(IMP, {FA(), FB()}), false, 0)},
             {{at_c(FA(), false, 1), at_c(FB(), false, 1)}},
             {fresh_of(1), absent({at_c(FA(), false, 5), at_c(FB(), false, 5)})},
             {1});
    d.rules.push_back(std::move(r));
  }

  provenance_spec ps;
  ps.schema_index = d.rule_index("R_!>(1)");
  ps.alt_index = 1;
  ps.fmeta_a = 0;
  ps.fmeta_b = 1;
  ps.imeta_i = 1;
  ps.imeta_j = 2;
  if (pair_provenance) d.provenance.push_back(ps);

  for (auto& r : d.rules) r.compile(d.sig);
  d.validate();
  return d;
}

logic_definition make_kd3(bool refdia_emits_k) {
  logic_definition d;
  d.name = "kd3";
  d.kind = logic_kind::kd3;
  d.refdia_emits_k = refdia_emits_k;
  d.sig.connectives = {conn_not(), conn_and(), conn_or(),     conn_imp(),
                       conn_iff(), conn_diamond(), conn_know()};
  const int NOT = 0, AND = 1, OR = 2, IMP = 3, IFF = 4, DIA = 5, KNOW = 6;
  d.lang.fsyms = {{"w", 1, 1}, {"w", 2, 3}};
  d.lang.psyms = {{"r^K", 2, 1}, {"r^<>", 2, 2}};
  d.lang.reserved_names = {"0", "1/2", "1"};
  d.lang.reserved_compact = {"0", "h", "1"};
  d.lang.world_fsym = sym::fsym_world;
  d.lang.implicit_world = false;
  d.designated_domain = 1;
  d.reserved_values = {index_term::reserved(sym::v0),
                       index_term::reserved(sym::vh),
                       index_term::reserved(sym::v1)};

  const ipat L0 = ipat::lit(sym::v0), LH = ipat::lit(sym::vh),
             L1 = ipat::lit(sym::v1);
  auto rk = [](int i, int j) {
    return pat_expr::relp(sym::psym_rk, false, ipat::im(i), ipat::im(j));
  };
  auto rd = [](int i, int j) {
    return pat_expr::relp(sym::psym_rd, false, ipat::im(i), ipat::im(j));
  };
  auto V = [&](fpat f, ipat v) { return at_v(std::move(f), false, 0, v); };
  auto Vj = [&](fpat f, int im, ipat v) {
    return at_v(std::move(f), false, im, v);
  };
  auto head1 = [&](int c) { return fpat::head(c, {FA()}); };
  auto head2 = [&](int c) { return fpat::head(c, {FA(), FB()}); };

  // value-clash closure rule comes first
  {
    rule_schema r = make("R_~", {at_v(FA(), false, 0, ipat::vm(0)),
                                 at_v(FA(), false, 0, ipat::vm(1))},
                         {{at_v(FA(), true, 0, ipat::vm(0))}});
    guard g1;
    g1.k = guard::kinds::distinct_value;
    g1.a = 0;
    g1.b = 1;
    guard g2;
    g2.k = guard::kinds::value_lt;
    g2.a = 0;
    g2.b = 1;
    r.guards = {g1, g2};
    d.rules.push_back(std::move(r));
  }
  // alpha rules
  d.rules.push_back(make("R_i1", {at_w(FA(), false, 0)}, {{V(FA(), L1)}}));
  d.rules.push_back(make("R_!1", {V(head1(NOT), L1)}, {{V(FA(), L0)}}));
  d.rules.push_back(make("R_!0", {V(head1(NOT), L0)}, {{V(FA(), L1)}}));
  d.rules.push_back(make("R_!h", {V(head1(NOT), LH)}, {{V(FA(), LH)}}));
  d.rules.push_back(make("R_&1", {V(head2(AND), L1)},
                         {{V(FA(), L1), V(FB(), L1)}}));
  d.rules.push_back(make("R_|0", {V(head2(OR), L0)},
                         {{V(FA(), L0), V(FB(), L0)}}));
  d.rules.push_back(make("R_>0", {V(head2(IMP), L0)},
                         {{V(FA(), L1), V(FB(), L0)}}));
  d.rules.push_back(make("R_K1", {V(head1(KNOW), L1), rk(0, 1)},
                         {{Vj(FA(), 1, L1)}}));
  d.rules.push_back(make("R_<>0", {V(head1(DIA), L0), rd(0, 1)},
                         {{Vj(FA(), 1, L0)}}));
  d.rules.push_back(
      make("R_ref", {at_v(FA(), false, 0, ipat::vm(0))}, {{rk(0, 0)}}));
  d.rules.push_back(make("R_refK", {rk(0, 1)}, {{rk(1, 1)}}));
  d.rules.push_back(make("R_ref<>", {rd(0, 1)},
                         {{refdia_emits_k ? rk(1, 1) : rd(1, 1)}}));
  // branching rules
  d.rules.push_back(make("R_~i", {at_w(FA(), true, 0)},
                         {{V(FA(), L0)}, {V(FA(), LH)}}));
  d.rules.push_back(make("R_&0", {V(head2(AND), L0)},
                         {{V(FA(), L0)}, {V(FB(), L0)}}));
  d.rules.push_back(make("R_|1", {V(head2(OR), L1)},
                         {{V(FA(), L1)}, {V(FB(), L1)}}));
  d.rules.push_back(make("R_&h", {V(head2(AND), LH)},
                         {{V(FA(), L1), V(FB(), LH)},
                          {V(FA(), LH), V(FB(), LH)},
                          {V(FA(), LH), V(FB(), L1)}}));
  d.rules.push_back(make("R_|h", {V(head2(OR), LH)},
                         {{V(FA(), L0), V(FB(), LH)},
                          {V(FA(), LH), V(FB(), LH)},
                          {V(FA(), LH), V(FB(), L0)}}));
  d.rules.push_back(make("R_>1", {V(head2(IMP), L1)},
                         {{V(FA(), L0)},
                          {V(FB(), L1)},
                          {V(FA(), LH), V(FB(), LH)}}));
  d.rules.push_back(make("R_>h", {V(head2(IMP), LH)},
                         {{V(FA(), L1), V(FB(), LH)},
                          {V(FA(), LH), V(FB(), L0)}}));
  d.rules.push_back(make("R_<->1", {V(head2(IFF), L1)},
                         {{V(FA(), L1), V(FB(), L1)},
                          {V(FA(), L0), V(FB(), L0)},
                          {V(FA(), LH), V(FB(), LH)}}));
  d.rules.push_back(make("R_<->0", {V(head2(IFF), L0)},
                         {{V(FA(), L1), V(FB(), L0)},
                          {V(FA(), L0), V(FB(), L1)}}));
  d.rules.push_back(make("R_<->h", {V(head2(IFF), LH)},
                         {{V(FA(), L1), V(FB(), LH)},
                          {V(FA(), LH), V(FB(), L1)},
                          {V(FA(), L0), V(FB(), LH)},
                          {V(FA(), LH), V(FB(), L0)}}));
  d.rules.push_back(make("R'_<>h", {V(head1(DIA), LH), rd(0, 1)},
                         {{Vj(FA(), 1, LH)}, {Vj(FA(), 1, L0)}}));
  d.rules.push_back(make("R'_Kh", {V(head1(KNOW), LH), rk(0, 1)},
                         {{Vj(FA(), 1, LH)}, {Vj(FA(), 1, L1)}}));
  // fresh-world rules, each guarded by an existing-witness check
  d.rules.push_back(make("R_<>1", {V(head1(DIA), L1)},
                         {{rd(0, 1), Vj(FA(), 1, L1)}},
                         {fresh_of(1), absent({rd(0, 5), Vj(FA(), 5, L1)})},
                         {1}));
  d.rules.push_back(make("R_<>h", {V(head1(DIA), LH)},
                         {{rd(0, 1), Vj(FA(), 1, LH)}},
                         {fresh_of(1), absent({rd(0, 5), Vj(FA(), 5, LH)})},
                         {1}));
  d.rules.push_back(make("R_K0", {V(head1(KNOW), L0)},
                         {{rk(0, 1), Vj(FA(), 1, L0)}},
                         {fresh_of(1), absent({rk(0, 5), Vj(FA(), 5, L0)})},
                         {1}));
  d.rules.push_back(make("R_Kh", {V(head1(KNOW), LH)},
                         {{rk(0, 1), Vj(FA(), 1, LH)}},
                         {fresh_of(1), absent({rk(0, 5), Vj(FA(), 5, LH)})},
                         {1}));

  for (auto& r : d.rules) r.compile(d.sig);
  d.validate();
  return d;
}

const logic_definition& classical_logic() {
  static const logic_definition d = make_classical();
  return d;
}

const logic_definition& sublogic_s() {
  static const logic_definition d = make_sublogic_s(true);
  return d;
}

const logic_definition& kd3_logic() {
  static const logic_definition d = make_kd3(true);
  return d;
}

const std::map<std::string, const logic_definition*>& registry() {
  static const std::map<std::string, const logic_definition*> reg = {
      {"classical", &classical_logic()},
      {"subS", &sublogic_s()},
      {"kd3", &kd3_logic()},
  };
  return reg;
}

const logic_definition* find_logic(const std::string& name) {
  auto it = registry().find(name);
  return it == registry().end() ? nullptr : it->second;
}

}  // namespace tabkit
