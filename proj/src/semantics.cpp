#include "tabkit/semantics.hpp"

#include <algorithm>
#include <cassert>
#include <functional>
#include <random>
#include <sstream>

#include "tabkit/kd3_fast.hpp"

namespace tabkit {

bool finite_structure::has_element(int domain, const element& e) const {
  auto it = domains.find(domain);
  if (it == domains.end()) return false;
  return std::find(it->second.begin(), it->second.end(), e) !=
         it->second.end();
}

void finite_structure::add_element(int domain, const element& e) {
  auto& v = domains[domain];
  if (std::find(v.begin(), v.end(), e) == v.end()) v.push_back(e);
}

bool finite_structure::in_relation(int rel,
                                   const std::vector<element>& tuple) const {
  auto it = relations.find(rel);
  if (it == relations.end()) return false;
  return std::find(it->second.begin(), it->second.end(), tuple) !=
         it->second.end();
}

void enumeration_bounds::validate() const {
  if (max_worlds < 1 || max_atoms < 1)
    throw std::invalid_argument("bounds must be >= 1");
}

namespace {

std::vector<int> var_content(const finite_structure& m, int var) {
  std::vector<int> out;
  auto it = m.domains.find(2);
  if (it == m.domains.end()) return out;
  for (const element& a : it->second)
    if (a.size() == 1 && m.holds(2, a, var)) out.push_back(a[0]);
  return out;
}

bool content_nonempty_intersection(const finite_structure& m,
                                   const formula_store& st, formula_id a,
                                   formula_id b) {
  std::vector<int> acc;
  bool first = true;
  auto meet = [&](formula_id f) {
    for (int v : vars_of(st, f)) {
      std::vector<int> c = var_content(m, v);
      std::sort(c.begin(), c.end());
      if (first) {
        acc = c;
        first = false;
      } else {
        std::vector<int> merged;
        std::set_intersection(acc.begin(), acc.end(), c.begin(), c.end(),
                              std::back_inserter(merged));
        acc = std::move(merged);
      }
    }
  };
  meet(a);
  meet(b);
  return !acc.empty();
}

bool eval_two_valued(const finite_structure& m, const element& w, formula_id f,
                     const logic_definition& logic, const formula_store& st) {
  if (st.is_var(f)) return m.holds(1, w, st.var_index(f));
  const std::string& id = st.conn(f).id;
  if (id == "not") return !eval_two_valued(m, w, st.arg(f, 0), logic, st);
  if (id == "and")
    return eval_two_valued(m, w, st.arg(f, 0), logic, st) &&
           eval_two_valued(m, w, st.arg(f, 1), logic, st);
  if (id == "or")
    return eval_two_valued(m, w, st.arg(f, 0), logic, st) ||
           eval_two_valued(m, w, st.arg(f, 1), logic, st);
  if (id == "imp") {
    bool truth = !eval_two_valued(m, w, st.arg(f, 0), logic, st) ||
                 eval_two_valued(m, w, st.arg(f, 1), logic, st);
    if (logic.kind == logic_kind::subs)
      return truth &&
             content_nonempty_intersection(m, st, st.arg(f, 0), st.arg(f, 1));
    return truth;
  }
  throw std::invalid_argument("connective outside the two-valued evaluator");
}

uint8_t kd3_value(const finite_structure& m, int w, formula_id f,
                  const formula_store& st,
                  std::map<std::pair<int, formula_id>, uint8_t>& memo) {
  auto key = std::make_pair(w, f);
  auto it = memo.find(key);
  if (it != memo.end()) return it->second;
  uint8_t v = 0;
  if (st.is_var(f)) {
    v = 0;  // totalized models assign explicitly; absent means value 0
    for (uint8_t n = 0; n < 3; ++n)
      if (m.holds(3, {w, n}, st.var_index(f))) v = n;
  } else {
    const std::string& id = st.conn(f).id;
    if (id == "not") {
      v = static_cast<uint8_t>(2 - kd3_value(m, w, st.arg(f, 0), st, memo));
    } else if (id == "and") {
      v = std::min(kd3_value(m, w, st.arg(f, 0), st, memo),
                   kd3_value(m, w, st.arg(f, 1), st, memo));
    } else if (id == "or") {
      v = std::max(kd3_value(m, w, st.arg(f, 0), st, memo),
                   kd3_value(m, w, st.arg(f, 1), st, memo));
    } else if (id == "imp") {
      int a = kd3_value(m, w, st.arg(f, 0), st, memo);
      int b = kd3_value(m, w, st.arg(f, 1), st, memo);
      v = static_cast<uint8_t>(std::min(2, 2 - a + b));
    } else if (id == "iff") {
      int a = kd3_value(m, w, st.arg(f, 0), st, memo);
      int b = kd3_value(m, w, st.arg(f, 1), st, memo);
      v = static_cast<uint8_t>(2 - std::abs(a - b));
    } else if (id == "know" || id == "dia") {
      bool know = id == "know";
      int rel = know ? 1 : 2;
      int acc = know ? 2 : 0;  // min over empty = 1, max over empty = 0
      auto rit = m.relations.find(rel);
      if (rit != m.relations.end()) {
        for (const auto& tup : rit->second) {
          if (tup.size() == 2 && tup[0].size() == 1 && tup[0][0] == w) {
            int u = tup[1][0];
            int val = kd3_value(m, u, st.arg(f, 0), st, memo);
            acc = know ? std::min(acc, val) : std::max(acc, val);
          }
        }
      }
      v = static_cast<uint8_t>(acc);
    } else {
      throw std::invalid_argument("unknown kd3 connective");
    }
  }
  memo[key] = v;
  return v;
}

}  // namespace

satisfaction eval(const finite_structure& m, const element& point,
                  formula_id f, const logic_definition& logic,
                  const formula_store& store) {
  auto dit = m.domains.find(m.designated_domain);
  if (dit == m.domains.end() ||
      std::find(dit->second.begin(), dit->second.end(), point) ==
          dit->second.end())
    throw std::invalid_argument("evaluation point outside designated domain");
  satisfaction out;
  if (logic.kind == logic_kind::kd3) {
    std::map<std::pair<int, formula_id>, uint8_t> memo;
    out.value = kd3_value(m, point[0], f, store, memo);
    out.sat = out.value == 2;
  } else {
    out.sat = eval_two_valued(m, point, f, logic, store);
    out.value = out.sat ? 2 : 0;
  }
  return out;
}

std::vector<int> content_of(const finite_structure& m, const element&,
                            formula_id f, const logic_definition& logic,
                            const formula_store& store) {
  if (logic.kind != logic_kind::subs)
    throw std::invalid_argument("content assignment is a subS notion");
  std::vector<int> vars = vars_of(store, f);
  if (vars.empty()) {
    std::vector<int> all;
    auto it = m.domains.find(2);
    if (it != m.domains.end())
      for (const element& a : it->second)
        if (a.size() == 1) all.push_back(a[0]);
    std::sort(all.begin(), all.end());
    return all;
  }
  std::vector<int> acc;
  bool first = true;
  for (int v : vars) {
    std::vector<int> c = var_content(m, v);
    std::sort(c.begin(), c.end());
    if (first) {
      acc = c;
      first = false;
    } else {
      std::vector<int> merged;
      std::set_intersection(acc.begin(), acc.end(), c.begin(), c.end(),
                            std::back_inserter(merged));
      acc = std::move(merged);
    }
  }
  return acc;
}

// --- suitability ---------------------------------------------------------

namespace {

struct suit_checker {
  const finite_structure& m;
  const logic_definition& logic;
  const formula_store& store;

  element image(const index_term& t, const index_assignment& f) const {
    if (t.is_reserved()) return {static_cast<int>(t.value())};
    return f.at(t);
  }

  bool ready(const expr& e, const index_assignment& f) const {
    auto have = [&](const index_term& t) {
      return t.is_reserved() || f.count(t) > 0;
    };
    if (!have(e.a0)) return false;
    if ((e.kind != expr_kind::tagged || e.argc > 1) && !have(e.a1))
      return false;
    return true;
  }

  bool check(const expr& e, const index_assignment& f) const {
    switch (e.kind) {
      case expr_kind::tagged: {
        const fsym_decl& fd = logic.lang.fsyms[e.sym];
        element tuple = image(e.a0, f);
        if (e.argc > 1) {
          element snd = image(e.a1, f);
          tuple.insert(tuple.end(), snd.begin(), snd.end());
        }
        if (!m.has_element(fd.domain_index, tuple)) return false;
        bool sat;
        if (logic.kind == logic_kind::kd3) {
          std::map<std::pair<int, formula_id>, uint8_t> memo;
          uint8_t v = kd3_value(m, tuple[0], e.f, store, memo);
          sat = (e.argc > 1) ? (v == tuple[1]) : (v == 2);
        } else if (logic.kind == logic_kind::subs &&
                   e.sym == sym::fsym_content) {
          auto c = content_of(m, {}, e.f, logic, store);
          sat = std::find(c.begin(), c.end(), tuple[0]) != c.end();
        } else {
          sat = eval_two_valued(m, tuple, e.f, logic, store);
        }
        return e.neg ? !sat : sat;
      }
      case expr_kind::rel: {
        const psym_decl& pd = logic.lang.psyms[e.sym];
        std::vector<element> tuple = {image(e.a0, f), image(e.a1, f)};
        bool in = m.in_relation(pd.relation_index, tuple);
        return e.neg ? !in : in;
      }
      case expr_kind::eq: {
        bool same = image(e.a0, f) == image(e.a1, f);
        return e.neg ? !same : same;
      }
    }
    return false;
  }
};

}  // namespace

std::optional<index_assignment> is_suitable(const finite_structure& m,
                                            const expr_set& x,
                                            const logic_definition& logic,
                                            const formula_store& store) {
  if (is_b_inconsistent(x)) return std::nullopt;
  suit_checker ck{m, logic, store};
  std::vector<index_term> todo;
  for (const auto& t : indices_of(x))
    if (!t.is_reserved()) todo.push_back(t);
  std::vector<element> pool;
  for (const auto& [di, elems] : m.domains)
    for (const element& e : elems) pool.push_back(e);
  index_assignment f;

  std::function<bool(size_t)> rec = [&](size_t k) -> bool {
    if (k == todo.size()) {
      for (const expr& e : x)
        if (!ck.check(e, f)) return false;
      return true;
    }
    for (const element& cand : pool) {
      f[todo[k]] = cand;
      bool ok = true;
      for (const expr& e : x) {
        if (!ck.ready(e, f)) continue;
        if (!ck.check(e, f)) {
          ok = false;
          break;
        }
      }
      if (ok && rec(k + 1)) return true;
      f.erase(todo[k]);
    }
    return false;
  };
  if (!rec(0)) return std::nullopt;
  return f;
}

// --- structure generation from branch unions -------------------------------

namespace {

struct index_merger {
  std::map<uint32_t, uint32_t> parent;
  uint32_t find(uint32_t v) {
    auto it = parent.find(v);
    if (it == parent.end() || it->second == v) return v;
    return parent[v] = find(it->second);
  }
  void merge(uint32_t a, uint32_t b) {
    uint32_t ra = find(a), rb = find(b);
    if (ra == rb) return;
    if (ra < rb) std::swap(ra, rb);  // keep the smaller representative
    parent[ra] = rb;
  }
};

}  // namespace

finite_structure generate_structure(const branch& b,
                                    const logic_definition& logic,
                                    const formula_store& store) {
  if (is_b_inconsistent(b.union_set))
    throw std::invalid_argument(
        "only an open branch generates a structure");
  finite_structure s;
  s.designated_domain = logic.designated_domain;
  index_merger merge;
  for (const expr& e : b.union_set)
    if (e.kind == expr_kind::eq && !e.neg && !e.a0.is_reserved() &&
        !e.a1.is_reserved())
      merge.merge(e.a0.value(), e.a1.value());
  auto coord = [&](const index_term& t) -> int {
    if (t.is_reserved()) return static_cast<int>(t.value());
    return static_cast<int>(merge.find(t.value()));
  };
  for (const expr& e : b.union_set) {
    if (e.kind != expr_kind::tagged) continue;
    const fsym_decl& fd = logic.lang.fsyms[e.sym];
    element tuple{coord(e.a0)};
    if (e.argc > 1) tuple.push_back(coord(e.a1));
    s.add_element(fd.domain_index, tuple);
    if (store.is_var(e.f) && !e.neg)
      s.set_true(fd.domain_index, tuple, store.var_index(e.f));
  }
  for (const expr& e : b.union_set) {
    if (e.kind != expr_kind::rel || e.neg) continue;
    const psym_decl& pd = logic.lang.psyms[e.sym];
    std::vector<element> tuple = {{coord(e.a0)}, {coord(e.a1)}};
    auto& rel = s.relations[pd.relation_index];
    if (std::find(rel.begin(), rel.end(), tuple) == rel.end())
      rel.push_back(tuple);
  }
  return s;
}

finite_structure extend_to_model(const finite_structure& s,
                                 const logic_definition& logic,
                                 const formula_store& store,
                                 const std::vector<int>& vars_of_interest) {
  finite_structure m = s;
  m.designated_domain = logic.designated_domain;
  if (m.domains[1].empty()) m.add_element(1, {1});
  switch (logic.kind) {
    case logic_kind::classical:
      break;  // absent valuation entries already mean false
    case logic_kind::subs: {
      // every variable needs a non-empty content: grant fresh singletons
      int next_atom = 1000;
      for (const auto& [d, elems] : m.domains)
        for (const element& e : elems)
          for (int a : e) next_atom = std::max(next_atom, a + 1);
      for (int v : vars_of_interest) {
        if (!var_content(m, v).empty()) continue;
        element fresh{next_atom++};
        m.add_element(2, fresh);
        m.set_true(2, fresh, v);
      }
      break;
    }
    case logic_kind::kd3: {
      // pull worlds mentioned only in the pair domain into W1
      for (const element& e : m.domains[3])
        if (e.size() == 2) m.add_element(1, {e[0]});
      m.domains[2] = {{0}, {1}, {2}};
      for (const element& w : m.domains[1])
        for (int n = 0; n < 3; ++n) m.add_element(3, {w[0], n});
      auto& le = m.relations[3];
      le.clear();
      for (int a = 0; a < 3; ++a)
        for (int bvl = a; bvl < 3; ++bvl)
          le.push_back({{a}, {bvl}});
      // unvalued (world, variable) pairs default to value 0
      for (const element& w : m.domains[1]) {
        for (int v : vars_of_interest) {
          bool has = false;
          for (int n = 0; n < 3; ++n)
            if (m.holds(3, {w[0], n}, v)) has = true;
          if (!has) m.set_true(3, {w[0], 0}, v);
        }
      }
      // keep the world-level entries consistent with value-1 entries
      for (const element& w : m.domains[1])
        for (int v : vars_of_interest)
          if (m.holds(3, {w[0], 2}, v)) m.set_true(1, {w[0]}, v);
      break;
    }
  }
  return m;
}

countermodel extract_countermodel(const proof_result& r,
                                  const logic_definition& logic,
                                  const formula_store& store) {
  countermodel out;
  if (r.kind != verdict_kind::refuted || !r.witness) {
    out.note = "no refutation witness";
    return out;
  }
  const branch& b = *r.witness;
  finite_structure s = generate_structure(b, logic, store);
  std::vector<int> vars;
  {
    uint64_t mask = 0;
    for (formula_id p : r.tab.premises) mask |= store.var_mask(p);
    mask |= store.var_mask(r.tab.goal);
    for (int v = 0; v < 64; ++v)
      if (mask & (uint64_t{1} << v)) vars.push_back(v);
  }
  finite_structure m = extend_to_model(s, logic, store, vars);
  element point{1};  // start label index
  if (!m.has_element(m.designated_domain, point)) {
    if (!m.domains[m.designated_domain].empty())
      point = m.domains[m.designated_domain][0];
  }
  out.model = m;
  out.point = point;
  out.verified = true;
  for (formula_id p : r.tab.premises) {
    if (!eval(m, point, p, logic, store).sat) {
      out.verified = false;
      out.note = "premise not satisfied at the start point";
    }
  }
  if (eval(m, point, r.tab.goal, logic, store).sat) {
    out.verified = false;
    out.note = "goal still satisfied at the start point";
  }
  if (logic.kind == logic_kind::kd3) {
    for (const element& w : m.domains[1]) {
      if (!m.in_relation(1, {w, w})) {
        out.verified = false;
        out.note = "accessibility not reflexive";
      }
    }
  }
  return out;
}

std::string model_to_json(const finite_structure& m,
                          const logic_definition& logic,
                          const formula_store& store) {
  std::ostringstream os;
  os << "{\"domains\":{";
  bool fd = true;
  for (const auto& [d, elems] : m.domains) {
    if (!fd) os << ",";
    fd = false;
    os << "\"" << d << "\":[";
    for (size_t i = 0; i < elems.size(); ++i) {
      if (i) os << ",";
      os << "[";
      for (size_t k = 0; k < elems[i].size(); ++k) {
        if (k) os << ",";
        os << elems[i][k];
      }
      os << "]";
    }
    os << "]";
  }
  os << "},\"relations\":{";
  fd = true;
  for (const auto& [rl, tuples] : m.relations) {
    if (!fd) os << ",";
    fd = false;
    os << "\"" << rl << "\":[";
    for (size_t i = 0; i < tuples.size(); ++i) {
      if (i) os << ",";
      os << "[";
      for (size_t k = 0; k < tuples[i].size(); ++k) {
        if (k) os << ",";
        os << tuples[i][k][0];
      }
      os << "]";
    }
    os << "]";
  }
  os << "},\"valuation\":[";
  bool fv = true;
  for (const auto& [d, e, v] : m.valuation) {
    if (!fv) os << ",";
    fv = false;
    os << "{\"domain\":" << d << ",\"element\":[";
    for (size_t k = 0; k < e.size(); ++k) {
      if (k) os << ",";
      os << e[k];
    }
    os << "],\"var\":\"" << store.var_name_by_index(v) << "\"}";
  }
  os << "]";
  if (logic.kind == logic_kind::subs) {
    os << ",\"contents\":{";
    bool fc = true;
    for (int v = 0; v < store.var_count(); ++v) {
      auto c = var_content(m, v);
      if (c.empty()) continue;
      if (!fc) os << ",";
      fc = false;
      os << "\"" << store.var_name_by_index(v) << "\":[";
      for (size_t i = 0; i < c.size(); ++i) {
        if (i) os << ",";
        os << c[i];
      }
      os << "]";
    }
    os << "}";
  }
  os << "}";
  return os.str();
}

// --- bounded oracles -------------------------------------------------------

consequence_verdict consequence_bounded(
    const std::vector<formula_id>& premises, formula_id goal,
    const logic_definition& logic, const enumeration_bounds& bounds,
    const formula_store& store) {
  bounds.validate();
  consequence_verdict out;
  std::vector<int> vars;
  {
    uint64_t mask = store.var_mask(goal);
    for (formula_id p : premises) mask |= store.var_mask(p);
    for (int v = 0; v < 64; ++v)
      if (mask & (uint64_t{1} << v)) vars.push_back(v);
  }
  switch (logic.kind) {
    case logic_kind::classical: {
      for (uint32_t bits = 0; bits < (1u << vars.size()); ++bits) {
        finite_structure m;
        m.designated_domain = 1;
        m.add_element(1, {1});
        for (size_t i = 0; i < vars.size(); ++i)
          if (bits & (1u << i)) m.set_true(1, {1}, vars[i]);
        ++out.models_checked;
        bool prem_ok = true;
        for (formula_id p : premises)
          if (!eval(m, {1}, p, logic, store).sat) prem_ok = false;
        if (prem_ok && !eval(m, {1}, goal, logic, store).sat) {
          out.holds = false;
          out.model = m;
          out.point = {1};
          return out;
        }
      }
      return out;
    }
    case logic_kind::subs: {
      int atoms = bounds.max_atoms;
      uint32_t content_options = (1u << atoms) - 1;
      std::vector<uint32_t> contents(vars.size(), 1);
      auto run_model = [&](uint32_t truth_bits) -> bool {
        finite_structure m;
        m.designated_domain = 1;
        m.add_element(1, {1});
        for (int a = 0; a < atoms; ++a) m.add_element(2, {a});
        for (size_t i = 0; i < vars.size(); ++i) {
          if (truth_bits & (1u << i)) m.set_true(1, {1}, vars[i]);
          for (int a = 0; a < atoms; ++a)
            if (contents[i] & (1u << a)) m.set_true(2, {a}, vars[i]);
        }
        ++out.models_checked;
        bool prem_ok = true;
        for (formula_id p : premises)
          if (!eval(m, {1}, p, logic, store).sat) prem_ok = false;
        if (prem_ok && !eval(m, {1}, goal, logic, store).sat) {
          out.holds = false;
          out.model = m;
          out.point = {1};
          return true;
        }
        return false;
      };
      // odometer over per-variable non-empty contents
      while (true) {
        for (uint32_t bits = 0; bits < (1u << vars.size()); ++bits)
          if (run_model(bits)) return out;
        size_t k = 0;
        while (k < contents.size()) {
          if (++contents[k] <= content_options) break;
          contents[k] = 1;
          ++k;
        }
        if (k == contents.size()) break;
      }
      return out;
    }
    case logic_kind::kd3: {
      if (vars.size() > 3)
        throw std::invalid_argument(
            "kd3 bounded oracle supports at most 3 variables");
      auto res = kd3fast::oracle(premises, goal, store, bounds.max_worlds,
                                 static_cast<int>(vars.size()), vars);
      out.models_checked = res.models;
      out.holds = res.holds;
      if (!res.holds) {
        out.model = kd3fast::to_structure(res, vars);
        out.point = {res.world + 1};
      }
      return out;
    }
  }
  return out;
}

// --- soundness audits ------------------------------------------------------

namespace {

std::vector<finite_structure> enumerate_two_valued_models(
    const logic_definition& logic, const enumeration_bounds& bounds,
    const std::vector<int>& vars) {
  std::vector<finite_structure> out;
  if (logic.kind == logic_kind::classical) {
    for (uint32_t bits = 0; bits < (1u << vars.size()); ++bits) {
      finite_structure m;
      m.designated_domain = 1;
      m.add_element(1, {1});
      for (size_t i = 0; i < vars.size(); ++i)
        if (bits & (1u << i)) m.set_true(1, {1}, vars[i]);
      out.push_back(std::move(m));
    }
    return out;
  }
  int atoms = std::min(bounds.max_atoms, 3);
  uint32_t content_options = (1u << atoms) - 1;
  std::vector<uint32_t> contents(vars.size(), 1);
  while (true) {
    for (uint32_t bits = 0; bits < (1u << vars.size()); ++bits) {
      finite_structure m;
      m.designated_domain = 1;
      m.add_element(1, {1});
      for (int a = 0; a < atoms; ++a) m.add_element(2, {a});
      for (size_t i = 0; i < vars.size(); ++i) {
        if (bits & (1u << i)) m.set_true(1, {1}, vars[i]);
        for (int a = 0; a < atoms; ++a)
          if (contents[i] & (1u << a)) m.set_true(2, {a}, vars[i]);
      }
      out.push_back(std::move(m));
    }
    size_t k = 0;
    while (k < contents.size()) {
      if (++contents[k] <= content_options) break;
      contents[k] = 1;
      ++k;
    }
    if (k == contents.size()) break;
  }
  return out;
}

struct instance_sample {
  expr_set input;
  rule_application app;
  int sample_id = 0;
};

// builds concrete inputs by instantiating the schema premises over a small
// formula pool, then recovers the application through the real matcher
std::vector<instance_sample> sample_instances(const logic_definition& logic,
                                              const rule_schema& schema,
                                              int schema_index, int want,
                                              uint64_t seed,
                                              formula_store& store) {
  std::vector<instance_sample> out;
  std::mt19937_64 rng(seed ^ (0x1234567 + schema_index));
  // formula pool: everything up to depth 1, a few deeper ones
  std::vector<formula_id> pool;
  {
    // small pool keeps the audit's model-scan tables compact
    formula_enumerator en(store, {"p", "q"}, 1);
    int budget = 16;
    while (auto f = en.next()) {
      pool.push_back(*f);
      if (--budget <= 0) break;
    }
  }
  int attempts = 0;
  while (static_cast<int>(out.size()) < want && attempts < want * 30) {
    ++attempts;
    substitution s;
    s.fmeta[0] = pool[rng() % pool.size()];
    s.fmeta[1] = pool[rng() % pool.size()];
    uint8_t v0 = static_cast<uint8_t>(rng() % 3);
    uint8_t v1 = static_cast<uint8_t>((v0 + 1 + rng() % 2) % 3);
    if (v0 > v1) std::swap(v0, v1);
    s.vmeta[0] = v0;
    s.vmeta[1] = v1;
    int base = 1 + static_cast<int>(rng() % 2);
    for (int i = 0; i < 4; ++i)
      s.set_imeta(i, index_term::renameable(base + i));
    std::vector<expr> items;
    for (size_t pi = 0; pi < schema.premises.size(); ++pi)
      items.push_back(instantiate_premise(schema, pi, s, store));
    expr_set input(items);
    if (is_b_inconsistent(input)) continue;
    match_context ctx;
    if (schema.matcher == matcher_kind::pair_provenance) {
      match_context::pair_rec r;
      r.a = s.fmeta[0];
      r.b = s.fmeta[1];
      r.i = s.imeta[0];
      r.j = s.imeta[1];
      ctx.pairs.push_back(r);
    }
    for (const auto& ms : match_core(schema, input, store, ctx)) {
      auto app =
          instantiate(schema, schema_index, ms, input, store, ctx, true);
      if (!app) continue;
      instance_sample is;
      is.input = input;
      is.app = *app;
      is.sample_id = static_cast<int>(out.size());
      out.push_back(std::move(is));
      break;
    }
  }
  return out;
}

}  // namespace

audit_report audit_rules_sound(const logic_definition& logic,
                               const enumeration_bounds& bounds,
                               int samples_per_schema, uint64_t seed,
                               formula_store& store, int jobs) {
  bounds.validate();
  audit_report rep;
  if (logic.kind == logic_kind::kd3) {
    std::vector<kd3fast::compiled_instance> fast;
    std::vector<std::pair<int, int>> origin;  // (schema, sample)
    for (size_t ri = 0; ri < logic.rules.size(); ++ri) {
      auto samples = sample_instances(logic, logic.rules[ri],
                                      static_cast<int>(ri),
                                      samples_per_schema, seed, store);
      for (auto& is : samples) {
        auto ci = kd3fast::compile_instance(is.input, is.app, logic, store);
        if (!ci) continue;
        ci->schema = static_cast<int>(ri);
        ci->sample = is.sample_id;
        origin.push_back({static_cast<int>(ri), is.sample_id});
        fast.push_back(std::move(*ci));
      }
      rep.entries.push_back({logic.rules[ri].name, "rule-soundness", -1, false,
                             std::to_string(samples.size()) +
                                 " sampled instances"});
    }
    auto res =
        kd3fast::scan_models(fast, store, bounds.max_worlds, 2, jobs);
    for (const auto& v : res.violations) {
      rep.entries.push_back({logic.rules[v.schema].name, "rule-soundness", v.sample,
                             true, v.model_desc});
    }
    return rep;
  }
  // two-valued logics: exhaustive small model spaces, generic suitability
  std::vector<int> vars = {0, 1};
  {
    // the pool above interns p and q first; recover their ids
    auto p = store.find_var("p");
    auto q = store.find_var("q");
    if (!p) p = store.var("p");
    if (!q) q = store.var("q");
    vars = {store.var_index(*p), store.var_index(*q)};
  }
  auto models = enumerate_two_valued_models(logic, bounds, vars);
  for (size_t ri = 0; ri < logic.rules.size(); ++ri) {
    auto samples =
        sample_instances(logic, logic.rules[ri], static_cast<int>(ri),
                         samples_per_schema, seed, store);
    int viols = 0;
    for (const auto& is : samples) {
      for (const auto& m : models) {
        if (!is_suitable(m, is.input, logic, store)) continue;
        bool some_output = false;
        for (const auto& d : is.app.deltas) {
          expr_set o = is.input;
          for (const expr& e : d) o.insert(e);
          if (is_suitable(m, o, logic, store)) {
            some_output = true;
            break;
          }
        }
        if (!some_output) {
          ++viols;
          rep.entries.push_back({logic.rules[ri].name, "rule-soundness", is.sample_id,
                                 true, model_to_json(m, logic, store)});
          break;  // one witness per sample is enough
        }
      }
    }
    rep.entries.push_back({logic.rules[ri].name, "rule-soundness", -1, false,
                           std::to_string(samples.size()) +
                               " sampled instances, " +
                               std::to_string(viols) + " violations"});
  }
  return rep;
}

audit_report audit_models_sound(const logic_definition& logic,
                                const std::vector<branch>& branch_samples,
                                const formula_store& store) {
  audit_report rep;
  for (size_t bi = 0; bi < branch_samples.size(); ++bi) {
    const branch& b = branch_samples[bi];
    if (is_b_inconsistent(b.union_set)) {
      rep.entries.push_back({"(branch)", "model-soundness", static_cast<int>(bi), true,
                             "closed branch offered as a countermodel source"});
      continue;
    }
    finite_structure s = generate_structure(b, logic, store);
    std::vector<int> vars;
    {
      uint64_t mask = 0;
      for (const expr& e : b.union_set)
        if (e.kind == expr_kind::tagged) mask |= store.var_mask(e.f);
      for (int v = 0; v < 64; ++v)
        if (mask & (uint64_t{1} << v)) vars.push_back(v);
    }
    finite_structure m = extend_to_model(s, logic, store, vars);
    suit_checker ck{m, logic, store};
    index_assignment f;
    for (const auto& t : indices_of(b.union_set))
      if (!t.is_reserved()) f[t] = {static_cast<int>(t.value())};
    int viols = 0;
    for (const expr& e : b.union_set) {
      if (!ck.check(e, f)) {
        ++viols;
        rep.entries.push_back(
            {"(branch)", "model-soundness", static_cast<int>(bi), true,
             render_expr(store, logic.lang, e) + " fails in the model"});
      }
    }
    rep.entries.push_back({"(branch)", "model-soundness", static_cast<int>(bi), false,
                           std::to_string(viols) + " violations over " +
                               std::to_string(b.union_set.size()) +
                               " expressions"});
  }
  return rep;
}

// --- code-level truth-table oracles ---------------------------------------

namespace {

enum class op8 : uint8_t { o_not, o_and, o_or, o_imp, o_iff, o_dia, o_know };

std::vector<op8> opcode_table(const signature& sig) {
  std::vector<op8> out;
  for (const auto& c : sig.connectives) {
    if (c.id == "not") out.push_back(op8::o_not);
    else if (c.id == "and") out.push_back(op8::o_and);
    else if (c.id == "or") out.push_back(op8::o_or);
    else if (c.id == "imp") out.push_back(op8::o_imp);
    else if (c.id == "iff") out.push_back(op8::o_iff);
    else if (c.id == "dia") out.push_back(op8::o_dia);
    else if (c.id == "know") out.push_back(op8::o_know);
    else throw std::invalid_argument("unknown connective id " + c.id);
  }
  return out;
}

}  // namespace

uint8_t l3_eval_code(const formula_code& code, const uint8_t* var_values) {
  // callers guarantee modal-free codes over the standard connective layout
  uint8_t stack[64];
  int sp = 0;
  for (uint8_t b : code) {
    if (!(b & 0x80)) {
      stack[sp++] = var_values[b];
      continue;
    }
    switch (b & 0x7f) {
      case 0: stack[sp - 1] = static_cast<uint8_t>(2 - stack[sp - 1]); break;
      case 1: --sp; stack[sp - 1] = std::min(stack[sp - 1], stack[sp]); break;
      case 2: --sp; stack[sp - 1] = std::max(stack[sp - 1], stack[sp]); break;
      case 3:
        --sp;
        stack[sp - 1] = static_cast<uint8_t>(
            std::min(2, 2 - stack[sp - 1] + stack[sp]));
        break;
      case 4:
        --sp;
        stack[sp - 1] =
            static_cast<uint8_t>(2 - std::abs(stack[sp - 1] - stack[sp]));
        break;
      default:
        throw std::invalid_argument("modal connective in truth-table oracle");
    }
  }
  return stack[0];
}

bool l3_code_valid(const formula_code& code, int num_vars, const signature&) {
  int rows = 1;
  for (int i = 0; i < num_vars; ++i) rows *= 3;
  uint8_t vals[8];
  for (int r = 0; r < rows; ++r) {
    int x = r;
    for (int i = 0; i < num_vars; ++i) {
      vals[i] = static_cast<uint8_t>(x % 3);
      x /= 3;
    }
    if (l3_eval_code(code, vals) != 2) return false;
  }
  return true;
}

bool classical_eval_code(const formula_code& code, const uint8_t* var_values,
                         const signature&) {
  bool stack[64];
  int sp = 0;
  for (uint8_t b : code) {
    if (!(b & 0x80)) {
      stack[sp++] = var_values[b] != 0;
      continue;
    }
    switch (b & 0x7f) {
      case 0: stack[sp - 1] = !stack[sp - 1]; break;
      case 1: --sp; stack[sp - 1] = stack[sp - 1] && stack[sp]; break;
      case 2: --sp; stack[sp - 1] = stack[sp - 1] || stack[sp]; break;
      case 3: --sp; stack[sp - 1] = !stack[sp - 1] || stack[sp]; break;
      case 4: --sp; stack[sp - 1] = stack[sp - 1] == stack[sp]; break;
      default:
        throw std::invalid_argument("modal connective in truth-table oracle");
    }
  }
  return stack[0];
}

bool classical_code_valid(const formula_code& code, int num_vars,
                          const signature& sig) {
  for (int r = 0; r < (1 << num_vars); ++r) {
    uint8_t vals[8];
    for (int i = 0; i < num_vars; ++i)
      vals[i] = static_cast<uint8_t>((r >> i) & 1);
    if (!classical_eval_code(code, vals, sig)) return false;
  }
  return true;
}

}  // namespace tabkit
