#pragma once

#include <map>
#include <set>

#include "tabkit/engine.hpp"

namespace tabkit {

// Domain elements are tuples of atoms; scalars are 1-tuples. kd3 value
// elements are {reserved id}; its pair domain holds {world, value id}.
using element = std::vector<int>;

struct finite_structure {
  std::map<int, std::vector<element>> domains;
  std::map<int, std::vector<std::vector<element>>> relations;
  // (domain, element, var) entries mapped to 1; keyed by domain because
  // elements of different domains may share an encoding
  std::set<std::tuple<int, element, int>> valuation;
  int designated_domain = 1;

  bool has_element(int domain, const element& e) const;
  void add_element(int domain, const element& e);
  void set_true(int domain, const element& e, int var) {
    valuation.insert({domain, e, var});
  }
  bool holds(int domain, const element& e, int var) const {
    return valuation.count({domain, e, var}) > 0;
  }
  bool in_relation(int rel, const std::vector<element>& tuple) const;
};

// kd3 verdicts carry the value id (0, 1=half, 2=one); two-valued logics use
// `sat` alone.
struct satisfaction {
  bool sat = false;
  uint8_t value = 0;
};

satisfaction eval(const finite_structure& m, const element& point,
                  formula_id f, const logic_definition& logic,
                  const formula_store& store);

// Intersected set assignment of the content logic; the empty intersection
// convention returns every atom of the content domain.
std::vector<int> content_of(const finite_structure& m, const element& w,
                            formula_id f, const logic_definition& logic,
                            const formula_store& store);

struct enumeration_bounds {
  int max_worlds = 3;
  int max_atoms = 3;
  void validate() const;
};

struct consequence_verdict {
  bool holds = true;  // within the bounds only
  finite_structure model;
  element point;
  size_t models_checked = 0;
};

consequence_verdict consequence_bounded(
    const std::vector<formula_id>& premises, formula_id goal,
    const logic_definition& logic, const enumeration_bounds& bounds,
    const formula_store& store);

using index_assignment = std::map<index_term, element>;

std::optional<index_assignment> is_suitable(const finite_structure& m,
                                            const expr_set& x,
                                            const logic_definition& logic,
                                            const formula_store& store);

finite_structure generate_structure(const branch& b,
                                    const logic_definition& logic,
                                    const formula_store& store);

finite_structure extend_to_model(const finite_structure& s,
                                 const logic_definition& logic,
                                 const formula_store& store,
                                 const std::vector<int>& vars_of_interest);

struct countermodel {
  finite_structure model;
  element point;
  bool verified = false;
  std::string note;
};

countermodel extract_countermodel(const proof_result& r,
                                  const logic_definition& logic,
                                  const formula_store& store);

std::string model_to_json(const finite_structure& m,
                          const logic_definition& logic,
                          const formula_store& store);

// Rule-soundness probe: for every sampled instance and bounded model, a model
// suitable for the input must be suitable for some output.
audit_report audit_rules_sound(const logic_definition& logic,
                               const enumeration_bounds& bounds,
                               int samples_per_schema, uint64_t seed,
                               formula_store& store, int jobs = 1);

// Model-soundness probe over complete open branches: the generated-and-extended
// model must realize every tagged expression of the branch union.
audit_report audit_models_sound(const logic_definition& logic,
                                const std::vector<branch>& branch_samples,
                                const formula_store& store);

// Lukasiewicz three-valued evaluation over formula codes (oracle path).
uint8_t l3_eval_code(const formula_code& code, const uint8_t* var_values);
bool classical_eval_code(const formula_code& code, const uint8_t* var_values,
                         const signature& sig);
bool l3_code_valid(const formula_code& code, int num_vars,
                   const signature& sig);
bool classical_code_valid(const formula_code& code, int num_vars,
                          const signature& sig);

}  // namespace tabkit
