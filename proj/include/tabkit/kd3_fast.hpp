#pragma once

// Compact model scan for the three-valued bi-modal logic: exhaustive frames
// up to three worlds with the epistemic relation forced reflexive, all
// alethic relations, and exhaustive valuations. Backs the Def-5.6 audit and
// the bounded consequence oracle; the generic finite_structure path stays the
// reference implementation and is cross-checked against this one in tests.

#include <optional>

#include "tabkit/semantics.hpp"

namespace tabkit::kd3fast {

struct ccons {
  uint8_t slot;
  formula_id f;
  bool neq;       // true: value must differ
  uint8_t value;  // 0, 1 (=1/2), 2
};

struct crel {
  bool rk;  // false: the alethic relation
  uint8_t i, j;
  bool neg;
};

struct compiled_alt {
  std::vector<ccons> cons;
  std::vector<crel> rels;
};

struct compiled_instance {
  int schema = -1;
  int sample = -1;
  int n_slots = 0;     // input slots; a fresh output index becomes slot n_slots
  bool has_fresh = false;
  std::vector<ccons> in_cons;
  std::vector<crel> in_rels;
  std::vector<compiled_alt> alts;
  formula_id max_fid = 0;
};

std::optional<compiled_instance> compile_instance(
    const expr_set& input, const rule_application& app,
    const logic_definition& logic, const formula_store& store);

struct fast_violation {
  int schema = -1;
  int sample = -1;
  std::string model_desc;
};

struct fast_audit_result {
  std::vector<fast_violation> violations;
  size_t models = 0;  // canonical representatives scanned
};

fast_audit_result scan_models(const std::vector<compiled_instance>& instances,
                              const formula_store& store, int max_worlds,
                              int num_vars, int jobs);

struct oracle_result {
  bool holds = true;
  size_t models = 0;
  int n = 0;
  uint16_t rk = 0, rd = 0;
  uint8_t val[3][3] = {};
  int world = 0;
};

oracle_result oracle(const std::vector<formula_id>& premises, formula_id goal,
                     const formula_store& store, int max_worlds, int num_vars,
                     const std::vector<int>& var_ids);

finite_structure to_structure(const oracle_result& r,
                              const std::vector<int>& var_ids);

// direct suitability probe for one compact model; exists so tests can pit
// the compiled path against the generic finite_structure search
bool check_input_suitable(const compiled_instance& ci,
                          const formula_store& store, int n, uint16_t rk,
                          uint16_t rd, const uint8_t val[3][3], int num_vars);

}  // namespace tabkit::kd3fast
