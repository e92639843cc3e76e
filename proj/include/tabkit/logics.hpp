#pragma once

#include <map>
#include <string>

#include "tabkit/rules.hpp"

namespace tabkit {

enum class logic_kind : uint8_t { classical, subs, kd3 };

// Symbol ids shared between the rule sets, the renderer and the semantics.
namespace sym {
// classical and subS
constexpr uint8_t fsym_world = 0;
constexpr uint8_t fsym_content = 1;  // subS only
// kd3
constexpr uint8_t fsym_valued = 1;
constexpr uint8_t psym_rk = 0;
constexpr uint8_t psym_rd = 1;
constexpr uint8_t v0 = 0;   // reserved value signs
constexpr uint8_t vh = 1;   // 1/2
constexpr uint8_t v1 = 2;
}  // namespace sym

// Where a rule application records a provenance pair for later pair-matching
// rules to consume.
struct provenance_spec {
  int schema_index = -1;
  int alt_index = -1;
  int fmeta_a = 0, fmeta_b = 1;
  int imeta_i = 0, imeta_j = 1;
};

struct logic_definition {
  std::string name;
  logic_kind kind = logic_kind::classical;
  signature sig;
  tab_language lang;  // doubles as the symbol binding (domain/relation ids)
  std::vector<index_term> reserved_values;
  std::vector<rule_schema> rules;
  std::vector<provenance_spec> provenance;
  uint8_t start_fsym = sym::fsym_world;
  int designated_domain = 1;

  // option switches for readings the source text leaves ambiguous
  bool subs_pair_provenance = true;
  bool refdia_emits_k = true;

  label start_label() const {
    return label::one(start_fsym, index_term::renameable(1));
  }
  int rule_index(const std::string& rule_name) const;
  void validate() const;
};

logic_definition make_classical();
logic_definition make_sublogic_s(bool pair_provenance = true);
logic_definition make_kd3(bool refdia_emits_k = true);

const logic_definition& classical_logic();
const logic_definition& sublogic_s();
const logic_definition& kd3_logic();

const std::map<std::string, const logic_definition*>& registry();
const logic_definition* find_logic(const std::string& name);

}  // namespace tabkit
