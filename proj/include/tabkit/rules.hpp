#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "tabkit/tablang.hpp"

namespace tabkit {

// --- pattern layer -----------------------------------------------------
//
// Rules are infinite relations in the underlying theory; here each one is a
// finite schema: premise patterns over metavariables, decidable guards, and
// output templates (one list per fork). The induced relation is what the
// engine applies and what audit_rule_schema probes.

struct fpat {
  int8_t conn = -2;   // -2: bare formula metavariable
  int8_t meta = -1;   // meta id when conn == -2
  std::vector<fpat> args;

  static fpat any(int meta) {
    fpat p;
    p.meta = static_cast<int8_t>(meta);
    return p;
  }
  static fpat head(int conn, std::vector<fpat> args) {
    fpat p;
    p.conn = static_cast<int8_t>(conn);
    p.args = std::move(args);
    return p;
  }
};

struct ipat {
  enum class kinds : uint8_t { imeta, vmeta, lit } k = kinds::imeta;
  uint8_t id = 0;  // imeta id / vmeta id / reserved constant

  static ipat im(int id) { return {kinds::imeta, static_cast<uint8_t>(id)}; }
  static ipat vm(int id) { return {kinds::vmeta, static_cast<uint8_t>(id)}; }
  static ipat lit(int reserved_id) {
    return {kinds::lit, static_cast<uint8_t>(reserved_id)};
  }
};

struct pat_expr {
  expr_kind kind = expr_kind::tagged;
  bool neg = false;
  uint8_t sym = 0;
  uint8_t argc = 1;
  fpat formula;     // tagged only
  ipat a0, a1;
  int8_t var_expand = -1;  // >=0: expand to one expr per variable of fmeta

  // prefilter, filled by compile()
  uint32_t key_mask = 0, key_want = 0;

  static pat_expr tagged1(fpat f, bool neg, uint8_t fsym, ipat a0) {
    pat_expr p;
    p.kind = expr_kind::tagged;
    p.neg = neg;
    p.sym = fsym;
    p.argc = 1;
    p.formula = std::move(f);
    p.a0 = a0;
    return p;
  }
  static pat_expr tagged2(fpat f, bool neg, uint8_t fsym, ipat a0, ipat a1) {
    pat_expr p = tagged1(std::move(f), neg, fsym, a0);
    p.argc = 2;
    p.a1 = a1;
    return p;
  }
  static pat_expr relp(uint8_t psym, bool neg, ipat a0, ipat a1) {
    pat_expr p;
    p.kind = expr_kind::rel;
    p.neg = neg;
    p.sym = psym;
    p.argc = 2;
    p.a0 = a0;
    p.a1 = a1;
    return p;
  }
};

struct guard {
  enum class kinds : uint8_t {
    fresh,           // imeta may only be bound by fresh allocation
    distinct_index,  // imeta a != imeta b
    distinct_value,  // vmeta a != vmeta b
    value_lt,        // vmeta a < vmeta b (kills mirrored premise matches)
    absent_instance, // no wildcard binding puts all templates inside the input
  } k = kinds::fresh;
  uint8_t a = 0, b = 0;
  std::vector<pat_expr> templates;
  std::vector<std::pair<uint8_t, uint8_t>> distinct;  // wildcard imeta pairs
};

enum class alt_mode : uint8_t { fixed, per_variable };
enum class matcher_kind : uint8_t { standard, pair_provenance };

struct rule_schema {
  std::string name;
  matcher_kind matcher = matcher_kind::standard;
  std::vector<pat_expr> premises;
  std::vector<guard> guards;
  alt_mode amode = alt_mode::fixed;
  int8_t alt_var_meta = -1;  // per_variable: fmeta whose variables fork
  std::vector<std::vector<pat_expr>> alts;
  std::vector<uint8_t> fresh_imetas;

  void compile(const signature& sig);
};

struct subst_key {
  std::array<uint32_t, 14> w{};
  friend auto operator<=>(const subst_key&, const subst_key&) = default;
};

struct substitution {
  std::array<formula_id, 4> fmeta{no_formula, no_formula, no_formula,
                                  no_formula};
  std::array<index_term, 8> imeta{};
  uint8_t imeta_set = 0;
  std::array<uint8_t, 4> vmeta{0xff, 0xff, 0xff, 0xff};

  bool has_imeta(int i) const { return imeta_set & (1u << i); }
  void set_imeta(int i, index_term t) {
    imeta[i] = t;
    imeta_set |= (1u << i);
  }
  subst_key key() const;       // canonical ordering key (POD, no allocation)
  std::string encode() const;  // the same key as bytes, for reports
};

// Branch-level context: pairs recorded by provenance-carrying rules.
struct match_context {
  struct pair_rec {
    formula_id a = no_formula, b = no_formula;
    index_term i, j;
  };
  std::vector<pair_rec> pairs;
};

// One applicable instance in lean form: the deltas per alternative (already
// deduplicated and minus the input).
struct rule_application {
  int schema = -1;
  substitution subst;
  std::vector<std::vector<expr>> deltas;
  std::string order_key() const { return subst.encode(); }
};

// Materialized per the domain contract: input plus full outputs.
struct rule_instance {
  int schema = -1;
  substitution subst;
  expr_set input;
  std::vector<expr_set> outputs;
};

rule_instance materialize(const rule_application& app, const expr_set& input);

// Instantiates one premise pattern under a complete substitution (head
// shapes are built from the bound metavariables). Used by samplers.
expr instantiate_premise(const rule_schema& schema, size_t premise_idx,
                         const substitution& s, formula_store& store);

std::vector<substitution> match_core(const rule_schema& schema,
                                     const expr_set& x,
                                     const formula_store& store,
                                     const match_context& ctx = {});

// Absent when the input is b-inconsistent, a guard fails, or some
// alternative adds nothing. `input_known_consistent` lets the engine skip
// the b-consistency rescan.
std::optional<rule_application> instantiate(
    const rule_schema& schema, int schema_index, const substitution& subst,
    const expr_set& x, formula_store& store, const match_context& ctx = {},
    bool input_known_consistent = false);

std::vector<rule_application> applicable_instances(
    const std::vector<rule_schema>& rules, const expr_set& x,
    formula_store& store, const match_context& ctx = {});

std::optional<rule_application> first_applicable(
    const std::vector<rule_schema>& rules, const expr_set& x,
    formula_store& store, const match_context& ctx = {});

// Engine-side acceleration: the saturation walker tracks, per schema, which
// branch expressions can serve as its first premise, so a node visit only
// touches schemas with live candidates. Equivalent to first_applicable by
// construction (the match set is identical and ties are broken by the same
// canonical key); a test pits the two against each other.
uint32_t expr_match_key(const expr& e, const formula_store& st);
bool premise0_key_matches(const rule_schema& schema, uint32_t key);
// Monotone rechecking: rule blocking only ever strengthens as a branch
// grows, so once a schema is verified inapplicable it can only wake up
// through a match touching expressions added afterwards. `branch_exprs`
// lists the branch's expressions in arrival order; `watermarks[ri]` is the
// prefix length of branch_exprs already covered for schema ri (0 forces a
// full scan). Schemas scanned without success get their watermark advanced;
// the caller undoes those moves on backtrack via `moved`.
struct watermark_moves {
  std::array<std::pair<uint32_t, uint32_t>, 32> entries;
  int count = 0;
  void record(uint32_t schema, uint32_t old_value) {
    entries[count++] = {schema, old_value};
  }
  void undo(std::vector<uint32_t>& watermarks) const {
    for (int i = count - 1; i >= 0; --i)
      watermarks[entries[i].first] = entries[i].second;
  }
};

std::optional<rule_application> first_applicable_indexed(
    const std::vector<rule_schema>& rules, const expr_set& x,
    formula_store& store, const match_context& ctx,
    const std::vector<std::vector<expr>>& premise0_cands,
    const std::vector<expr>& branch_exprs, std::vector<uint32_t>& watermarks,
    watermark_moves& moved, int* chosen_schema = nullptr);

// --- audit -------------------------------------------------------------

struct audit_entry {
  std::string schema;
  std::string condition;  // e.g. "proper-extension", "minimal-core"
  int sample = -1;
  bool violation = false;
  std::string witness;
};

struct audit_report {
  std::vector<audit_entry> entries;
  int violations() const {
    int n = 0;
    for (auto& e : entries) n += e.violation;
    return n;
  }
  std::string to_json() const;
};

struct audit_options {
  uint64_t seed = 0;
  int renamings_per_sample = 2;  // CS probes
  int supersets_per_sample = 2;  // CE probes
};

audit_report audit_rule_schema(const rule_schema& schema, int schema_index,
                               const std::vector<expr_set>& sample_inputs,
                               const std::vector<index_term>& lv,
                               formula_store& store,
                               const match_context& ctx = {},
                               const audit_options& opts = {});

}  // namespace tabkit
