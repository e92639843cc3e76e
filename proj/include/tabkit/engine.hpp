#pragma once

#include "tabkit/logics.hpp"

namespace tabkit {

struct limits {
  size_t max_expressions_per_branch = 5000;
  size_t max_fresh_indices = 50;
  size_t max_branches = 20000;
  size_t max_steps_total = 1000000;
  void validate() const;
};

enum class branch_status : uint8_t {
  closed,
  open_incomplete,
  open_complete,
  resource_exceeded
};

const char* to_string(branch_status s);

struct branch_step {
  rule_application app;
  int alt = 0;
  std::vector<expr> delta;  // app.deltas[alt], minus what was present
};

// Strictly growing expression-set sequence. elements()[0] is the start set;
// each later element adds its step's delta.
struct branch {
  expr_set start;
  std::vector<branch_step> steps;
  expr_set union_set;

  std::vector<expr_set> elements() const;
};

branch start_branch(const std::vector<formula_id>& premises, formula_id goal,
                    const logic_definition& logic, formula_store& store);

branch extend(const branch& b, const rule_application& app, int alt);

branch_status status_of(const branch& b, const logic_definition& logic,
                        formula_store& store);

match_context context_of(const branch& b, const logic_definition& logic);

struct tableau_node {
  int parent = -1;
  int rule = -1;  // schema index applied at the parent to create this node
  int alt = -1;
  std::vector<expr> delta;
  substitution subst;
  branch_status status = branch_status::open_incomplete;
  int depth = 0;
};

struct tableau {
  std::vector<formula_id> premises;
  formula_id goal = no_formula;
  std::string logic;
  expr_set start;
  std::vector<tableau_node> nodes;  // preorder, node 0 is the root
  std::vector<int> leaves;

  branch branch_of(int leaf, const logic_definition& logic) const;
};

enum class verdict_kind : uint8_t { proved, refuted, out_of_resources };

const char* to_string(verdict_kind v);

struct proof_result {
  verdict_kind kind = verdict_kind::out_of_resources;
  tableau tab;
  std::optional<branch> witness;  // refuted: first open complete branch
  size_t steps_used = 0;
  size_t leaves_used = 0;
};

struct saturation_result {
  bool out_of_resources = false;
  tableau tab;
  std::vector<branch> branches;
};

// Depth-first saturation: one instance per node, forking on its
// alternatives. Leaves are closed or complete-open branches.
saturation_result saturate(const std::vector<formula_id>& premises,
                           formula_id goal, const logic_definition& logic,
                           const limits& lim, formula_store& store);

// Branch-consequence decision: Proved when every complete branch closes,
// Refuted with the first complete open branch otherwise.
proof_result decide(const std::vector<formula_id>& premises, formula_id goal,
                    const logic_definition& logic, const limits& lim,
                    formula_store& store);

// Same search, same verdicts, no tableau recording: the bulk-sweep path.
proof_result decide_quick(const std::vector<formula_id>& premises,
                          formula_id goal, const logic_definition& logic,
                          const limits& lim, formula_store& store);

struct kind_count {
  size_t total_kinds = 0;
  size_t complete_kinds = 0;
  bool all_complete_closed = true;
  bool out_of_resources = false;
  std::vector<branch> representatives;  // one per complete kind
};

// Exhaustive enumeration: every applicable instance at every node, every
// alternative; branch objects counted modulo elementwise similarity of their
// set sequences. Prefixes count as kinds of their own.
kind_count enumerate_branch_kinds(const std::vector<formula_id>& premises,
                                  formula_id goal,
                                  const logic_definition& logic,
                                  const limits& lim, formula_store& store);

bool is_redundant_variant(const branch& psi, const branch& phi);

struct verification_report {
  std::vector<std::string> failures;
  bool ok() const { return failures.empty(); }
};

// Re-derives every invariant of a finished tableau from its raw data:
// shared start, sibling coherence, leaf statuses, maximality. Used as the
// proof-certificate check, independent of the search path.
verification_report verify_tableau(const tableau& t,
                                   const logic_definition& logic,
                                   formula_store& store);

std::string render_trace_text(const proof_result& r,
                              const logic_definition& logic,
                              const formula_store& store);
std::string render_trace_json(const proof_result& r,
                              const logic_definition& logic,
                              const formula_store& store, const limits& lim);

}  // namespace tabkit
