#include "tabkit/cli.hpp"

#include <cstdlib>
#include <ostream>
#include <sstream>

#include "CLI11.hpp"
#include "tabkit/semantics.hpp"

namespace tabkit {

namespace {

struct options {
  std::string logic = "classical";
  std::vector<std::string> premises;
  std::string goal;
  size_t max_steps = 1000000;
  size_t max_branch_size = 5000;
  size_t max_fresh = 50;
  size_t max_branches = 20000;
  int worlds = 3;
  int atoms = 3;
  int depth = 2;
  std::string format = "text";
  int jobs = 1;
  uint64_t seed = 0;
  bool expect_unsound = false;
  bool trace = false;
};

void add_common(CLI::App* cmd, options& o, bool needs_goal) {
  cmd->add_option("--logic", o.logic, "logic name (classical|subS|kd3)");
  cmd->add_option("--premise", o.premises, "premise formula (repeatable)");
  auto* g = cmd->add_option("--goal", o.goal, "goal formula");
  if (needs_goal) g->required();
  cmd->add_option("--max-steps", o.max_steps, "total rule applications");
  cmd->add_option("--max-branch-size", o.max_branch_size,
                  "expressions per branch");
  cmd->add_option("--max-fresh", o.max_fresh, "fresh indices per branch");
  cmd->add_option("--max-branches", o.max_branches, "leaf budget");
  cmd->add_option("--worlds", o.worlds, "oracle world bound");
  cmd->add_option("--atoms", o.atoms, "oracle content-atom bound");
  cmd->add_option("--depth", o.depth, "formula depth bound");
  cmd->add_option("--format", o.format, "text|json");
  cmd->add_option("--jobs", o.jobs, "worker threads");
  cmd->add_option("--seed", o.seed, "sampling seed");
  cmd->add_flag("--expect-unsound", o.expect_unsound,
                "audit exits 0 when rule-soundness violations are present");
  cmd->add_flag("--trace", o.trace, "print the full proof tree / kinds");
}

bool logging_enabled() {
  const char* v = std::getenv("TABKIT_LOG");
  return v && *v;
}

limits limits_of(const options& o) {
  limits lim;
  lim.max_steps_total = o.max_steps;
  lim.max_expressions_per_branch = o.max_branch_size;
  lim.max_fresh_indices = o.max_fresh;
  lim.max_branches = o.max_branches;
  return lim;
}

struct goal_ctx {
  const logic_definition* logic = nullptr;
  formula_store store;
  std::vector<formula_id> premises;
  formula_id goal = no_formula;

  goal_ctx(const logic_definition& lg) : logic(&lg), store(lg.sig) {}
};

int parse_goal(const options& o, std::ostream& err,
               std::optional<goal_ctx>& out, bool need_goal = true) {
  const logic_definition* lg = find_logic(o.logic);
  if (!lg) {
    err << "unknown logic '" << o.logic << "'\n";
    return 64;
  }
  out.emplace(*lg);
  try {
    for (const auto& s : o.premises)
      out->premises.push_back(parse_formula(s, out->store));
    if (need_goal) out->goal = parse_formula(o.goal, out->store);
  } catch (const parse_error& e) {
    err << "parse error at offset " << e.offset << ": " << e.what() << "\n";
    return 64;
  }
  return 0;
}

int cmd_prove(const options& o, std::ostream& out, std::ostream& err) {
  std::optional<goal_ctx> g;
  if (int rc = parse_goal(o, err, g)) return rc;
  limits lim = limits_of(o);
  auto r = decide(g->premises, g->goal, *g->logic, lim, g->store);
  if (o.format == "json") {
    out << render_trace_json(r, *g->logic, g->store, lim) << "\n";
  } else {
    out << render_trace_text(r, *g->logic, g->store);
  }
  switch (r.kind) {
    case verdict_kind::proved: return 0;
    case verdict_kind::refuted: return 1;
    case verdict_kind::out_of_resources: return 2;
  }
  return 2;
}

int cmd_countermodel(const options& o, std::ostream& out, std::ostream& err) {
  std::optional<goal_ctx> g;
  if (int rc = parse_goal(o, err, g)) return rc;
  limits lim = limits_of(o);
  auto r = decide(g->premises, g->goal, *g->logic, lim, g->store);
  if (r.kind == verdict_kind::proved) {
    out << "proved: no countermodel\n";
    return 0;
  }
  if (r.kind == verdict_kind::out_of_resources) {
    out << "out-of-resources before any complete open branch\n";
    return 2;
  }
  auto cm = extract_countermodel(r, *g->logic, g->store);
  out << "{\"verdict\":\"refuted\",\"verified\":"
      << (cm.verified ? "true" : "false") << ",\"model\":"
      << model_to_json(cm.model, *g->logic, g->store) << ",\"point\":[";
  for (size_t i = 0; i < cm.point.size(); ++i) {
    if (i) out << ",";
    out << cm.point[i];
  }
  out << "]}\n";
  return 1;
}

int cmd_oracle(const options& o, std::ostream& out, std::ostream& err) {
  std::optional<goal_ctx> g;
  if (int rc = parse_goal(o, err, g)) return rc;
  enumeration_bounds b;
  b.max_worlds = o.worlds;
  b.max_atoms = o.atoms;
  auto v = consequence_bounded(g->premises, g->goal, *g->logic, b, g->store);
  if (v.holds) {
    out << "holds within bounds (worlds<=" << b.max_worlds << ", atoms<="
        << b.max_atoms << "), " << v.models_checked << " models checked\n";
    return 0;
  }
  out << "countermodel found after " << v.models_checked << " models:\n";
  out << model_to_json(v.model, *g->logic, g->store) << "\n";
  return 1;
}

// shared demo goals drive the audit samplers
std::vector<std::pair<std::vector<std::string>, std::string>> demo_goals(
    const logic_definition& lg) {
  switch (lg.kind) {
    case logic_kind::classical:
      return {{{}, "p | !p"},
              {{}, "p -> q"},
              {{"p -> q", "p"}, "q"},
              {{}, "!(p & !p)"},
              {{}, "(p & q) -> p"}};
    case logic_kind::subs:
      return {{{"p"}, "p -> !(!p & !q)"},
              {{}, "p -> p"},
              {{}, "(p & (p -> q)) -> q"},
              {{}, "p -> q"},
              {{}, "!(p & !p)"}};
    case logic_kind::kd3:
      return {{{}, "K p -> p"},
              {{}, "p | !p"},
              {{}, "<>p -> p"},
              {{}, "K (p & q) -> K p"},
              {{}, "p -> <>p"},
              {{}, "p -> (q -> p)"}};
  }
  return {};
}

struct audit_bundle {
  audit_report schema_rep;
  audit_report rules_rep;
  audit_report models_rep;
};

audit_bundle run_audits(const logic_definition& lg, const options& o,
                        formula_store& store, std::ostream* log) {
  audit_bundle out;
  limits lim = limits_of(o);
  // harvest branch samples and element sets from the demo goals
  std::vector<expr_set> sample_sets;
  std::vector<branch> open_branches;
  for (const auto& [prems, goal_text] : demo_goals(lg)) {
    std::vector<formula_id> prem_ids;
    for (const auto& s : prems) prem_ids.push_back(parse_formula(s, store));
    formula_id goal = parse_formula(goal_text, store);
    auto sat = saturate(prem_ids, goal, lg, lim, store);
    for (const branch& b : sat.branches) {
      for (const expr_set& el : b.elements()) {
        if (sample_sets.size() < 60 &&
            std::find(sample_sets.begin(), sample_sets.end(), el) ==
                sample_sets.end())
          sample_sets.push_back(el);
      }
      if (!is_b_inconsistent(b.union_set) && open_branches.size() < 25)
        open_branches.push_back(b);
    }
  }
  // a few deliberately b-inconsistent samples exercise the input gate
  {
    size_t base = sample_sets.size();
    for (size_t i = 0; i < base && i < 3; ++i) {
      expr_set bad = sample_sets[i];
      if (bad.empty()) continue;
      bad.insert(bad[0].complement());
      sample_sets.push_back(bad);
    }
  }
  if (log) *log << "audit: " << sample_sets.size() << " sample sets, "
                << open_branches.size() << " open branches\n";
  audit_options aopts;
  aopts.seed = o.seed;
  for (size_t ri = 0; ri < lg.rules.size(); ++ri) {
    match_context ctx;  // schema audit runs pair rules through recorded pairs
    if (lg.rules[ri].matcher == matcher_kind::pair_provenance) {
      for (const expr_set& x : sample_sets)
        for (const expr& e : x)
          if (e.kind == expr_kind::tagged && e.sym == sym::fsym_content &&
              !e.neg)
            for (const expr& e2 : x)
              if (e2.kind == expr_kind::tagged &&
                  e2.sym == sym::fsym_content && !e2.neg &&
                  !(e2 == e) && ctx.pairs.size() < 8)
                ctx.pairs.push_back({e.f, e2.f, e.a0, e2.a0});
    }
    auto rep = audit_rule_schema(lg.rules[ri], static_cast<int>(ri),
                                 sample_sets, lg.reserved_values, store, ctx,
                                 aopts);
    for (auto& e : rep.entries) out.schema_rep.entries.push_back(e);
  }
  enumeration_bounds b;
  b.max_worlds = o.worlds;
  b.max_atoms = o.atoms;
  int samples = 100;
  out.rules_rep =
      audit_rules_sound(lg, b, samples, o.seed, store, std::max(1, o.jobs));
  out.models_rep = audit_models_sound(lg, open_branches, store);
  return out;
}

int cmd_audit(const options& o, std::ostream& out, std::ostream& err) {
  const logic_definition* lg = find_logic(o.logic);
  if (!lg) {
    err << "unknown logic '" << o.logic << "'\n";
    return 64;
  }
  formula_store store(lg->sig);
  std::ostringstream log;
  audit_bundle rep =
      run_audits(*lg, o, store, logging_enabled() ? &err : nullptr);
  int schema_v = rep.schema_rep.violations();
  int rules_v = rep.rules_rep.violations();
  int models_v = rep.models_rep.violations();
  if (o.format == "json") {
    out << "{\"schema\":" << rep.schema_rep.to_json()
        << ",\"rule_soundness\":" << rep.rules_rep.to_json()
        << ",\"model_soundness\":" << rep.models_rep.to_json() << "}\n";
  } else {
    out << "rule-schema audit: " << schema_v << " violations over "
        << rep.schema_rep.entries.size() << " checks\n";
    out << "rule-soundness audit: " << rules_v << " violations\n";
    for (const auto& e : rep.rules_rep.entries)
      if (e.violation)
        out << "  " << e.schema << " sample " << e.sample << ": " << e.witness
            << "\n";
    out << "model-soundness audit: " << models_v << " violations\n";
  }
  if (o.expect_unsound) {
    if (rules_v > 0) {
      out << "unsoundness expected for this system: confirmed\n";
      return 0;
    }
    out << "expected rule-soundness violations were not found\n";
    return 1;
  }
  return (schema_v + rules_v + models_v) == 0 ? 0 : 1;
}

int cmd_branches(const options& o, std::ostream& out, std::ostream& err) {
  std::optional<goal_ctx> g;
  if (int rc = parse_goal(o, err, g)) return rc;
  limits lim = limits_of(o);
  auto kc = enumerate_branch_kinds(g->premises, g->goal, *g->logic, lim,
                                   g->store);
  out << "branch kinds: total=" << kc.total_kinds
      << " complete=" << kc.complete_kinds
      << " all_complete_closed=" << (kc.all_complete_closed ? "yes" : "no")
      << "\n";
  if (o.trace) {
    for (size_t i = 0; i < kc.representatives.size(); ++i) {
      out << "kind " << i << ":";
      for (const expr_set& el : kc.representatives[i].elements())
        out << "\n  " << render_set(g->store, g->logic->lang, el);
      out << "\n";
    }
  }
  if (kc.out_of_resources) {
    out << "enumeration stopped early: resource limits\n";
    return 2;
  }
  return 0;
}

int cmd_info(const options& o, std::ostream& out, std::ostream& err) {
  const logic_definition* lg = find_logic(o.logic);
  if (!lg) {
    err << "unknown logic '" << o.logic << "'\n";
    return 64;
  }
  out << "{\"name\":\"" << lg->name << "\",\"connectives\":[";
  for (size_t i = 0; i < lg->sig.connectives.size(); ++i) {
    const auto& c = lg->sig.connectives[i];
    if (i) out << ",";
    out << "{\"id\":\"" << c.id << "\",\"token\":\"" << c.token
        << "\",\"arity\":" << c.arity << "}";
  }
  out << "],\"label_symbols\":[";
  for (size_t i = 0; i < lg->lang.fsyms.size(); ++i) {
    const auto& f = lg->lang.fsyms[i];
    if (i) out << ",";
    out << "{\"name\":\"" << f.name << "\",\"arity\":" << f.arity
        << ",\"domain\":" << f.domain_index << "}";
  }
  out << "],\"predicate_symbols\":[";
  for (size_t i = 0; i < lg->lang.psyms.size(); ++i) {
    const auto& p = lg->lang.psyms[i];
    if (i) out << ",";
    out << "{\"name\":\"" << p.name << "\",\"arity\":" << p.arity
        << ",\"relation\":" << p.relation_index << "}";
  }
  out << "],\"reserved_values\":[";
  for (size_t i = 0; i < lg->lang.reserved_names.size(); ++i) {
    if (i) out << ",";
    out << "\"" << lg->lang.reserved_names[i] << "\"";
  }
  out << "],\"rules\":[";
  for (size_t i = 0; i < lg->rules.size(); ++i) {
    if (i) out << ",";
    out << "\"" << lg->rules[i].name << "\"";
  }
  out << "]}\n";
  return 0;
}

}  // namespace

int cli_run(const std::vector<std::string>& args, std::ostream& out,
            std::ostream& err) {
  CLI::App app{"tabkit: a labelled-tableau prover workbench"};
  app.require_subcommand(1);
  options o;
  auto* prove = app.add_subcommand("prove", "decide a goal by saturation");
  add_common(prove, o, true);
  auto* cm = app.add_subcommand("countermodel",
                                "extract and verify a countermodel");
  add_common(cm, o, true);
  auto* oracle =
      app.add_subcommand("oracle", "bounded semantic consequence check");
  add_common(oracle, o, true);
  auto* audit = app.add_subcommand("audit", "run the soundness audits");
  add_common(audit, o, false);
  auto* branches =
      app.add_subcommand("branches", "enumerate branch kinds exhaustively");
  add_common(branches, o, true);
  auto* info = app.add_subcommand("info", "logic metadata as JSON");
  add_common(info, o, false);

  std::vector<std::string> rev(args.rbegin(), args.rend());
  try {
    app.parse(rev);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {
      out << app.help();
      return 0;
    }
    err << e.what() << "\n";
    return 64;
  }
  try {
    if (prove->parsed()) return cmd_prove(o, out, err);
    if (cm->parsed()) return cmd_countermodel(o, out, err);
    if (oracle->parsed()) return cmd_oracle(o, out, err);
    if (audit->parsed()) return cmd_audit(o, out, err);
    if (branches->parsed()) return cmd_branches(o, out, err);
    if (info->parsed()) return cmd_info(o, out, err);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 64;
  }
  err << "no command\n";
  return 64;
}

int cli_main(int argc, const char* const* argv, std::ostream& out,
             std::ostream& err) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return cli_run(args, out, err);
}

}  // namespace tabkit
