#pragma once

#include <cstddef>
#include <vector>

#include "schemeflow/engine.hpp"
#include "schemeflow/frontend.hpp"
#include "schemeflow/model.hpp"
#include "schemeflow/result.hpp"

namespace schemeflow {

/// How If frames treat PrimVal and NumTop guards.
///  BothBranches: both kinds flow to the true and the false branch.
///  AppendixExact: PrimVal takes no branch, NumTop takes the true branch.
enum class Truthiness { BothBranches, AppendixExact };

struct AnalysisConfig {
  unsigned m = 0;
  WidenDepth widen_depth = 2;
  bool strict_appendix = false;
  Truthiness truthiness = Truthiness::BothBranches;
  std::size_t fact_ceiling = 5'000'000;

  /// Unbounded PrimVal terms and appendix-exact truthiness.
  static AnalysisConfig strict(unsigned m) {
    AnalysisConfig c;
    c.m = m;
    c.widen_depth = std::nullopt;
    c.strict_appendix = true;
    c.truthiness = Truthiness::AppendixExact;
    return c;
  }

  /// Throws std::invalid_argument on inconsistent settings.
  void validate() const;
};

/// Relations used by the rule set (input relations first).
std::vector<engine::RelationDecl> analysis_relations();

/// The full m-CFA rule set. Grouped the same way as the accessors below.
std::vector<engine::Rule> analysis_rules(const AnalysisConfig& cfg);
std::vector<engine::Rule> inject_rules();
std::vector<engine::Rule> context_rules();
std::vector<engine::Rule> freevar_rules();
std::vector<engine::Rule> eval_rules();
std::vector<engine::Rule> atomic_rules();
std::vector<engine::Rule> apply_rules(const AnalysisConfig& cfg);

/// `new_ctx` and `widen` bound to the model and configuration.
std::map<std::string, engine::TermFunction> analysis_functions(Model model,
                                                               const AnalysisConfig& cfg);

engine::RuleSet build_analysis(TermTable& terms, const AnalysisConfig& cfg);

/// Loads input facts into a store built for `rules`.
void load_edb(const Edb& edb, TermTable& terms, engine::TupleStore& store);

/// Facts, rules, saturation, canonical result. Throws
/// engine::CeilingExceeded when the fact ceiling is hit.
AnalysisResult analyze(const LabeledProgram& program, const AnalysisConfig& cfg);
AnalysisResult analyze_edb(const Edb& edb, const AnalysisConfig& cfg);

}  // namespace schemeflow
