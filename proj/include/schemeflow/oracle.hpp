#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <ostream>
#include <string>
#include <tuple>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "schemeflow/analysis.hpp"
#include "schemeflow/frontend.hpp"
#include "schemeflow/model.hpp"
#include "schemeflow/result.hpp"

namespace schemeflow::oracle {

/// Eval(e, ctx, ak) or Apply(v, ak).
struct Config {
  enum class Kind : std::uint8_t { Eval, Apply };
  Kind kind = Kind::Eval;
  TermId a = kNoTerm;  // Eval: expression label; Apply: value
  TermId b = kNoTerm;  // Eval: context; Apply: continuation address
  TermId c = kNoTerm;  // Eval: continuation address

  static Config eval(TermId e, TermId ctx, TermId ak) { return {Kind::Eval, e, ctx, ak}; }
  static Config apply(TermId v, TermId ak) { return {Kind::Apply, v, ak, kNoTerm}; }
  bool operator==(const Config&) const = default;
};

struct ConfigHash {
  std::size_t operator()(const Config& c) const {
    return mix_hash(mix_hash(mix_hash(static_cast<std::uint64_t>(c.kind), c.a), c.b), c.c);
  }
};

/// Everything one transition adds. Flow and context tuples are recorded
/// so the result matches the rule-based path relation for relation.
struct StepResult {
  std::vector<Config> successors;
  std::vector<std::pair<TermId, TermId>> vals;   // (VAddress, value)
  std::vector<std::pair<TermId, TermId>> konts;  // (KAddress, frame)
  std::vector<std::tuple<TermId, TermId, TermId>> copies;  // (from, to, lambda/let label)
  std::vector<std::tuple<TermId, TermId, TermId>> peeks;   // (label, ctx, new ctx)
  std::vector<std::pair<TermId, TermId>> flow_ee, flow_ea, flow_aa, flow_ae;
  std::vector<std::string> rules;  // names of the transitions taken
  std::optional<TermId> read_vaddr;  // store cell the step depended on
  std::optional<TermId> read_kaddr;
  std::size_t consumed = 0;  // entries of that cell seen by this step
};

/// Global value and continuation stores. Copy edges forward every value
/// that reaches their source address to their target address.
class GlobalStore {
 public:
  const std::vector<TermId>& values(TermId vaddr) const;
  const std::vector<TermId>& konts(TermId kaddr) const;

  /// Joins `v` into `vaddr` and along copy edges. Returns every address
  /// that grew.
  std::vector<TermId> join_value(TermId vaddr, TermId v);
  bool join_kont(TermId kaddr, TermId k);
  /// Adds a copy edge; returns addresses that grew as a consequence.
  std::vector<TermId> add_copy_edge(TermId from, TermId to);

  std::size_t value_count() const { return value_set_.size(); }
  std::size_t kont_count() const { return kont_set_.size(); }

  std::vector<std::pair<TermId, TermId>> value_tuples() const;
  std::vector<std::pair<TermId, TermId>> kont_tuples() const;

 private:
  static std::uint64_t key(TermId a, TermId b) { return (std::uint64_t{a} << 32) | b; }

  std::unordered_map<TermId, std::vector<TermId>> vstore_, kstore_;
  std::unordered_set<std::uint64_t> value_set_, kont_set_, edge_set_;
  std::unordered_map<TermId, std::vector<TermId>> edges_;
};

/// The transition function over one program and configuration.
class Machine {
 public:
  Machine(const LabeledProgram& program, const AnalysisConfig& cfg, TermTable& terms);

  Model& model() { return model_; }
  const LabeledProgram& program() const { return *program_; }

  Config initial();
  /// Peek tuple emitted by injection.
  std::tuple<TermId, TermId, TermId> initial_peek();

  /// Values of an atomic expression. Throws std::invalid_argument otherwise.
  std::vector<TermId> atomic_eval(TermId e, TermId ctx, const GlobalStore& store);
  /// All transitions from `c`. Entries of the cell it reads below `skip`
  /// are assumed handled by an earlier step and ignored.
  StepResult step(const Config& c, const GlobalStore& store, std::size_t skip = 0);

  /// Free variables of a lambda or let label (the syntactic relation).
  const std::vector<TermId>& free_vars(TermId e) const;
  std::vector<std::pair<TermId, TermId>> freevar_tuples() const;

  std::string render(const Config& c) const;

 private:
  std::optional<std::uint32_t> label_index(TermId t) const;
  const Node& node_of(TermId e) const;
  TermId label_term(Label l) const { return label_terms_[l.index]; }
  bool truthy(TermId v) const;
  bool falsy(TermId v) const;

  void step_eval(TermId e, TermId ctx, TermId ak, const GlobalStore& store, std::size_t skip,
                 StepResult& out);
  void step_apply(TermId v, TermId ak, TermId k, StepResult& out);
  void enter_lambda(TermId v, TermId closure, std::int64_t pos, TermId ectx, TermId next,
                    TermId kont_value, const char* rule, StepResult& out);

  const LabeledProgram* program_;
  AnalysisConfig cfg_;
  Model model_;
  std::vector<TermId> label_terms_;
  std::unordered_map<TermId, std::uint32_t> label_of_;
  std::vector<std::vector<TermId>> free_vars_;
  std::vector<TermId> name_terms_;  // per Var/SetBang node
  TermId true_ = kNoTerm, false_ = kNoTerm;
};

struct OracleOptions {
  std::size_t fact_ceiling = 5'000'000;
  std::ostream* trace = nullptr;
  /// When set, the worklist is drained in a seeded random order instead of FIFO.
  std::optional<std::uint64_t> shuffle_seed;
};

/// Worklist fixpoint from the injected configuration. Throws
/// engine::CeilingExceeded when configurations plus store entries exceed
/// the ceiling.
AnalysisResult run_fixpoint(const LabeledProgram& program, const AnalysisConfig& cfg,
                            const OracleOptions& opts = {});

}  // namespace schemeflow::oracle
