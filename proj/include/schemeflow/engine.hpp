#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "schemeflow/frontend.hpp"
#include "schemeflow/terms.hpp"

namespace schemeflow::engine {

// --- Rule syntax ------------------------------------------------------------

/// Argument pattern of an atom: variable, wildcard, constant, or a
/// constructor pattern that builds (in heads) or destructures (in bodies).
struct Pattern {
  enum class Kind { Var, Wildcard, Symbol, Integer, Ctor };
  Kind kind = Kind::Wildcard;
  std::string text;  // variable name, symbol text or functor
  std::int64_t number = 0;
  std::vector<Pattern> args;
};

Pattern var(std::string name);
Pattern any();
Pattern sym(std::string text);
Pattern num(std::int64_t n);
Pattern ctor(std::string functor, std::vector<Pattern> args);

struct Atom {
  std::string relation;
  std::vector<Pattern> args;
};

/// `var = function(args...)`; the function may reject its inputs.
struct Assign {
  std::string var;
  std::string function;
  std::vector<Pattern> args;
};

struct NotEqual {
  Pattern lhs, rhs;
};

/// Horn clause with one or more heads sharing one body.
struct Rule {
  std::vector<Atom> heads;
  std::vector<Atom> body;
  std::vector<NotEqual> neqs;
  std::vector<Assign> assigns;

  Rule& head(std::string rel, std::vector<Pattern> args) {
    heads.push_back({std::move(rel), std::move(args)});
    return *this;
  }
  Rule& when(std::string rel, std::vector<Pattern> args) {
    body.push_back({std::move(rel), std::move(args)});
    return *this;
  }
  Rule& neq(Pattern a, Pattern b) {
    neqs.push_back({std::move(a), std::move(b)});
    return *this;
  }
  Rule& let(std::string v, std::string fn, std::vector<Pattern> args) {
    assigns.push_back({std::move(v), std::move(fn), std::move(args)});
    return *this;
  }
};

struct RelationDecl {
  std::string name;
  std::vector<ColumnKind> kinds;
};

/// Interned-term function usable from rules. Returns kNoTerm to reject.
using TermFunction = std::function<TermId(TermTable&, std::span<const TermId>)>;

class RuleError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class CeilingExceeded : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// --- Storage --------------------------------------------------------------

/// Set of fixed-arity tuples with hash indexes over column subsets.
/// Rows are append-only and keep their insertion index, which the
/// evaluator uses to address delta ranges.
class Relation {
 public:
  Relation(std::string name, std::size_t arity);

  const std::string& name() const { return name_; }
  std::size_t arity() const { return arity_; }
  std::size_t size() const { return rows_; }
  std::span<const TermId> row(std::size_t i) const {
    return {data_.data() + i * arity_, arity_};
  }

  bool insert(std::span<const TermId> tuple);
  bool contains(std::span<const TermId> tuple) const;

  /// Rows whose masked columns hash to `key_hash` (callers re-check values).
  const std::vector<std::uint32_t>* postings(std::uint32_t mask, std::uint64_t key_hash) const;
  void ensure_index(std::uint32_t mask);

  static std::uint64_t key_hash(std::uint32_t mask, std::span<const TermId> values_by_column);

 private:
  struct Index {
    std::uint32_t mask;
    std::unordered_map<std::uint64_t, std::vector<std::uint32_t>> postings;
  };
  std::uint64_t row_hash(std::span<const TermId> tuple) const;
  void index_row(Index& idx, std::uint32_t row);

  std::string name_;
  std::size_t arity_;
  std::size_t rows_ = 0;
  std::vector<TermId> data_;
  IdHashTable set_;
  std::vector<Index> indexes_;
};

class TupleStore {
 public:
  TupleStore() = default;
  explicit TupleStore(const std::vector<RelationDecl>& decls);

  bool has(std::string_view name) const { return ids_.contains(std::string(name)); }
  std::size_t id(std::string_view name) const;
  Relation& relation(std::size_t id) { return relations_[id]; }
  const Relation& relation(std::size_t id) const { return relations_[id]; }
  Relation& relation(std::string_view name) { return relations_[id(name)]; }
  const Relation& relation(std::string_view name) const { return relations_[id(name)]; }
  std::size_t relation_count() const { return relations_.size(); }

  bool insert(std::string_view name, std::span<const TermId> tuple) {
    return relation(name).insert(tuple);
  }
  bool insert(std::string_view name, std::initializer_list<TermId> tuple) {
    return relation(name).insert(std::span<const TermId>(tuple.begin(), tuple.size()));
  }
  std::size_t total_facts() const;

 private:
  std::vector<Relation> relations_;
  std::unordered_map<std::string, std::size_t> ids_;
};

/// Rows of `relation` whose leading columns equal `bound_prefix`, sorted by
/// their canonical rendering. Throws RuleError for unknown relations.
std::vector<std::vector<TermId>> query(const TupleStore& store, const TermTable& terms,
                                       std::string_view relation,
                                       std::span<const TermId> bound_prefix = {});

/// Canonical text lines (tab-separated rendered columns), sorted.
std::vector<std::string> canonical_lines(const TupleStore& store, const TermTable& terms,
                                         std::string_view relation);

// --- Evaluation -----------------------------------------------------------

struct SaturateOptions {
  std::size_t fact_ceiling = 5'000'000;
  bool naive = false;
};

struct SaturateStats {
  std::size_t rounds = 0;
  std::size_t facts = 0;
};

struct CompiledRule;

/// Validated and compiled rule set, stratified by relation dependencies.
class RuleSet {
 public:
  RuleSet(RuleSet&&) noexcept;
  RuleSet& operator=(RuleSet&&) noexcept;
  ~RuleSet();

  const std::vector<RelationDecl>& relations() const { return decls_; }
  /// Relation names per stratum, lowest stratum first.
  std::vector<std::vector<std::string>> strata() const;
  std::size_t rule_count() const;

  TupleStore make_store() const { return TupleStore(decls_); }

  /// Datalog-like listing of every rule.
  std::string dump() const;

 private:
  RuleSet();
  friend RuleSet build_ruleset(TermTable&, std::vector<RelationDecl>, std::vector<Rule>,
                               std::map<std::string, TermFunction>);
  friend TupleStore saturate(const RuleSet&, TermTable&, TupleStore, const SaturateOptions&,
                             SaturateStats*);

  std::vector<RelationDecl> decls_;
  std::vector<Rule> source_;
  std::vector<std::unique_ptr<CompiledRule>> rules_;
  std::vector<std::vector<std::size_t>> strata_;        // relation ids
  std::vector<std::vector<std::size_t>> stratum_rules_;  // rule indices
  std::map<std::string, TermFunction> functions_;
};

/// Validates atoms against the declarations, checks range restriction and
/// computes strata. Throws RuleError.
RuleSet build_ruleset(TermTable& terms, std::vector<RelationDecl> relations,
                      std::vector<Rule> rules,
                      std::map<std::string, TermFunction> functions = {});

/// Least fixpoint of `rules` over `edb`. Semi-naive unless opts.naive.
/// Throws CeilingExceeded when the store would grow past opts.fact_ceiling.
TupleStore saturate(const RuleSet& rules, TermTable& terms, TupleStore edb,
                    const SaturateOptions& opts = {}, SaturateStats* stats = nullptr);

std::string to_string(const Pattern& p);

}  // namespace schemeflow::engine
