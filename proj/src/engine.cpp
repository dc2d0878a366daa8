#include "schemeflow/engine.hpp"

#include <algorithm>
#include <bit>
#include <optional>
#include <functional>
#include <set>
#include <sstream>

namespace schemeflow::engine {

Pattern var(std::string name) { return {Pattern::Kind::Var, std::move(name), 0, {}}; }
Pattern any() { return {Pattern::Kind::Wildcard, "_", 0, {}}; }
Pattern sym(std::string text) { return {Pattern::Kind::Symbol, std::move(text), 0, {}}; }
Pattern num(std::int64_t n) { return {Pattern::Kind::Integer, {}, n, {}}; }
Pattern ctor(std::string functor, std::vector<Pattern> args) {
  return {Pattern::Kind::Ctor, std::move(functor), 0, std::move(args)};
}

std::string to_string(const Pattern& p) {
  switch (p.kind) {
    case Pattern::Kind::Var:
    case Pattern::Kind::Wildcard:
      return p.text;
    case Pattern::Kind::Symbol: {
      std::string out = "\"";
      out += p.text;
      return out + "\"";
    }
    case Pattern::Kind::Integer:
      return std::to_string(p.number);
    case Pattern::Kind::Ctor: {
      std::string out = "$" + p.text + "(";
      for (std::size_t i = 0; i < p.args.size(); ++i) {
        if (i) out += ", ";
        out += to_string(p.args[i]);
      }
      return out + ")";
    }
  }
  return "?";
}

// --- Relation ---------------------------------------------------------------

Relation::Relation(std::string name, std::size_t arity) : name_(std::move(name)), arity_(arity) {}

std::uint64_t Relation::row_hash(std::span<const TermId> tuple) const {
  std::uint64_t h = 0x7f4a7c15u;
  for (TermId t : tuple) h = mix_hash(h, t);
  return h;
}

std::uint64_t Relation::key_hash(std::uint32_t mask, std::span<const TermId> values) {
  std::uint64_t h = mix_hash(0x2545f491u, mask);
  for (std::size_t c = 0; c < values.size(); ++c) {
    if (mask & (1u << c)) h = mix_hash(h, values[c]);
  }
  return h;
}

bool Relation::contains(std::span<const TermId> tuple) const {
  return set_.find(row_hash(tuple), [&](std::uint32_t r) {
           return std::equal(tuple.begin(), tuple.end(), data_.begin() + r * arity_);
         }) != kNoTerm;
}

bool Relation::insert(std::span<const TermId> tuple) {
  if (tuple.size() != arity_) throw RuleError("arity mismatch inserting into " + name_);
  const std::uint64_t h = row_hash(tuple);
  auto eq = [&](std::uint32_t r) {
    return std::equal(tuple.begin(), tuple.end(), data_.begin() + r * arity_);
  };
  if (set_.find(h, eq) != kNoTerm) return false;
  const auto r = static_cast<std::uint32_t>(rows_++);
  data_.insert(data_.end(), tuple.begin(), tuple.end());
  set_.insert(h, r);
  for (Index& idx : indexes_) index_row(idx, r);
  return true;
}

void Relation::index_row(Index& idx, std::uint32_t r) {
  idx.postings[key_hash(idx.mask, row(r))].push_back(r);
}

void Relation::ensure_index(std::uint32_t mask) {
  if (mask == 0) return;
  for (const Index& idx : indexes_) {
    if (idx.mask == mask) return;
  }
  indexes_.push_back(Index{mask, {}});
  for (std::uint32_t r = 0; r < rows_; ++r) index_row(indexes_.back(), r);
}

const std::vector<std::uint32_t>* Relation::postings(std::uint32_t mask,
                                                      std::uint64_t key_hash) const {
  for (const Index& idx : indexes_) {
    if (idx.mask != mask) continue;
    auto it = idx.postings.find(key_hash);
    return it == idx.postings.end() ? nullptr : &it->second;
  }
  throw RuleError("missing index on " + name_);
}

// --- TupleStore ---------------------------------------------------------------

TupleStore::TupleStore(const std::vector<RelationDecl>& decls) {
  for (const RelationDecl& d : decls) {
    ids_.emplace(d.name, relations_.size());
    relations_.emplace_back(d.name, d.kinds.size());
  }
}

std::size_t TupleStore::id(std::string_view name) const {
  auto it = ids_.find(std::string(name));
  if (it == ids_.end()) throw RuleError("unknown relation '" + std::string(name) + "'");
  return it->second;
}

std::size_t TupleStore::total_facts() const {
  std::size_t n = 0;
  for (const Relation& r : relations_) n += r.size();
  return n;
}

std::vector<std::vector<TermId>> query(const TupleStore& store, const TermTable& terms,
                                       std::string_view relation,
                                       std::span<const TermId> bound_prefix) {
  const Relation& rel = store.relation(relation);
  if (bound_prefix.size() > rel.arity()) throw RuleError("prefix longer than relation arity");
  std::vector<std::pair<std::string, std::vector<TermId>>> rows;
  for (std::size_t r = 0; r < rel.size(); ++r) {
    auto row = rel.row(r);
    if (!std::equal(bound_prefix.begin(), bound_prefix.end(), row.begin())) continue;
    std::string key;
    for (std::size_t c = 0; c < row.size(); ++c) {
      if (c) key.push_back('\t');
      terms.render_to(key, row[c]);
    }
    rows.emplace_back(std::move(key), std::vector<TermId>(row.begin(), row.end()));
  }
  std::sort(rows.begin(), rows.end());
  std::vector<std::vector<TermId>> out;
  out.reserve(rows.size());
  for (auto& [_, t] : rows) out.push_back(std::move(t));
  return out;
}

std::vector<std::string> canonical_lines(const TupleStore& store, const TermTable& terms,
                                         std::string_view relation) {
  const Relation& rel = store.relation(relation);
  std::vector<std::string> lines;
  lines.reserve(rel.size());
  for (std::size_t r = 0; r < rel.size(); ++r) {
    std::string line;
    auto row = rel.row(r);
    for (std::size_t c = 0; c < row.size(); ++c) {
      if (c) line.push_back('\t');
      terms.render_to(line, row[c]);
    }
    lines.push_back(std::move(line));
  }
  std::sort(lines.begin(), lines.end());
  return lines;
}

// --- Compilation ----------------------------------------------------------------

namespace {

// Pattern with variables resolved to slots and constants interned.
struct RPat {
  enum class Kind : std::uint8_t { Var, Wildcard, Const, Ctor };
  Kind kind = Kind::Wildcard;
  std::uint32_t var = 0;
  TermId value = kNoTerm;  // constant, or functor symbol for Ctor
  std::vector<RPat> args;
};

// Pattern specialised for one plan step.
struct MPat {
  enum class Kind : std::uint8_t { Skip, Bind, Check, Const, Wildcard, Ctor };
  Kind kind = Kind::Skip;
  std::uint32_t var = 0;
  TermId value = kNoTerm;
  std::vector<MPat> args;
};

struct RAtom {
  std::size_t rel = 0;
  std::vector<RPat> cols;
};

struct RAssign {
  std::uint32_t var = 0;
  const TermFunction* fn = nullptr;
  std::vector<RPat> args;
};

struct RNeq {
  RPat lhs, rhs;
};

struct Step {
  enum class Kind : std::uint8_t { Scan, Assign, Neq };
  Kind kind = Kind::Scan;
  std::size_t index = 0;  // body atom, assign or neq
  bool delta = false;
  bool bind = false;  // Assign: target unbound before the step
  std::uint32_t mask = 0;
  std::vector<MPat> cols;
};

using Plan = std::vector<Step>;

}  // namespace

struct CompiledRule {
  std::vector<RAtom> heads;
  std::vector<RAtom> body;
  std::vector<RAssign> assigns;
  std::vector<RNeq> neqs;
  std::uint32_t nvars = 0;
  Plan full;
  std::vector<Plan> delta;  // one per body atom
};

namespace {

void collect_vars(const RPat& p, std::set<std::uint32_t>& out) {
  if (p.kind == RPat::Kind::Var) out.insert(p.var);
  for (const RPat& a : p.args) collect_vars(a, out);
}

bool groundable(const RPat& p, const std::vector<bool>& bound) {
  switch (p.kind) {
    case RPat::Kind::Var: return bound[p.var];
    case RPat::Kind::Wildcard: return false;
    case RPat::Kind::Const: return true;
    case RPat::Kind::Ctor:
      return std::all_of(p.args.begin(), p.args.end(),
                         [&](const RPat& a) { return groundable(a, bound); });
  }
  return false;
}

MPat specialise(const RPat& p, std::vector<bool>& bound) {
  MPat m;
  switch (p.kind) {
    case RPat::Kind::Var:
      m.var = p.var;
      m.kind = bound[p.var] ? MPat::Kind::Check : MPat::Kind::Bind;
      bound[p.var] = true;
      break;
    case RPat::Kind::Wildcard:
      m.kind = MPat::Kind::Wildcard;
      break;
    case RPat::Kind::Const:
      m.kind = MPat::Kind::Const;
      m.value = p.value;
      break;
    case RPat::Kind::Ctor:
      m.kind = MPat::Kind::Ctor;
      m.value = p.value;
      for (const RPat& a : p.args) m.args.push_back(specialise(a, bound));
      break;
  }
  return m;
}

class Compiler {
 public:
  Compiler(TermTable& terms, const std::vector<RelationDecl>& decls,
           const std::map<std::string, TermFunction>& fns)
      : terms_(terms), decls_(decls), fns_(fns) {
    for (std::size_t i = 0; i < decls.size(); ++i) rel_ids_.emplace(decls[i].name, i);
  }

  std::unique_ptr<CompiledRule> compile(const Rule& rule, std::size_t rule_no) {
    vars_.clear();
    auto cr = std::make_unique<CompiledRule>();
    const std::string where = "rule #" + std::to_string(rule_no);
    if (rule.heads.empty()) throw RuleError(where + ": no head atom");
    if (rule.body.empty()) throw RuleError(where + ": no body atom");
    for (const Atom& a : rule.body) cr->body.push_back(atom(a, where, false));
    for (const Assign& a : rule.assigns) {
      auto it = fns_.find(a.function);
      if (it == fns_.end()) throw RuleError(where + ": unknown function '" + a.function + "'");
      RAssign ra;
      ra.var = slot(a.var);
      ra.fn = &it->second;
      for (const Pattern& p : a.args) ra.args.push_back(pat(p, where, false));
      cr->assigns.push_back(std::move(ra));
    }
    for (const NotEqual& n : rule.neqs) {
      cr->neqs.push_back({pat(n.lhs, where, false), pat(n.rhs, where, false)});
    }
    for (const Atom& a : rule.heads) cr->heads.push_back(atom(a, where, true));
    cr->nvars = static_cast<std::uint32_t>(vars_.size());

    // Range restriction: vars bound by body atoms, then by assignments whose
    // inputs are bound.
    std::vector<bool> bound(cr->nvars, false);
    for (const RAtom& a : cr->body) {
      std::set<std::uint32_t> vs;
      for (const RPat& p : a.cols) collect_vars(p, vs);
      for (auto v : vs) bound[v] = true;
    }
    for (bool changed = true; changed;) {
      changed = false;
      for (const RAssign& a : cr->assigns) {
        if (!bound[a.var] && std::all_of(a.args.begin(), a.args.end(),
                                         [&](const RPat& p) { return groundable(p, bound); })) {
          bound[a.var] = true;
          changed = true;
        }
      }
    }
    auto require = [&](const RPat& p, const char* what) {
      std::set<std::uint32_t> vs;
      collect_vars(p, vs);
      for (auto v : vs) {
        if (!bound[v]) throw RuleError(where + ": unbound " + what + " variable '" + names_[v] + "'");
      }
    };
    for (const RAtom& h : cr->heads) {
      for (const RPat& p : h.cols) require(p, "head");
    }
    for (const RNeq& n : cr->neqs) {
      require(n.lhs, "constraint");
      require(n.rhs, "constraint");
    }
    for (const RAssign& a : cr->assigns) {
      for (const RPat& p : a.args) require(p, "function argument");
    }

    cr->full = plan(*cr, std::nullopt);
    for (std::size_t i = 0; i < cr->body.size(); ++i) cr->delta.push_back(plan(*cr, i));
    return cr;
  }

  std::size_t rel_id(const std::string& name) const { return rel_ids_.at(name); }

 private:
  std::uint32_t slot(const std::string& name) {
    auto it = vars_.find(name);
    if (it != vars_.end()) return it->second;
    auto s = static_cast<std::uint32_t>(vars_.size());
    vars_.emplace(name, s);
    if (names_.size() <= s) names_.resize(s + 1);
    names_[s] = name;
    return s;
  }

  RPat pat(const Pattern& p, const std::string& where, bool in_head) {
    RPat r;
    switch (p.kind) {
      case Pattern::Kind::Var:
        if (p.text == "_") return pat(any(), where, in_head);
        r.kind = RPat::Kind::Var;
        r.var = slot(p.text);
        break;
      case Pattern::Kind::Wildcard:
        if (in_head) throw RuleError(where + ": wildcard in head");
        r.kind = RPat::Kind::Wildcard;
        break;
      case Pattern::Kind::Symbol:
        r.kind = RPat::Kind::Const;
        r.value = terms_.symbol(p.text);
        break;
      case Pattern::Kind::Integer:
        r.kind = RPat::Kind::Const;
        r.value = terms_.integer(p.number);
        break;
      case Pattern::Kind::Ctor:
        r.kind = RPat::Kind::Ctor;
        r.value = terms_.symbol(p.text);
        for (const Pattern& a : p.args) r.args.push_back(pat(a, where, in_head));
        break;
    }
    return r;
  }

  RAtom atom(const Atom& a, const std::string& where, bool in_head) {
    auto it = rel_ids_.find(a.relation);
    if (it == rel_ids_.end()) throw RuleError(where + ": unknown relation '" + a.relation + "'");
    const RelationDecl& d = decls_[it->second];
    if (a.args.size() != d.kinds.size()) {
      throw RuleError(where + ": arity mismatch for '" + a.relation + "' (expected " +
                      std::to_string(d.kinds.size()) + ", got " + std::to_string(a.args.size()) +
                      ")");
    }
    if (a.args.size() > 31) throw RuleError(where + ": relation arity above 31");
    RAtom r;
    r.rel = it->second;
    for (const Pattern& p : a.args) r.cols.push_back(pat(p, where, in_head));
    return r;
  }

  static std::uint32_t key_mask(const RAtom& a, const std::vector<bool>& bound) {
    std::uint32_t mask = 0;
    for (std::size_t c = 0; c < a.cols.size(); ++c) {
      if (groundable(a.cols[c], bound)) mask |= 1u << c;
    }
    return mask;
  }

  static Step scan_step(const RAtom& a, std::size_t index, bool delta, std::vector<bool>& bound) {
    Step s;
    s.kind = Step::Kind::Scan;
    s.index = index;
    s.delta = delta;
    s.mask = key_mask(a, bound);
    for (std::size_t c = 0; c < a.cols.size(); ++c) {
      if (s.mask & (1u << c)) {
        s.cols.push_back(MPat{});  // verified through the key
      } else {
        s.cols.push_back(specialise(a.cols[c], bound));
      }
    }
    return s;
  }

  Plan plan(const CompiledRule& cr, std::optional<std::size_t> delta) {
    Plan out;
    std::vector<bool> bound(cr.nvars, false);
    std::vector<bool> used(cr.body.size(), false);
    std::vector<bool> assign_done(cr.assigns.size(), false);
    std::vector<bool> neq_done(cr.neqs.size(), false);

    auto place_ready = [&] {
      for (bool changed = true; changed;) {
        changed = false;
        for (std::size_t i = 0; i < cr.assigns.size(); ++i) {
          const RAssign& a = cr.assigns[i];
          if (assign_done[i]) continue;
          if (!std::all_of(a.args.begin(), a.args.end(),
                           [&](const RPat& p) { return groundable(p, bound); })) {
            continue;
          }
          Step s;
          s.kind = Step::Kind::Assign;
          s.index = i;
          s.bind = !bound[a.var];
          bound[a.var] = true;
          assign_done[i] = true;
          out.push_back(std::move(s));
          changed = true;
        }
      }
      for (std::size_t i = 0; i < cr.neqs.size(); ++i) {
        if (!neq_done[i] && groundable(cr.neqs[i].lhs, bound) &&
            groundable(cr.neqs[i].rhs, bound)) {
          Step s;
          s.kind = Step::Kind::Neq;
          s.index = i;
          neq_done[i] = true;
          out.push_back(std::move(s));
        }
      }
    };

    place_ready();
    if (delta) {
      used[*delta] = true;
      out.push_back(scan_step(cr.body[*delta], *delta, true, bound));
      place_ready();
    }
    for (;;) {
      std::optional<std::size_t> best;
      int best_score = -1;
      for (std::size_t i = 0; i < cr.body.size(); ++i) {
        if (used[i]) continue;
        int score = std::popcount(key_mask(cr.body[i], bound));
        if (score > best_score) {
          best_score = score;
          best = i;
        }
      }
      if (!best) break;
      used[*best] = true;
      out.push_back(scan_step(cr.body[*best], *best, false, bound));
      place_ready();
    }
    return out;
  }

  TermTable& terms_;
  const std::vector<RelationDecl>& decls_;
  const std::map<std::string, TermFunction>& fns_;
  std::unordered_map<std::string, std::size_t> rel_ids_;
  std::unordered_map<std::string, std::uint32_t> vars_;
  std::vector<std::string> names_;
};

// Tarjan SCC over the relation dependency graph; emits SCCs so that every
// SCC comes after the SCCs it depends on.
std::vector<std::vector<std::size_t>> strongly_connected(
    const std::vector<std::set<std::size_t>>& succ) {
  const std::size_t n = succ.size();
  std::vector<int> index(n, -1), low(n, 0);
  std::vector<bool> on_stack(n, false);
  std::vector<std::size_t> stack;
  std::vector<std::vector<std::size_t>> out;
  int counter = 0;
  std::function<void(std::size_t)> visit = [&](std::size_t v) {
    index[v] = low[v] = counter++;
    stack.push_back(v);
    on_stack[v] = true;
    for (std::size_t w : succ[v]) {
      if (index[w] < 0) {
        visit(w);
        low[v] = std::min(low[v], low[w]);
      } else if (on_stack[w]) {
        low[v] = std::min(low[v], index[w]);
      }
    }
    if (low[v] == index[v]) {
      std::vector<std::size_t> comp;
      std::size_t w;
      do {
        w = stack.back();
        stack.pop_back();
        on_stack[w] = false;
        comp.push_back(w);
      } while (w != v);
      std::sort(comp.begin(), comp.end());
      out.push_back(std::move(comp));
    }
  };
  for (std::size_t v = 0; v < n; ++v) {
    if (index[v] < 0) visit(v);
  }
  // Edges point from dependents to dependencies, so Tarjan's completion
  // order already lists dependencies first.
  return out;
}

}  // namespace

RuleSet::RuleSet() = default;
RuleSet::RuleSet(RuleSet&&) noexcept = default;
RuleSet& RuleSet::operator=(RuleSet&&) noexcept = default;
RuleSet::~RuleSet() = default;

std::size_t RuleSet::rule_count() const { return rules_.size(); }

std::vector<std::vector<std::string>> RuleSet::strata() const {
  std::vector<std::vector<std::string>> out;
  for (const auto& s : strata_) {
    std::vector<std::string> names;
    for (std::size_t r : s) names.push_back(decls_[r].name);
    out.push_back(std::move(names));
  }
  return out;
}

std::string RuleSet::dump() const {
  std::ostringstream out;
  auto atom = [&](const Atom& a) {
    out << a.relation << "(";
    for (std::size_t i = 0; i < a.args.size(); ++i) out << (i ? ", " : "") << to_string(a.args[i]);
    out << ")";
  };
  for (const Rule& r : source_) {
    for (std::size_t i = 0; i < r.heads.size(); ++i) {
      if (i) out << ",\n";
      atom(r.heads[i]);
    }
    out << " :-\n";
    bool first = true;
    auto sep = [&] {
      out << (first ? "    " : ",\n    ");
      first = false;
    };
    for (const Atom& a : r.body) {
      sep();
      atom(a);
    }
    for (const Assign& a : r.assigns) {
      sep();
      out << a.var << " = @" << a.function << "(";
      for (std::size_t i = 0; i < a.args.size(); ++i) out << (i ? ", " : "") << to_string(a.args[i]);
      out << ")";
    }
    for (const NotEqual& n : r.neqs) {
      sep();
      out << to_string(n.lhs) << " != " << to_string(n.rhs);
    }
    out << ".\n\n";
  }
  return out.str();
}

RuleSet build_ruleset(TermTable& terms, std::vector<RelationDecl> relations,
                      std::vector<Rule> rules, std::map<std::string, TermFunction> functions) {
  RuleSet rs;
  std::set<std::string> seen;
  for (const RelationDecl& d : relations) {
    if (d.kinds.empty()) throw RuleError("relation '" + d.name + "' has arity 0");
    if (!seen.insert(d.name).second) throw RuleError("duplicate relation '" + d.name + "'");
  }
  rs.decls_ = std::move(relations);
  rs.functions_ = std::move(functions);
  rs.source_ = std::move(rules);

  Compiler compiler(terms, rs.decls_, rs.functions_);
  for (std::size_t i = 0; i < rs.source_.size(); ++i) {
    rs.rules_.push_back(compiler.compile(rs.source_[i], i));
  }

  // head depends on body; heads of one rule depend on each other.
  std::vector<std::set<std::size_t>> deps(rs.decls_.size());
  std::vector<bool> derived(rs.decls_.size(), false);
  for (const auto& cr : rs.rules_) {
    for (const RAtom& h : cr->heads) {
      derived[h.rel] = true;
      for (const RAtom& b : cr->body) deps[h.rel].insert(b.rel);
      for (const RAtom& h2 : cr->heads) {
        if (h2.rel != h.rel) deps[h.rel].insert(h2.rel);
      }
    }
  }
  std::vector<std::size_t> stratum_of(rs.decls_.size(), 0);
  for (auto& comp : strongly_connected(deps)) {
    if (!std::any_of(comp.begin(), comp.end(), [&](std::size_t r) { return derived[r]; })) {
      continue;  // input-only
    }
    for (std::size_t r : comp) stratum_of[r] = rs.strata_.size();
    rs.strata_.push_back(std::move(comp));
  }
  rs.stratum_rules_.resize(rs.strata_.size());
  for (std::size_t i = 0; i < rs.rules_.size(); ++i) {
    rs.stratum_rules_[stratum_of[rs.rules_[i]->heads[0].rel]].push_back(i);
  }
  return rs;
}

// --- Evaluation -----------------------------------------------------------------

namespace {

class Evaluator {
 public:
  Evaluator(TermTable& terms, TupleStore& store, const SaturateOptions& opts)
      : terms_(terms), store_(store), opts_(opts) {
    for (std::size_t i = 0; i < store.relation_count(); ++i) {
      pending_.emplace_back(store.relation(i).name(), store.relation(i).arity());
    }
    delta_.assign(store.relation_count(), {0, 0});
  }

  void prepare(const CompiledRule& cr) {
    auto need = [&](const Plan& p) {
      for (const Step& s : p) {
        if (s.kind == Step::Kind::Scan && !s.delta) {
          store_.relation(cr.body[s.index].rel).ensure_index(s.mask);
        }
      }
    };
    need(cr.full);
    for (const Plan& p : cr.delta) need(p);
  }

  void evaluate(const CompiledRule& cr, const Plan& plan) {
    rule_ = &cr;
    plan_ = &plan;
    env_.assign(cr.nvars, kNoTerm);
    run(0);
  }

  /// Moves pending tuples into the store; returns how many were new and
  /// records them as the next delta.
  std::size_t commit() {
    std::size_t added = 0;
    for (std::size_t i = 0; i < pending_.size(); ++i) {
      Relation& main = store_.relation(i);
      Relation& next = pending_[i];
      const std::size_t before = main.size();
      for (std::size_t r = 0; r < next.size(); ++r) main.insert(next.row(r));
      delta_[i] = {before, main.size()};
      added += main.size() - before;
      if (next.size() > 0) next = Relation(main.name(), main.arity());
    }
    pending_count_ = 0;
    return added;
  }

  bool has_delta(std::size_t rel) const { return delta_[rel].second > delta_[rel].first; }

 private:
  TermId ground(const RPat& p) {
    switch (p.kind) {
      case RPat::Kind::Var: return env_[p.var];
      case RPat::Kind::Const: return p.value;
      case RPat::Kind::Wildcard: return kNoTerm;
      case RPat::Kind::Ctor: {
        TermId buf[16];
        std::vector<TermId> big;
        TermId* args = buf;
        if (p.args.size() > 16) {
          big.resize(p.args.size());
          args = big.data();
        }
        for (std::size_t i = 0; i < p.args.size(); ++i) {
          args[i] = ground(p.args[i]);
          if (args[i] == kNoTerm) return kNoTerm;
        }
        return terms_.find_ctor(p.value, std::span<const TermId>(args, p.args.size()));
      }
    }
    return kNoTerm;
  }

  TermId build(const RPat& p) {
    switch (p.kind) {
      case RPat::Kind::Var: return env_[p.var];
      case RPat::Kind::Const: return p.value;
      case RPat::Kind::Wildcard: return kNoTerm;
      case RPat::Kind::Ctor: {
        std::vector<TermId> args;
        args.reserve(p.args.size());
        for (const RPat& a : p.args) args.push_back(build(a));
        return terms_.ctor(p.value, args);
      }
    }
    return kNoTerm;
  }

  bool match(const MPat& m, TermId t) {
    switch (m.kind) {
      case MPat::Kind::Skip:
      case MPat::Kind::Wildcard:
        return true;
      case MPat::Kind::Bind:
        env_[m.var] = t;
        return true;
      case MPat::Kind::Check:
        return env_[m.var] == t;
      case MPat::Kind::Const:
        return m.value == t;
      case MPat::Kind::Ctor: {
        if (terms_.kind(t) != TermKind::Ctor || terms_.functor(t) != m.value) return false;
        auto args = terms_.args(t);
        if (args.size() != m.args.size()) return false;
        for (std::size_t i = 0; i < args.size(); ++i) {
          if (!match(m.args[i], args[i])) return false;
        }
        return true;
      }
    }
    return false;
  }

  void run(std::size_t k) {
    if (k == plan_->size()) {
      emit();
      return;
    }
    const Step& s = (*plan_)[k];
    switch (s.kind) {
      case Step::Kind::Assign: {
        const RAssign& a = rule_->assigns[s.index];
        std::vector<TermId> args;
        for (const RPat& p : a.args) {
          TermId v = build(p);
          if (v == kNoTerm) return;
          args.push_back(v);
        }
        TermId r = (*a.fn)(terms_, args);
        if (r == kNoTerm) return;
        if (s.bind) {
          env_[a.var] = r;
        } else if (env_[a.var] != r) {
          return;
        }
        run(k + 1);
        return;
      }
      case Step::Kind::Neq: {
        const RNeq& n = rule_->neqs[s.index];
        if (ground(n.lhs) == ground(n.rhs)) return;
        run(k + 1);
        return;
      }
      case Step::Kind::Scan:
        scan(s, k);
        return;
    }
  }

  void scan(const Step& s, std::size_t k) {
    const RAtom& atom = rule_->body[s.index];
    const Relation& rel = store_.relation(atom.rel);
    TermId keys[32];
    for (std::size_t c = 0; c < atom.cols.size(); ++c) {
      if (s.mask & (1u << c)) {
        keys[c] = ground(atom.cols[c]);
        if (keys[c] == kNoTerm) return;
      }
    }
    auto try_row = [&](std::size_t r) {
      auto row = rel.row(r);
      for (std::size_t c = 0; c < row.size(); ++c) {
        if ((s.mask & (1u << c)) && row[c] != keys[c]) return;
      }
      for (std::size_t c = 0; c < row.size(); ++c) {
        if (!match(s.cols[c], row[c])) return;
      }
      run(k + 1);
    };
    if (s.delta) {
      const auto [begin, end] = delta_[atom.rel];
      for (std::size_t r = begin; r < end; ++r) try_row(r);
    } else if (s.mask != 0) {
      const auto* rows =
          rel.postings(s.mask, Relation::key_hash(s.mask, std::span<const TermId>(keys, atom.cols.size())));
      if (!rows) return;
      for (std::uint32_t r : *rows) try_row(r);
    } else {
      const std::size_t end = rel.size();
      for (std::size_t r = 0; r < end; ++r) try_row(r);
    }
  }

  void emit() {
    std::vector<TermId> tuple;
    for (const RAtom& h : rule_->heads) {
      tuple.clear();
      for (const RPat& p : h.cols) tuple.push_back(build(p));
      if (store_.relation(h.rel).contains(tuple)) continue;
      if (pending_[h.rel].insert(tuple)) {
        ++pending_count_;
        if (store_facts_ + pending_count_ > opts_.fact_ceiling) {
          throw CeilingExceeded("fact ceiling of " + std::to_string(opts_.fact_ceiling) +
                                " exceeded while deriving " + pending_[h.rel].name() +
                                " (likely divergence)");
        }
      }
    }
  }

 public:
  std::size_t store_facts_ = 0;

 private:
  TermTable& terms_;
  TupleStore& store_;
  const SaturateOptions& opts_;
  std::vector<Relation> pending_;
  std::size_t pending_count_ = 0;
  std::vector<std::pair<std::size_t, std::size_t>> delta_;
  const CompiledRule* rule_ = nullptr;
  const Plan* plan_ = nullptr;
  std::vector<TermId> env_;
};

}  // namespace

TupleStore saturate(const RuleSet& rs, TermTable& terms, TupleStore store,
                    const SaturateOptions& opts, SaturateStats* stats) {
  if (store.relation_count() != rs.decls_.size()) {
    throw RuleError("tuple store does not match the rule set's relations");
  }
  if (store.total_facts() > opts.fact_ceiling) {
    throw CeilingExceeded("input already exceeds the fact ceiling");
  }
  Evaluator ev(terms, store, opts);
  for (const auto& cr : rs.rules_) ev.prepare(*cr);
  std::size_t rounds = 0;
  auto commit = [&] {
    ++rounds;
    std::size_t added = ev.commit();
    ev.store_facts_ = store.total_facts();
    return added;
  };
  ev.store_facts_ = store.total_facts();

  for (std::size_t s = 0; s < rs.strata_.size(); ++s) {
    const auto& rule_ids = rs.stratum_rules_[s];
    std::vector<bool> in_stratum(rs.decls_.size(), false);
    for (std::size_t r : rs.strata_[s]) in_stratum[r] = true;

    if (opts.naive) {
      for (;;) {
        for (std::size_t i : rule_ids) ev.evaluate(*rs.rules_[i], rs.rules_[i]->full);
        if (commit() == 0) break;
      }
      continue;
    }

    for (std::size_t i : rule_ids) ev.evaluate(*rs.rules_[i], rs.rules_[i]->full);
    std::size_t added = commit();
    while (added > 0) {
      for (std::size_t i : rule_ids) {
        const CompiledRule& cr = *rs.rules_[i];
        for (std::size_t b = 0; b < cr.body.size(); ++b) {
          const std::size_t rel = cr.body[b].rel;
          if (in_stratum[rel] && ev.has_delta(rel)) ev.evaluate(cr, cr.delta[b]);
        }
      }
      added = commit();
    }
  }
  if (stats) {
    stats->rounds = rounds;
    stats->facts = store.total_facts();
  }
  return store;
}

}  // namespace schemeflow::engine
