#include "schemeflow/oracle.hpp"

#include <algorithm>
#include <chrono>
#include <deque>
#include <random>
#include <stdexcept>

#include "schemeflow/engine.hpp"

namespace schemeflow::oracle {

namespace {
const std::vector<TermId> kNone;
}

// --- GlobalStore ------------------------------------------------------------

const std::vector<TermId>& GlobalStore::values(TermId vaddr) const {
  auto it = vstore_.find(vaddr);
  return it == vstore_.end() ? kNone : it->second;
}

const std::vector<TermId>& GlobalStore::konts(TermId kaddr) const {
  auto it = kstore_.find(kaddr);
  return it == kstore_.end() ? kNone : it->second;
}

std::vector<TermId> GlobalStore::join_value(TermId vaddr, TermId v) {
  std::vector<TermId> grown;
  std::vector<TermId> pending = {vaddr};
  while (!pending.empty()) {
    TermId addr = pending.back();
    pending.pop_back();
    if (!value_set_.insert(key(addr, v)).second) continue;
    vstore_[addr].push_back(v);
    grown.push_back(addr);
    if (auto it = edges_.find(addr); it != edges_.end()) {
      pending.insert(pending.end(), it->second.begin(), it->second.end());
    }
  }
  return grown;
}

bool GlobalStore::join_kont(TermId kaddr, TermId k) {
  if (!kont_set_.insert(key(kaddr, k)).second) return false;
  kstore_[kaddr].push_back(k);
  return true;
}

std::vector<TermId> GlobalStore::add_copy_edge(TermId from, TermId to) {
  if (!edge_set_.insert(key(from, to)).second) return {};
  edges_[from].push_back(to);
  std::vector<TermId> grown;
  const std::vector<TermId> existing = values(from);
  for (TermId v : existing) {
    for (TermId a : join_value(to, v)) grown.push_back(a);
  }
  return grown;
}

std::vector<std::pair<TermId, TermId>> GlobalStore::value_tuples() const {
  std::vector<std::pair<TermId, TermId>> out;
  for (const auto& [addr, vs] : vstore_) {
    for (TermId v : vs) out.emplace_back(addr, v);
  }
  return out;
}

std::vector<std::pair<TermId, TermId>> GlobalStore::kont_tuples() const {
  std::vector<std::pair<TermId, TermId>> out;
  for (const auto& [addr, ks] : kstore_) {
    for (TermId k : ks) out.emplace_back(addr, k);
  }
  return out;
}

// --- Machine ----------------------------------------------------------------

Machine::Machine(const LabeledProgram& program, const AnalysisConfig& cfg, TermTable& terms)
    : program_(&program), cfg_(cfg), model_(terms) {
  cfg_.validate();
  true_ = model_.boolean(true);
  false_ = model_.boolean(false);
  const std::size_t n = program.size();
  label_terms_.reserve(n);
  name_terms_.assign(n, kNoTerm);
  for (std::uint32_t i = 0; i < n; ++i) {
    TermId t = model_.label(Label{i});
    label_terms_.push_back(t);
    label_of_.emplace(t, i);
    const Node& node = program.node(Label{i});
    if (node.kind == NodeKind::Var || node.kind == NodeKind::SetBang) {
      name_terms_[i] = model_.name(node.name);
    }
  }
  const auto sets = all_free_vars(program);
  free_vars_.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (const std::string& x : sets[i]) free_vars_[i].push_back(model_.name(x));
  }
}

std::optional<std::uint32_t> Machine::label_index(TermId t) const {
  auto it = label_of_.find(t);
  if (it == label_of_.end()) return std::nullopt;
  return it->second;
}

const Node& Machine::node_of(TermId e) const {
  auto idx = label_index(e);
  if (!idx) throw std::invalid_argument("not a program label: " + model_.terms().render(e));
  return program_->node(Label{*idx});
}

const std::vector<TermId>& Machine::free_vars(TermId e) const {
  auto idx = label_index(e);
  return idx ? free_vars_[*idx] : kNone;
}

std::vector<std::pair<TermId, TermId>> Machine::freevar_tuples() const {
  std::vector<std::pair<TermId, TermId>> out;
  for (std::size_t i = 0; i < free_vars_.size(); ++i) {
    for (TermId x : free_vars_[i]) out.emplace_back(x, label_terms_[i]);
  }
  return out;
}

Config Machine::initial() {
  TermId root = label_term(program_->root());
  TermId eps = model_.empty_context();
  return Config::eval(root, eps, model_.alloc_k(root, eps));
}

std::tuple<TermId, TermId, TermId> Machine::initial_peek() {
  TermId root = label_term(program_->root());
  TermId eps = model_.empty_context();
  return {root, eps, model_.make_context(root, eps, cfg_.m)};
}

std::string Machine::render(const Config& c) const {
  const TermTable& t = model_.terms();
  if (c.kind == Config::Kind::Eval) {
    return "Eval " + t.render(c.a) + " " + t.render(c.b) + " " + t.render(c.c);
  }
  return "Apply " + t.render(c.a) + " " + t.render(c.b);
}

bool Machine::truthy(TermId v) const {
  switch (*model_.value_kind(v)) {
    case ValueKind::Bool:
      return v == true_;
    case ValueKind::Closure:
    case ValueKind::Number:
    case ValueKind::KontRef:
      return true;
    case ValueKind::PrimVal:
      return cfg_.truthiness == Truthiness::BothBranches;
    case ValueKind::NumTop:
      return true;
  }
  return false;
}

bool Machine::falsy(TermId v) const {
  switch (*model_.value_kind(v)) {
    case ValueKind::Bool:
      return v == false_;
    case ValueKind::PrimVal:
    case ValueKind::NumTop:
      return cfg_.truthiness == Truthiness::BothBranches;
    default:
      return false;
  }
}

std::vector<TermId> Machine::atomic_eval(TermId e, TermId ctx, const GlobalStore& store) {
  const Node& n = node_of(e);
  switch (n.kind) {
    case NodeKind::Num:
      return {model_.number(n.number)};
    case NodeKind::Bool:
      return {model_.boolean(n.boolean)};
    case NodeKind::Lambda:
      return {model_.closure(e, ctx)};
    case NodeKind::Var:
      return store.values(model_.alloc_v(model_.name(n.name), ctx));
    default:
      throw std::invalid_argument("atomic_eval on non-atomic expression " +
                                  model_.terms().render(e));
  }
}

StepResult Machine::step(const Config& c, const GlobalStore& store, std::size_t skip) {
  StepResult out;
  if (c.kind == Config::Kind::Eval) {
    step_eval(c.a, c.b, c.c, store, skip, out);
  } else {
    out.read_kaddr = c.b;
    const std::vector<TermId>& frames = store.konts(c.b);
    out.consumed = frames.size();
    for (std::size_t i = skip; i < frames.size(); ++i) step_apply(c.a, c.b, frames[i], out);
  }
  return out;
}

void Machine::step_eval(TermId e, TermId ctx, TermId ak, const GlobalStore& store,
                        std::size_t skip, StepResult& out) {
  const Node& n = node_of(e);
  const auto& ch = n.children;
  auto push = [&](Label sub) {
    TermId s = label_term(sub);
    TermId ka = model_.alloc_k(s, ctx);
    out.successors.push_back(Config::eval(s, ctx, ka));
    out.flow_ee.emplace_back(e, s);
    return ka;
  };
  auto peek = [&] {
    TermId ectx = model_.make_context(e, ctx, cfg_.m);
    out.peeks.emplace_back(e, ctx, ectx);
    return ectx;
  };
  auto atomic = [&](const char* rule) {
    const std::vector<TermId> vs = atomic_eval(e, ctx, store);
    out.consumed = vs.size();
    for (std::size_t i = skip; i < vs.size(); ++i) {
      out.successors.push_back(Config::apply(vs[i], ak));
      out.flow_ea.emplace_back(e, vs[i]);
    }
    out.rules.push_back(rule);
  };

  switch (n.kind) {
    case NodeKind::Num:
    case NodeKind::Bool:
      atomic("E-AE");
      break;
    case NodeKind::Lambda:
      peek();
      atomic("E-AE");
      break;
    case NodeKind::Var:
      out.read_vaddr = model_.alloc_v(name_terms_[*label_index(e)], ctx);
      atomic("E-AE");
      break;
    case NodeKind::If: {
      TermId ka = push(ch[0]);
      out.konts.emplace_back(ka, model_.if_k(label_term(ch[1]), label_term(ch[2]), ctx, ak));
      out.rules.push_back("E-If");
      break;
    }
    case NodeKind::Callcc: {
      TermId ectx = peek();
      TermId ka = push(ch[0]);
      out.konts.emplace_back(ka, model_.callcc_k(ectx, ak));
      out.rules.push_back("E-C/cc");
      break;
    }
    case NodeKind::SetBang: {
      TermId loc = model_.alloc_v(name_terms_[*label_index(e)], ctx);
      TermId ka = push(ch[0]);
      out.konts.emplace_back(ka, model_.set_k(loc, ak));
      out.rules.push_back("E-Set!");
      break;
    }
    case NodeKind::Call: {
      TermId ectx = peek();
      TermId ka = push(ch[0]);
      out.konts.emplace_back(ka, model_.arg_k(label_term(ch[1]), ctx, ectx, ak));
      out.rules.push_back("E-Call");
      break;
    }
    case NodeKind::Let: {
      TermId ectx = peek();
      const Node& binds = program_->node(ch[0]);
      TermId body = label_term(ch[1]);
      for (std::size_t i = 0; i < binds.children.size(); ++i) {
        TermId ka = push(binds.children[i]);
        TermId av = model_.alloc_v(model_.name(binds.names[i]), ectx);
        out.konts.emplace_back(ka, model_.let_k(av, body, ectx, ak));
      }
      out.copies.emplace_back(ctx, ectx, e);
      out.rules.push_back("E-Let");
      break;
    }
    case NodeKind::PrimCall: {
      const Node& op = program_->node(ch[0]);
      const Node& args = program_->node(ch[1]);
      TermId ka = push(args.children.at(0));
      out.konts.emplace_back(
          ka, model_.prim1_k(model_.name(op.name), label_term(args.children.at(1)), ctx, ak));
      out.rules.push_back("E-Prim");
      break;
    }
    default:
      // Quoted data and list nodes have no transition.
      break;
  }
}

void Machine::enter_lambda(TermId v, TermId closure, std::int64_t pos, TermId ectx, TermId next,
                           TermId bound, const char* rule, StepResult& out) {
  TermTable& t = model_.terms();
  TermId elam = t.args(closure)[0];
  TermId ctx_clo = t.args(closure)[1];
  auto idx = label_index(elam);
  if (!idx) return;
  const Label lam{*idx};
  const auto& params = program_->lambda_params(lam);
  if (pos < 0 || static_cast<std::size_t>(pos) >= params.size()) return;
  TermId body = label_term(program_->lambda_body(lam));
  out.successors.push_back(Config::eval(body, ectx, next));
  out.vals.emplace_back(model_.alloc_v(model_.name(params[pos]), ectx), bound);
  out.copies.emplace_back(ctx_clo, ectx, elam);
  out.flow_ae.emplace_back(v, body);
  out.rules.push_back(rule);
}

void Machine::step_apply(TermId v, TermId ak, TermId k, StepResult& out) {
  TermTable& t = model_.terms();
  const auto kind = model_.kont_kind(k);
  if (!kind) return;
  const std::vector<TermId> f(t.args(k).begin(), t.args(k).end());
  const auto vkind = model_.value_kind(v);

  switch (*kind) {
    case KontKind::MT:
      break;
    case KontKind::If:
      if (truthy(v)) {
        out.successors.push_back(Config::eval(f[0], f[2], f[3]));
        out.flow_ae.emplace_back(model_.boolean(true), f[0]);
        out.rules.push_back("A-IfT");
      }
      if (falsy(v)) {
        out.successors.push_back(Config::eval(f[1], f[2], f[3]));
        out.flow_ae.emplace_back(model_.boolean(false), f[1]);
        out.rules.push_back("A-IfF");
      }
      break;
    case KontKind::Callcc:
      if (vkind == ValueKind::Closure) {
        enter_lambda(v, v, 0, f[0], f[1], model_.kont_ref(ak), "A-C/cc", out);
      } else if (vkind == ValueKind::KontRef) {
        TermId bk = t.args(v)[0];
        TermId swapped = model_.kont_ref(ak);
        out.successors.push_back(Config::apply(swapped, bk));
        out.flow_aa.emplace_back(v, swapped);
        out.rules.push_back("A-C/ccKont");
      }
      break;
    case KontKind::Arg: {
      auto idx = label_index(f[0]);
      const auto& args = program_->node(Label{*idx}).children;
      for (std::size_t pos = 0; pos < args.size(); ++pos) {
        TermId earg = label_term(args[pos]);
        TermId ka = model_.alloc_k(earg, f[1]);
        out.successors.push_back(Config::eval(earg, f[1], ka));
        out.konts.emplace_back(ka, model_.fn_k(v, static_cast<std::int64_t>(pos), f[2], f[3]));
        out.flow_ae.emplace_back(v, earg);
      }
      out.rules.push_back("A-Ar");
      break;
    }
    case KontKind::Fn: {
      const TermId fn = f[0];
      const std::int64_t pos = t.integer_value(f[1]);
      const auto fkind = model_.value_kind(fn);
      if (fkind == ValueKind::Closure) {
        enter_lambda(v, fn, pos, f[2], f[3], v, "A-Call", out);
      } else if (fkind == ValueKind::KontRef && pos == 0) {
        out.successors.push_back(Config::apply(v, t.args(fn)[0]));
        out.flow_aa.emplace_back(v, v);
        out.rules.push_back("A-CallKont");
      }
      break;
    }
    case KontKind::Let:
      out.successors.push_back(Config::eval(f[1], f[2], f[3]));
      out.vals.emplace_back(f[0], v);
      out.flow_ae.emplace_back(v, f[1]);
      out.rules.push_back("A-Let");
      break;
    case KontKind::Prim1: {
      TermId ka = model_.alloc_k(f[1], f[2]);
      out.successors.push_back(Config::eval(f[1], f[2], ka));
      out.konts.emplace_back(ka, model_.prim2_k(f[0], v, f[3]));
      out.flow_ae.emplace_back(v, f[1]);
      out.rules.push_back("A-Prim1");
      break;
    }
    case KontKind::Prim2: {
      TermId pv = model_.widen_value(model_.prim_val(f[0], f[1], v), cfg_.widen_depth);
      out.successors.push_back(Config::apply(pv, f[2]));
      out.flow_aa.emplace_back(v, pv);
      out.rules.push_back("A-Prim2");
      break;
    }
    case KontKind::Set: {
      TermId n42 = model_.number(-42);
      out.successors.push_back(Config::apply(n42, f[1]));
      out.vals.emplace_back(f[0], v);
      out.flow_aa.emplace_back(v, n42);
      out.rules.push_back("A-Set!");
      break;
    }
  }
}

// --- Fixpoint ---------------------------------------------------------------

namespace {

using Pair = std::pair<TermId, TermId>;
using Triple = std::tuple<TermId, TermId, TermId>;

struct PairHash {
  std::size_t operator()(const Pair& p) const { return mix_hash(p.first, p.second); }
};
struct TripleHash {
  std::size_t operator()(const Triple& t) const {
    return mix_hash(mix_hash(std::get<0>(t), std::get<1>(t)), std::get<2>(t));
  }
};

class Worklist {
 public:
  explicit Worklist(std::optional<std::uint64_t> seed) {
    if (seed) rng_.emplace(*seed);
  }
  bool empty() const { return items_.empty(); }
  void push(std::size_t i) { items_.push_back(i); }
  std::size_t pop() {
    std::size_t at = 0;
    if (rng_) at = std::uniform_int_distribution<std::size_t>(0, items_.size() - 1)(*rng_);
    std::swap(items_[at], items_.front());
    std::size_t v = items_.front();
    items_.pop_front();
    return v;
  }

 private:
  std::deque<std::size_t> items_;
  std::optional<std::mt19937_64> rng_;
};

}  // namespace

AnalysisResult run_fixpoint(const LabeledProgram& program, const AnalysisConfig& cfg,
                            const OracleOptions& opts) {
  const auto start = std::chrono::steady_clock::now();
  AnalysisResult result;
  TermTable& terms = result.terms();
  Machine machine(program, cfg, terms);
  Model& model = machine.model();
  GlobalStore store;

  std::vector<Config> configs;
  std::unordered_map<Config, std::size_t, ConfigHash> index;
  std::vector<char> queued;
  std::vector<std::size_t> cursor;  // store entries already consumed per config
  std::vector<char> visited;
  std::unordered_map<TermId, std::vector<std::size_t>> vreaders, kreaders;
  std::unordered_set<Triple, TripleHash> copies, peeks;
  std::unordered_set<Pair, PairHash> flows[4];
  Worklist work(opts.shuffle_seed);
  std::size_t steps = 0;
  std::size_t peak = 0;

  auto check_ceiling = [&] {
    const std::size_t facts = configs.size() + store.value_count() + store.kont_count();
    peak = std::max(peak, facts);
    if (facts > opts.fact_ceiling || steps > opts.fact_ceiling) {
      throw engine::CeilingExceeded("worklist exceeded the ceiling of " +
                                    std::to_string(opts.fact_ceiling) + " facts/steps after " +
                                    std::to_string(steps) + " steps");
    }
  };
  auto enqueue = [&](std::size_t i) {
    if (!queued[i]) {
      queued[i] = 1;
      work.push(i);
    }
  };
  auto add_config = [&](const Config& c) {
    auto [it, fresh] = index.emplace(c, configs.size());
    if (fresh) {
      configs.push_back(c);
      queued.push_back(0);
      cursor.push_back(0);
      visited.push_back(0);
      enqueue(it->second);
    }
  };
  auto wake_values = [&](const std::vector<TermId>& grown) {
    for (TermId a : grown) {
      if (auto it = vreaders.find(a); it != vreaders.end()) {
        for (std::size_t i : it->second) enqueue(i);
      }
    }
  };

  peeks.insert(machine.initial_peek());
  const Config init = machine.initial();
  store.join_kont(init.c, model.mt());
  add_config(init);

  while (!work.empty()) {
    const std::size_t i = work.pop();
    queued[i] = 0;
    const Config c = configs[i];
    ++steps;
    const bool first_visit = !visited[i];
    visited[i] = 1;
    StepResult r = machine.step(c, store, cursor[i]);
    cursor[i] = r.consumed;

    // A config is revisited whenever the cell it reads grows.
    if (first_visit) {
      if (r.read_vaddr) vreaders[*r.read_vaddr].push_back(i);
      if (r.read_kaddr) kreaders[*r.read_kaddr].push_back(i);
    }
    if (opts.trace) {
      for (const std::string& rule : r.rules) *opts.trace << rule << '\t' << machine.render(c) << '\n';
    }

    for (const auto& p : r.peeks) peeks.insert(p);
    for (const auto& [a, b] : r.flow_ee) flows[0].emplace(a, b);
    for (const auto& [a, b] : r.flow_ea) flows[1].emplace(a, b);
    for (const auto& [a, b] : r.flow_aa) flows[2].emplace(a, b);
    for (const auto& [a, b] : r.flow_ae) flows[3].emplace(a, b);

    for (const auto& [ka, k] : r.konts) {
      if (store.join_kont(ka, k)) {
        if (auto it = kreaders.find(ka); it != kreaders.end()) {
          for (std::size_t j : it->second) enqueue(j);
        }
      }
    }
    for (const auto& [va, v] : r.vals) wake_values(store.join_value(va, v));
    for (const auto& t : r.copies) {
      if (!copies.insert(t).second) continue;
      const auto& [from, to, e] = t;
      for (TermId x : machine.free_vars(e)) {
        wake_values(store.add_copy_edge(model.alloc_v(x, from), model.alloc_v(x, to)));
      }
    }
    for (const Config& s : r.successors) add_config(s);
    check_ceiling();
  }

  std::vector<std::vector<TermId>> state_e, state_a;
  for (const Config& c : configs) {
    if (c.kind == Config::Kind::Eval) {
      state_e.push_back({c.a, c.b, c.c});
    } else {
      state_a.push_back({c.a, c.b});
    }
  }
  auto pairs = [](const auto& src) {
    std::vector<std::vector<TermId>> rows;
    for (const auto& [a, b] : src) rows.push_back({a, b});
    return rows;
  };
  auto triples = [](const auto& src) {
    std::vector<std::vector<TermId>> rows;
    for (const auto& [a, b, c] : src) rows.push_back({a, b, c});
    return rows;
  };
  result.set("state_e", std::move(state_e));
  result.set("state_a", std::move(state_a));
  result.set("stored_val", pairs(store.value_tuples()));
  result.set("stored_kont", pairs(store.kont_tuples()));
  result.set("peek_ctx", triples(peeks));
  result.set("copy_ctx", triples(copies));
  result.set("freevar", pairs(machine.freevar_tuples()));
  result.set("flow_ee", pairs(flows[0]));
  result.set("flow_ea", pairs(flows[1]));
  result.set("flow_aa", pairs(flows[2]));
  result.set("flow_ae", pairs(flows[3]));

  result.stats.engine = "worklist";
  result.stats.iterations = steps;
  result.stats.peak_facts = peak;
  result.stats.seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return result;
}

}  // namespace schemeflow::oracle
