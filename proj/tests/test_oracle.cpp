#include <gtest/gtest.h>

#include <set>
#include <sstream>

#include "schemeflow/analysis.hpp"
#include "schemeflow/engine.hpp"
#include "schemeflow/oracle.hpp"
#include "schemeflow/termgen.hpp"
#include "support.hpp"

namespace schemeflow {
namespace {

using oracle::Config;
using oracle::GlobalStore;
using oracle::Machine;
using testing::config;
using testing::kTwoCalls;
using testing::values_of;

const std::string kEps = "(Context \"\")";

std::set<std::string> rendered(const TermTable& t, const std::vector<TermId>& vs) {
  std::set<std::string> out;
  for (TermId v : vs) out.insert(t.render(v));
  return out;
}

// --- atomic evaluation -----------------------------------------------------

TEST(AtomicEval, ConstantsLambdasAndVariables) {
  LabeledProgram p = parse_program("((lambda (x) x) 5)");
  TermTable t;
  Machine mach(p, config(1), t);
  Model& md = mach.model();
  GlobalStore store;
  const TermId eps = md.empty_context();

  // e0 call, e1 lambda, e2 params, e3 body x, e4 arg list, e5 5
  EXPECT_EQ(rendered(t, mach.atomic_eval(md.label(Label{5}), eps, store)),
            (std::set<std::string>{"(Number 5)"}));
  EXPECT_EQ(rendered(t, mach.atomic_eval(md.label(Label{1}), eps, store)),
            (std::set<std::string>{"(Closure e1 " + kEps + ")"}));

  // An unbound variable evaluates to nothing.
  TermId x = md.label(Label{3});
  EXPECT_TRUE(mach.atomic_eval(x, eps, store).empty());
  store.join_value(md.alloc_v(md.name("x"), eps), md.number(1));
  store.join_value(md.alloc_v(md.name("x"), eps), md.boolean(false));
  EXPECT_EQ(rendered(t, mach.atomic_eval(x, eps, store)),
            (std::set<std::string>{"(Number 1)", "(Bool #f)"}));

  EXPECT_THROW(mach.atomic_eval(md.label(Label{0}), eps, store), std::invalid_argument);
}

TEST(AtomicEval, BooleansAreSingletons) {
  LabeledProgram p = parse_program("#f");
  TermTable t;
  Machine mach(p, config(0), t);
  GlobalStore store;
  EXPECT_EQ(rendered(t, mach.atomic_eval(mach.model().label(Label{0}),
                                         mach.model().empty_context(), store)),
            (std::set<std::string>{"(Bool #f)"}));
}

// --- single steps ----------------------------------------------------------

TEST(Step, IfPushesGuardFrame) {
  LabeledProgram p = parse_program("(if #t 1 2)");
  TermTable t;
  Machine mach(p, config(0), t);
  GlobalStore store;
  const Config c0 = mach.initial();
  EXPECT_EQ(mach.render(c0), "Eval e0 " + kEps + " (KAddress e0 " + kEps + ")");
  const oracle::StepResult r = mach.step(c0, store);
  ASSERT_EQ(r.successors.size(), 1u);
  EXPECT_EQ(mach.render(r.successors[0]), "Eval e1 " + kEps + " (KAddress e1 " + kEps + ")");
  ASSERT_EQ(r.konts.size(), 1u);
  EXPECT_EQ(t.render(r.konts[0].second), "(If e2 e3 " + kEps + " (KAddress e0 " + kEps + "))");
  EXPECT_EQ(r.rules, (std::vector<std::string>{"E-If"}));
}

TEST(Step, ApplyFansOutOverEveryFrameAtTheAddress) {
  LabeledProgram p = parse_program("(let ((a (if #f 1 2))) a)");
  TermTable t;
  Machine mach(p, config(0), t);
  Model& md = mach.model();
  GlobalStore store;
  const TermId eps = md.empty_context();
  const TermId ka = md.alloc_k(md.label(Label{1}), eps);
  const TermId top = md.alloc_k(md.label(Label{0}), eps);
  // Two unrelated frames joined at one address, as conflation does.
  store.join_kont(ka, md.if_k(md.label(Label{4}), md.label(Label{5}), eps, top));
  store.join_kont(ka, md.let_k(md.alloc_v(md.name("a"), eps), md.label(Label{6}), eps, top));

  const oracle::StepResult r = mach.step(Config::apply(md.boolean(false), ka), store);
  std::set<std::string> succ;
  for (const Config& c : r.successors) succ.insert(mach.render(c));
  EXPECT_EQ(succ, (std::set<std::string>{"Eval e5 " + kEps + " (KAddress e0 " + kEps + ")",
                                         "Eval e6 " + kEps + " (KAddress e0 " + kEps + ")"}));
  EXPECT_EQ(std::set<std::string>(r.rules.begin(), r.rules.end()),
            (std::set<std::string>{"A-IfF", "A-Let"}));
  ASSERT_EQ(r.vals.size(), 1u);
  EXPECT_EQ(t.render(r.vals[0].second), "(Bool #f)");
  EXPECT_EQ(r.consumed, 2u);

  // Skipping frames already handled yields only the rest.
  const oracle::StepResult tail = mach.step(Config::apply(md.boolean(false), ka), store, 1);
  EXPECT_EQ(tail.rules, (std::vector<std::string>{"A-Let"}));
}

TEST(Step, SetStoresAndReturnsSentinel) {
  LabeledProgram p = parse_program("(set! x 3)");
  TermTable t;
  Machine mach(p, config(0), t);
  Model& md = mach.model();
  GlobalStore store;
  const TermId eps = md.empty_context();
  const TermId top = md.alloc_k(md.label(Label{0}), eps);
  const TermId ka = md.alloc_k(md.label(Label{1}), eps);
  store.join_kont(ka, md.set_k(md.alloc_v(md.name("x"), eps), top));
  const oracle::StepResult r = mach.step(Config::apply(md.number(3), ka), store);
  ASSERT_EQ(r.successors.size(), 1u);
  EXPECT_EQ(mach.render(r.successors[0]), "Apply (Number -42) (KAddress e0 " + kEps + ")");
  ASSERT_EQ(r.vals.size(), 1u);
  EXPECT_EQ(t.render(r.vals[0].first), "(VAddress x " + kEps + ")");
  EXPECT_EQ(t.render(r.vals[0].second), "(Number 3)");
}

TEST(Store, CopyEdgesForwardEarlierAndLaterValues) {
  TermTable t;
  Model md(t);
  GlobalStore s;
  const TermId c0 = md.empty_context();
  const TermId l = md.label(Label{3});
  TermId frames[] = {l};
  const TermId c1 = md.context(frames);
  const TermId from = md.alloc_v(md.name("z"), c0);
  const TermId to = md.alloc_v(md.name("z"), c1);
  s.join_value(from, md.number(1));
  EXPECT_EQ(s.add_copy_edge(from, to), (std::vector<TermId>{to}));
  auto grown = s.join_value(from, md.number(2));
  EXPECT_EQ(std::set<TermId>(grown.begin(), grown.end()), (std::set<TermId>{from, to}));
  EXPECT_EQ(s.values(to).size(), 2u);
  EXPECT_TRUE(s.join_value(to, md.number(2)).empty());
  EXPECT_EQ(s.value_count(), 4u);
}

// --- fixpoint --------------------------------------------------------------

TEST(Fixpoint, NumberYieldsTwoConfigurations) {
  AnalysisResult r = oracle::run_fixpoint(parse_program("42"), config(0));
  EXPECT_EQ(r.count("state_e"), 1u);
  EXPECT_EQ(r.count("state_a"), 1u);
  EXPECT_EQ(r.count("stored_val"), 0u);
  EXPECT_EQ(r.stats.engine, "worklist");
}

TEST(Fixpoint, ConditionalExampleMatchesRules) {
  LabeledProgram p = parse_program(kTwoCalls);
  for (unsigned m = 0; m <= 2; ++m) {
    for (Truthiness tr : {Truthiness::BothBranches, Truthiness::AppendixExact}) {
      AnalysisResult a = analyze(p, config(m, tr));
      AnalysisResult o = oracle::run_fixpoint(p, config(m, tr));
      for (const std::string& rel : output_relations()) {
        EXPECT_EQ(a.lines(rel), o.lines(rel)) << rel << " m=" << m;
      }
    }
  }
}

TEST(Fixpoint, GeneratorBindingsSeparateOnlyAbovePadding) {
  auto bindings = [](int padding, unsigned m) {
    termgen::GenSpec spec{4, 1, padding};
    return oracle::run_fixpoint(parse_program(termgen::gen_mcfa_worst(spec)), config(m));
  };
  AnalysisResult sharp = bindings(0, 1);
  for (int i = 0; i < 4; ++i) {
    auto vs = values_of(sharp, "m" + std::to_string(i));
    ASSERT_EQ(vs.size(), 1u);
    EXPECT_EQ(vs.begin()->second, (std::set<std::string>{"(Number " + std::to_string(i) + ")"}));
  }
  AnalysisResult blurred = bindings(1, 1);
  const std::set<std::string> all = {"(Number 0)", "(Number 1)", "(Number 2)", "(Number 3)"};
  for (int i = 0; i < 4; ++i) {
    auto vs = values_of(blurred, "m" + std::to_string(i));
    ASSERT_EQ(vs.size(), 1u);
    EXPECT_EQ(vs.begin()->second, all);
  }
}

TEST(Fixpoint, WorklistOrderDoesNotMatter) {
  for (const auto& file : testing::corpus_files()) {
    LabeledProgram p = parse_program(testing::slurp(file));
    AnalysisResult fifo = oracle::run_fixpoint(p, config(1));
    for (std::uint64_t seed : {1u, 7u, 99u}) {
      oracle::OracleOptions o;
      o.shuffle_seed = seed;
      AnalysisResult shuffled = oracle::run_fixpoint(p, config(1), o);
      for (const std::string& rel : output_relations()) {
        EXPECT_EQ(fifo.lines(rel), shuffled.lines(rel)) << file << " " << rel;
      }
    }
  }
}

// Stepping every reached configuration against the final store discovers
// nothing new.
TEST(Fixpoint, ResultIsClosedUnderStep) {
  for (const auto& file : testing::corpus_files()) {
    LabeledProgram p = parse_program(testing::slurp(file));
    for (unsigned m = 0; m <= 1; ++m) {
      AnalysisResult r = oracle::run_fixpoint(p, config(m));
      TermTable& t = r.terms();
      Machine mach(p, config(m), t);
      GlobalStore store;
      std::set<std::pair<TermId, TermId>> vals, konts;
      std::set<std::tuple<TermId, TermId, TermId>> copies;
      for (const auto& row : r.rows("stored_val").tuples) {
        store.join_value(row[0], row[1]);
        vals.emplace(row[0], row[1]);
      }
      for (const auto& row : r.rows("stored_kont").tuples) {
        store.join_kont(row[0], row[1]);
        konts.emplace(row[0], row[1]);
      }
      for (const auto& row : r.rows("copy_ctx").tuples) copies.emplace(row[0], row[1], row[2]);
      std::set<std::string> states;
      std::vector<Config> configs;
      for (const auto& row : r.rows("state_e").tuples) {
        configs.push_back(Config::eval(row[0], row[1], row[2]));
      }
      for (const auto& row : r.rows("state_a").tuples) configs.push_back(Config::apply(row[0], row[1]));
      for (const Config& c : configs) states.insert(mach.render(c));

      for (const Config& c : configs) {
        const oracle::StepResult s = mach.step(c, store);
        for (const Config& n : s.successors) EXPECT_TRUE(states.contains(mach.render(n))) << file;
        for (const auto& v : s.vals) EXPECT_TRUE(vals.contains(v)) << file;
        for (const auto& k : s.konts) EXPECT_TRUE(konts.contains(k)) << file;
        for (const auto& cp : s.copies) EXPECT_TRUE(copies.contains(cp)) << file;
      }
    }
  }
}

TEST(Fixpoint, TraceNamesEveryTransition) {
  std::ostringstream trace;
  oracle::OracleOptions o;
  o.trace = &trace;
  oracle::run_fixpoint(parse_program("(if #t 1 2)"), config(0), o);
  const std::string s = trace.str();
  EXPECT_EQ(s.rfind("E-If\tEval e0 ", 0), 0u) << s;
  EXPECT_NE(s.find("A-IfT\tApply (Bool #t)"), std::string::npos) << s;
  EXPECT_EQ(s.find("A-IfF"), std::string::npos) << s;
}

TEST(Fixpoint, CeilingStopsDivergentStrictRun) {
  LabeledProgram p = parse_program("((lambda (g) (g g 0)) (lambda (h n) (h h (+ n 1))))");
  oracle::OracleOptions o;
  o.fact_ceiling = 5000;
  EXPECT_THROW(oracle::run_fixpoint(p, AnalysisConfig::strict(1), o), engine::CeilingExceeded);
  // The default widening terminates.
  EXPECT_NO_THROW(oracle::run_fixpoint(p, config(1), o));
}

}  // namespace
}  // namespace schemeflow
