#include <gtest/gtest.h>

#include "random_rules.hpp"
#include "schemeflow/analysis.hpp"
#include "schemeflow/engine.hpp"

namespace schemeflow::engine {
namespace {

using K = ColumnKind;

class Ancestor : public ::testing::Test {
 protected:
  TermTable terms;
  std::vector<RelationDecl> rels = {{"parent", {K::Name, K::Name}}, {"ancestor", {K::Name, K::Name}}};
  std::vector<Rule> rules() {
    return {Rule().head("ancestor", {var("p"), var("a")}).when("parent", {var("p"), var("a")}),
            Rule()
                .head("ancestor", {var("p"), var("a")})
                .when("parent", {var("p"), var("q")})
                .when("ancestor", {var("q"), var("a")})};
  }
  TermId s(const char* x) { return terms.symbol(x); }
};

TEST_F(Ancestor, TransitiveClosure) {
  RuleSet rs = build_ruleset(terms, rels, rules());
  EXPECT_EQ(rs.rule_count(), 2u);
  TupleStore edb = rs.make_store();
  edb.insert("parent", {s("a"), s("b")});
  edb.insert("parent", {s("b"), s("c")});
  TupleStore out = saturate(rs, terms, std::move(edb));
  EXPECT_EQ(canonical_lines(out, terms, "ancestor"),
            (std::vector<std::string>{"a\tb", "a\tc", "b\tc"}));

  const TermId prefix[] = {s("a")};
  auto rows = query(out, terms, "ancestor", prefix);
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_EQ(terms.render(rows[0][1]), "b");
  EXPECT_EQ(terms.render(rows[1][1]), "c");
  EXPECT_EQ(query(out, terms, "ancestor").size(), 3u);
  EXPECT_THROW(query(out, terms, "nope"), RuleError);
}

TEST_F(Ancestor, RecursiveRulesShareOneStratum) {
  RuleSet rs = build_ruleset(terms, rels, rules());
  auto strata = rs.strata();
  auto where = [&](const std::string& rel) {
    for (std::size_t i = 0; i < strata.size(); ++i) {
      if (std::find(strata[i].begin(), strata[i].end(), rel) != strata[i].end()) return i;
    }
    return strata.size();
  };
  // Input-only relations are not stratified; the recursive pair is one stratum.
  EXPECT_EQ(strata.size(), 1u);
  EXPECT_EQ(where("parent"), strata.size());
  EXPECT_LT(where("ancestor"), strata.size());
}

TEST_F(Ancestor, EmptyInputDerivesNothing) {
  RuleSet rs = build_ruleset(terms, rels, rules());
  TupleStore out = saturate(rs, terms, rs.make_store());
  EXPECT_EQ(out.total_facts(), 0u);
  EXPECT_TRUE(query(out, terms, "ancestor").empty());
}

TEST_F(Ancestor, NaiveAgrees) {
  RuleSet rs = build_ruleset(terms, rels, rules());
  TupleStore edb = rs.make_store();
  for (int i = 0; i < 40; ++i) {
    edb.insert("parent", {terms.integer(i), terms.integer((i * 7 + 3) % 40)});
  }
  TupleStore copy = edb;
  SaturateOptions naive;
  naive.naive = true;
  SaturateStats st_semi, st_naive;
  TupleStore a = saturate(rs, terms, std::move(edb), {}, &st_semi);
  TupleStore b = saturate(rs, terms, std::move(copy), naive, &st_naive);
  EXPECT_EQ(canonical_lines(a, terms, "ancestor"), canonical_lines(b, terms, "ancestor"));
  EXPECT_EQ(st_semi.facts, st_naive.facts);
}

TEST_F(Ancestor, CeilingAborts) {
  RuleSet rs = build_ruleset(terms, rels, rules());
  TupleStore edb = rs.make_store();
  for (int i = 0; i < 100; ++i) edb.insert("parent", {terms.integer(i), terms.integer(i + 1)});
  SaturateOptions opts;
  opts.fact_ceiling = 1000;
  EXPECT_THROW(saturate(rs, terms, std::move(edb), opts), CeilingExceeded);
}

TEST_F(Ancestor, ValidationErrors) {
  auto bad = [&](Rule r) { return [this, r] { build_ruleset(terms, rels, {r}); }; };
  EXPECT_THROW(bad(Rule().head("ancestor", {var("x"), var("z")}).when("parent", {var("x"), var("y")}))(),
               RuleError);
  EXPECT_THROW(bad(Rule().head("ancestor", {var("x"), var("y")}).when("mother", {var("x"), var("y")}))(),
               RuleError);
  EXPECT_THROW(bad(Rule().head("ancestor", {var("x")}).when("parent", {var("x"), var("y")}))(), RuleError);
  EXPECT_THROW(bad(Rule().head("ancestor", {var("x"), any()}).when("parent", {var("x"), var("y")}))(),
               RuleError);
  EXPECT_THROW(bad(Rule()
                       .head("ancestor", {var("x"), var("y")})
                       .when("parent", {var("x"), var("y")})
                       .neq(var("x"), var("w")))(),
               RuleError);
  EXPECT_THROW(bad(Rule()
                       .head("ancestor", {var("x"), var("v")})
                       .when("parent", {var("x"), var("y")})
                       .let("v", "missing", {var("y")}))(),
               RuleError);
}

TEST(Engine, ConstructorsDisequalityMultiHeadAndFunctions) {
  TermTable terms;
  std::vector<RelationDecl> rels = {{"edge", {K::Name, K::Name}},
                                    {"boxed", {K::Term}},
                                    {"unboxed", {K::Name, K::Name}},
                                    {"loopfree", {K::Name, K::Name}},
                                    {"tagged", {K::Term}}};
  std::map<std::string, TermFunction> fns;
  fns["tag"] = [](TermTable& t, std::span<const TermId> a) {
    if (t.symbol_text(a[0]) == "skip") return kNoTerm;
    return t.ctor("Tag", {a[0]});
  };
  std::vector<Rule> rules = {
      Rule()
          .head("boxed", {ctor("Pair", {var("a"), var("b")})})
          .head("loopfree", {var("a"), var("b")})
          .when("edge", {var("a"), var("b")})
          .neq(var("a"), var("b")),
      Rule().head("unboxed", {var("y"), var("x")}).when("boxed", {ctor("Pair", {var("x"), var("y")})}),
      Rule().head("tagged", {var("t")}).when("edge", {var("a"), any()}).let("t", "tag", {var("a")}),
  };
  RuleSet rs = build_ruleset(terms, rels, rules, fns);
  EXPECT_NE(rs.dump().find("boxed($Pair(a, b))"), std::string::npos) << rs.dump();
  TupleStore edb = rs.make_store();
  auto s = [&](const char* x) { return terms.symbol(x); };
  edb.insert("edge", {s("p"), s("q")});
  edb.insert("edge", {s("r"), s("r")});
  edb.insert("edge", {s("skip"), s("q")});
  TupleStore out = saturate(rs, terms, std::move(edb));
  EXPECT_EQ(canonical_lines(out, terms, "boxed"),
            (std::vector<std::string>{"(Pair p q)", "(Pair skip q)"}));
  EXPECT_EQ(canonical_lines(out, terms, "loopfree"), (std::vector<std::string>{"p\tq", "skip\tq"}));
  EXPECT_EQ(canonical_lines(out, terms, "unboxed"), (std::vector<std::string>{"q\tp", "q\tskip"}));
  EXPECT_EQ(canonical_lines(out, terms, "tagged"), (std::vector<std::string>{"(Tag p)", "(Tag r)"}));
}

TEST(Engine, RandomRuleSetsNaiveEqualsSemiNaive) {
  for (std::uint64_t seed = 1; seed <= 25; ++seed) {
    auto prog = testing::random_program(seed);
    TermTable terms;
    RuleSet rs = build_ruleset(terms, prog.relations, prog.rules);
    SaturateOptions naive;
    naive.naive = true;
    TupleStore a = saturate(rs, terms, testing::load(prog, terms, rs));
    TupleStore b = saturate(rs, terms, testing::load(prog, terms, rs), naive);
    EXPECT_LE(a.total_facts(), 10000u);
    EXPECT_EQ(testing::dump_all(rs, a, terms), testing::dump_all(rs, b, terms)) << "seed " << seed;
  }
}

TEST(Engine, InsertionOrderDoesNotMatter) {
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    auto prog = testing::random_program(seed);
    TermTable terms;
    RuleSet rs = build_ruleset(terms, prog.relations, prog.rules);
    const std::string base = testing::dump_all(rs, saturate(rs, terms, testing::load(prog, terms, rs)), terms);
    for (std::uint64_t shuffle = 1; shuffle <= 3; ++shuffle) {
      TupleStore out = saturate(rs, terms, testing::load(prog, terms, rs, shuffle));
      EXPECT_EQ(testing::dump_all(rs, out, terms), base);
    }
    // Rule order is irrelevant too.
    auto reversed = prog.rules;
    std::reverse(reversed.begin(), reversed.end());
    RuleSet rs2 = build_ruleset(terms, prog.relations, reversed);
    EXPECT_EQ(testing::dump_all(rs2, saturate(rs2, terms, testing::load(prog, terms, rs2)), terms), base);
  }
}

TEST(Engine, SaturatedStoreIsAFixpoint) {
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    auto prog = testing::random_program(seed);
    TermTable terms;
    RuleSet rs = build_ruleset(terms, prog.relations, prog.rules);
    TupleStore once = saturate(rs, terms, testing::load(prog, terms, rs));
    const std::size_t n = once.total_facts();
    TupleStore twice = saturate(rs, terms, once);
    EXPECT_EQ(twice.total_facts(), n);
  }
}

TEST(Engine, Monotonicity) {
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    auto prog = testing::random_program(seed);
    auto half = prog;
    half.facts.resize(prog.facts.size() / 2);
    TermTable terms;
    RuleSet rs = build_ruleset(terms, prog.relations, prog.rules);
    TupleStore small = saturate(rs, terms, testing::load(half, terms, rs));
    TupleStore big = saturate(rs, terms, testing::load(prog, terms, rs));
    for (const auto& d : rs.relations()) {
      for (const auto& row : query(small, terms, d.name)) {
        EXPECT_TRUE(big.relation(d.name).contains(row)) << d.name;
      }
    }
  }
}

TEST(Engine, AnalysisStrataPutSyntaxBelowStates) {
  TermTable terms;
  RuleSet rs = build_analysis(terms, AnalysisConfig{});
  auto strata = rs.strata();
  auto where = [&](const std::string& rel) {
    for (std::size_t i = 0; i < strata.size(); ++i) {
      if (std::find(strata[i].begin(), strata[i].end(), rel) != strata[i].end()) return i;
    }
    return strata.size();
  };
  EXPECT_LT(where("freevar"), where("state_e"));
  for (const char* rel : {"state_a", "stored_val", "stored_kont", "peek_ctx", "copy_ctx"}) {
    EXPECT_EQ(where(rel), where("state_e")) << rel;
  }
}

}  // namespace
}  // namespace schemeflow::engine
