#include <gtest/gtest.h>

#include "schemeflow/frontend.hpp"
#include "schemeflow/sexpr.hpp"
#include "support.hpp"

namespace schemeflow {
namespace {

using testing::kTwoCalls;

std::string error_of(std::string_view src, const FrontendOptions& opts = {}) {
  try {
    parse_program(src, opts);
  } catch (const SourceError& e) {
    return e.what();
  }
  return "";
}

TEST(Reader, Atoms) {
  auto forms = read_sexprs("42");
  ASSERT_EQ(forms.size(), 1u);
  EXPECT_EQ(forms[0].kind, SExpr::Kind::Integer);
  EXPECT_EQ(forms[0].number, 42);

  forms = read_sexprs("(f #t)");
  ASSERT_EQ(forms.size(), 1u);
  ASSERT_EQ(forms[0].items.size(), 2u);
  EXPECT_TRUE(forms[0].items[0].is_identifier("f"));
  EXPECT_EQ(forms[0].items[1].kind, SExpr::Kind::Boolean);
  EXPECT_TRUE(forms[0].items[1].boolean);
}

TEST(Reader, NestingCommentsAndPositions) {
  auto forms = read_sexprs("; leading comment\n((lambda (x) x) 1) ; trailing\n-7");
  ASSERT_EQ(forms.size(), 2u);
  const SExpr& app = forms[0];
  ASSERT_EQ(app.items.size(), 2u);
  EXPECT_EQ(app.items[0].items.size(), 3u);
  EXPECT_EQ(app.pos.line, 2u);
  EXPECT_EQ(app.pos.column, 1u);
  EXPECT_EQ(app.items[1].pos.column, 17u);
  EXPECT_EQ(forms[1].number, -7);
}

TEST(Reader, Errors) {
  EXPECT_THROW(read_sexprs("(f 1"), SourceError);
  EXPECT_THROW(read_sexprs("f 1)"), SourceError);
  EXPECT_THROW(read_sexprs("(f]"), SourceError);
  EXPECT_THROW(read_sexprs("\"str\""), SourceError);
  try {
    read_sexprs("(a\n  (b c)\n  )\n)");
    FAIL();
  } catch (const SourceError& e) {
    EXPECT_EQ(e.pos().line, 4u);
  }
}

TEST(Labeling, IfChildrenInSourceOrder) {
  LabeledProgram p = parse_program("(if a 4 5)");
  const Node& n = p.node(p.root());
  EXPECT_EQ(n.kind, NodeKind::If);
  ASSERT_EQ(n.children.size(), 3u);
  EXPECT_EQ(n.children[0].index, 1u);
  EXPECT_EQ(n.children[1].index, 2u);
  EXPECT_EQ(n.children[2].index, 3u);
  EXPECT_EQ(p.node(n.children[1]).number, 4);
}

TEST(Labeling, ValidationErrors) {
  EXPECT_NE(error_of("(let () x)").find("at least one binding"), std::string::npos);
  EXPECT_NE(error_of("(+ 1 2 3)").find("exactly 2"), std::string::npos);
  EXPECT_NE(error_of("(lambda (x x) x)").find("duplicate"), std::string::npos);
  EXPECT_NE(error_of("(set! (f) 1)").find("set!"), std::string::npos);
  EXPECT_NE(error_of("(quote a)").find("quote"), std::string::npos);
  EXPECT_NE(error_of("'a").find("quote"), std::string::npos);
  EXPECT_NE(error_of("(f)").find("nullary"), std::string::npos);
  EXPECT_NE(error_of("1 2").find("exactly one"), std::string::npos);
  EXPECT_FALSE(error_of("(let ((x 1) (x 2)) x)").empty());
  EXPECT_FALSE(error_of("(lambda x x)").empty());
  EXPECT_FALSE(error_of("(if 1 2)").empty());
}

TEST(Labeling, ErrorsCarryPositions) {
  try {
    parse_program("(let ((a 1))\n  (+ a 2 3))");
    FAIL();
  } catch (const SourceError& e) {
    EXPECT_EQ(e.pos().line, 2u);
    EXPECT_EQ(e.pos().column, 3u);
  }
}

TEST(Labeling, QuoteAllowedByFlag) {
  FrontendOptions opts;
  opts.allow_quote = true;
  LabeledProgram p = parse_program("(quote (a b))", opts);
  Edb edb = extract_facts(p);
  ASSERT_EQ(edb["quotation"].size(), 1u);
  EXPECT_EQ(edb["quotation"][0], (FactTuple{"e0", "e1"}));
}

TEST(Labeling, CustomPrimitiveSet) {
  FrontendOptions opts;
  opts.primitives = {"max"};
  Edb edb = extract_facts(parse_program("(max 1 2)", opts));
  EXPECT_EQ(edb["prim_call"].size(), 1u);
  // With the default set, `max` is an ordinary call of a free variable.
  edb = extract_facts(parse_program("(max 1 2)"));
  EXPECT_EQ(edb["call"].size(), 1u);
}

TEST(Labeling, ShadowedBindersGetDistinctNames) {
  LabeledProgram p = parse_program("(let ((x 1)) (let ((x 2)) x))");
  std::set<std::string> bound;
  for (const Node& n : p.nodes()) {
    if (n.kind == NodeKind::BindList) bound.insert(n.names.begin(), n.names.end());
  }
  EXPECT_EQ(bound, (std::set<std::string>{"x", "x#1"}));
  const Node& inner_ref = p.nodes().back();
  EXPECT_EQ(inner_ref.kind, NodeKind::Var);
  EXPECT_EQ(inner_ref.name, "x#1");
  EXPECT_EQ(inner_ref.source_name, "x");
}

TEST(Labeling, FreeNamesAreNeverReusedByRenaming) {
  // `x#1` cannot be written in source, but a free `x` must keep its name.
  LabeledProgram p = parse_program("(let ((f (lambda (x) x))) (f x))");
  Edb edb = extract_facts(p);
  std::set<std::string> vars;
  for (const FactTuple& t : edb["var"]) vars.insert(std::get<std::string>(t[1]));
  EXPECT_TRUE(vars.contains("x"));
  EXPECT_TRUE(vars.contains("x#1"));
}

TEST(Facts, Number) {
  Edb edb = extract_facts(parse_program("42"));
  EXPECT_EQ(edb.total(), 2u);
  EXPECT_EQ(edb["top_exp"], (std::vector<FactTuple>{{"e0"}}));
  EXPECT_EQ(edb["num"], (std::vector<FactTuple>{{"e0", std::int64_t{42}}}));
}

TEST(Facts, CallOfFreeVariable) {
  Edb edb = extract_facts(parse_program("(f #t)"));
  EXPECT_EQ(edb.total(), 5u);
  EXPECT_EQ(edb["call"], (std::vector<FactTuple>{{"e0", "e1", "e2"}}));
  EXPECT_EQ(edb["var"], (std::vector<FactTuple>{{"e1", "f"}}));
  EXPECT_EQ(edb["call_arg_list"], (std::vector<FactTuple>{{"e2", std::int64_t{0}, "e3"}}));
  EXPECT_EQ(edb["bool"], (std::vector<FactTuple>{{"e3", "#t"}}));
}

TEST(Facts, TwoCallFlattening) {
  // Hand-flattened: e0 outer let, e1 binds, e2 lambda, e3 params, e4 x,
  // e5 inner let, e6 binds, e7 (f #t), e8 f, e9 args, e10 #t, e11 (f #f),
  // e12 f, e13 args, e14 #f, e15 if, e16 a, e17 4, e18 5.
  Edb edb = extract_facts(parse_program(kTwoCalls));
  EXPECT_EQ(edb["top_exp"], (std::vector<FactTuple>{{"e0"}}));
  EXPECT_EQ(edb["let"], (std::vector<FactTuple>{{"e0", "e1", "e5"}, {"e5", "e6", "e15"}}));
  EXPECT_EQ(edb["let_list"], (std::vector<FactTuple>{{"e1", "f", "e2"}, {"e6", "a", "e7"}, {"e6", "b", "e11"}}));
  EXPECT_EQ(edb["lambda"], (std::vector<FactTuple>{{"e2", "e3", "e4"}}));
  EXPECT_EQ(edb["lambda_arg_list"], (std::vector<FactTuple>{{"e3", std::int64_t{0}, "x"}}));
  EXPECT_EQ(edb["call"], (std::vector<FactTuple>{{"e7", "e8", "e9"}, {"e11", "e12", "e13"}}));
  EXPECT_EQ(edb["call_arg_list"],
            (std::vector<FactTuple>{{"e9", std::int64_t{0}, "e10"}, {"e13", std::int64_t{0}, "e14"}}));
  EXPECT_EQ(edb["if"], (std::vector<FactTuple>{{"e15", "e16", "e17", "e18"}}));
  EXPECT_EQ(edb["num"], (std::vector<FactTuple>{{"e17", std::int64_t{4}}, {"e18", std::int64_t{5}}}));
}

TEST(Facts, SchemaMatchesInputDeclarations) {
  std::vector<std::pair<std::string, std::size_t>> want = {
      {"top_exp", 1}, {"lambda", 3}, {"lambda_arg_list", 3}, {"prim", 2},
      {"prim_call", 3}, {"call", 3}, {"call_arg_list", 3}, {"var", 2},
      {"num", 2}, {"bool", 2}, {"quotation", 2}, {"if", 4},
      {"setb", 3}, {"callcc", 2}, {"let", 3}, {"let_list", 3}};
  ASSERT_EQ(edb_schema().size(), want.size());
  for (std::size_t i = 0; i < want.size(); ++i) {
    EXPECT_EQ(edb_schema()[i].name, want[i].first);
    EXPECT_EQ(edb_schema()[i].arity(), want[i].second);
  }
}

TEST(Facts, EveryIdExistsInNodeTable) {
  for (const auto& file : testing::corpus_files()) {
    LabeledProgram p = parse_program(testing::slurp(file));
    Edb edb = extract_facts(p);
    for (const RelationSchema& s : edb_schema()) {
      for (const FactTuple& t : edb[s.name]) {
        ASSERT_EQ(t.size(), s.arity());
        for (std::size_t c = 0; c < t.size(); ++c) {
          if (s.kinds[c] != ColumnKind::Label) continue;
          const std::string& id = std::get<std::string>(t[c]);
          ASSERT_EQ(id[0], 'e');
          EXPECT_LT(std::stoul(id.substr(1)), p.size()) << file;
        }
      }
    }
  }
}

TEST(Facts, RoundTripThroughFiles) {
  for (const auto& file : testing::corpus_files()) {
    Edb edb = extract_facts(parse_program(testing::slurp(file)));
    auto dir = testing::fresh_dir("facts_roundtrip");
    write_facts(edb, dir);
    EXPECT_EQ(read_facts(dir), edb) << file;
    for (const RelationSchema& s : edb_schema()) {
      EXPECT_TRUE(std::filesystem::exists(dir / (s.name + ".facts")));
    }
  }
}

TEST(Facts, LabelingIsDeterministic) {
  for (const auto& file : testing::corpus_files()) {
    const std::string src = testing::slurp(file);
    auto d1 = testing::fresh_dir("det1"), d2 = testing::fresh_dir("det2");
    write_facts(extract_facts(parse_program(src)), d1);
    write_facts(extract_facts(parse_program(src)), d2);
    for (const RelationSchema& s : edb_schema()) {
      EXPECT_EQ(testing::slurp(d1 / (s.name + ".facts")), testing::slurp(d2 / (s.name + ".facts")));
    }
  }
}

TEST(FreeVars, Examples) {
  LabeledProgram p = parse_program("x");
  EXPECT_EQ(syntactic_free_vars(p, p.root()), (std::set<std::string>{"x"}));
  p = parse_program("(lambda (x) x)");
  EXPECT_TRUE(syntactic_free_vars(p, p.root()).empty());
  p = parse_program("(lambda (w) (w z z))");
  EXPECT_EQ(syntactic_free_vars(p, p.root()), (std::set<std::string>{"z"}));
}

TEST(FreeVars, ReplicatesRelationQuirks) {
  // Two parameters: each survives the other's disequality.
  LabeledProgram p = parse_program("(lambda (a b) (a b))");
  EXPECT_EQ(syntactic_free_vars(p, p.root()), (std::set<std::string>{"a", "b"}));
  // Let-bound names are only removed from binding expressions.
  p = parse_program("(let ((y 1)) y)");
  EXPECT_EQ(syntactic_free_vars(p, p.root()), (std::set<std::string>{"y"}));
  // A binding expression sees the outer scope: its `y` is the free one, the
  // binder is renamed, and the disequality no longer removes it.
  p = parse_program("(let ((y y)) 1)");
  EXPECT_EQ(syntactic_free_vars(p, p.root()), (std::set<std::string>{"y"}));
  // The set! target is not itself free.
  p = parse_program("(set! q 1)");
  EXPECT_TRUE(syntactic_free_vars(p, p.root()).empty());
}

}  // namespace
}  // namespace schemeflow
