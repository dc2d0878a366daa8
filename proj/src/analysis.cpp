#include "schemeflow/analysis.hpp"

#include <chrono>
#include <stdexcept>

namespace schemeflow {

using engine::any;
using engine::ctor;
using engine::num;
using engine::Pattern;
using engine::Rule;
using engine::sym;
using engine::var;

namespace {

Pattern v(const char* name) { return var(name); }
Pattern empty_ctx() { return ctor("Context", {sym("")}); }
Pattern kaddr(Pattern e, Pattern ctx) { return ctor("KAddress", {std::move(e), std::move(ctx)}); }
Pattern vaddr(Pattern x, Pattern ctx) { return ctor("VAddress", {std::move(x), std::move(ctx)}); }

}  // namespace

void AnalysisConfig::validate() const {
  if (widen_depth && *widen_depth < 1) throw std::invalid_argument("widen depth must be >= 1");
  if (strict_appendix && (widen_depth || truthiness != Truthiness::AppendixExact)) {
    throw std::invalid_argument(
        "strict appendix mode requires unbounded widening and appendix-exact truthiness");
  }
  if (fact_ceiling == 0) throw std::invalid_argument("fact ceiling must be positive");
}

std::vector<engine::RelationDecl> analysis_relations() {
  using K = ColumnKind;
  std::vector<engine::RelationDecl> out;
  for (const RelationSchema& s : edb_schema()) out.push_back({s.name, s.kinds});
  out.push_back({"state_e", {K::Label, K::Term, K::Term}});
  out.push_back({"state_a", {K::Term, K::Term}});
  out.push_back({"stored_val", {K::Term, K::Term}});
  out.push_back({"stored_kont", {K::Term, K::Term}});
  out.push_back({"peek_ctx", {K::Label, K::Term, K::Term}});
  out.push_back({"copy_ctx", {K::Term, K::Term, K::Label}});
  out.push_back({"freevar", {K::Name, K::Label}});
  out.push_back({"flow_ee", {K::Label, K::Label}});
  out.push_back({"flow_ea", {K::Label, K::Term}});
  out.push_back({"flow_aa", {K::Term, K::Term}});
  out.push_back({"flow_ae", {K::Term, K::Label}});
  return out;
}

std::vector<Rule> inject_rules() {
  Rule top;
  top.head("state_e", {v("e"), empty_ctx(), kaddr(v("e"), empty_ctx())})
      .head("peek_ctx", {v("e"), empty_ctx(), v("new_ctx")})
      .head("stored_kont", {kaddr(v("e"), empty_ctx()), ctor("MT", {})})
      .when("top_exp", {v("e")})
      .let("new_ctx", "new_ctx", {v("e"), empty_ctx()});
  return {top};
}

std::vector<Rule> context_rules() {
  std::vector<Rule> out;
  // peek_ctx for every form that binds: callcc, call, let, lambda.
  const std::vector<std::pair<const char*, std::size_t>> forms = {
      {"callcc", 2}, {"call", 3}, {"let", 3}, {"lambda", 3}};
  for (const auto& [rel, arity] : forms) {
    std::vector<Pattern> args = {v("e")};
    for (std::size_t i = 1; i < arity; ++i) args.push_back(any());
    Rule r;
    r.head("peek_ctx", {v("e"), v("old_ctx"), v("new_ctx")})
        .when("state_e", {v("e"), v("old_ctx"), any()})
        .when(rel, std::move(args))
        .let("new_ctx", "new_ctx", {v("e"), v("old_ctx")});
    out.push_back(std::move(r));
  }
  Rule copy;
  copy.head("stored_val", {vaddr(v("fv"), v("to")), v("val")})
      .when("copy_ctx", {v("from"), v("to"), v("e")})
      .when("freevar", {v("fv"), v("e")})
      .when("stored_val", {vaddr(v("fv"), v("from")), v("val")});
  out.push_back(std::move(copy));
  return out;
}

std::vector<Rule> freevar_rules() {
  std::vector<Rule> out;
  auto fv = [](const char* x, const char* e) { return std::vector<Pattern>{v(x), v(e)}; };
  auto add = [&](Rule r) { out.push_back(std::move(r)); };

  add(Rule().head("freevar", fv("x", "e")).when("var", {v("e"), v("x")}));
  add(Rule()
          .head("freevar", fv("x", "e"))
          .when("lambda", {v("e"), v("vars"), v("body")})
          .when("freevar", fv("x", "body"))
          .when("lambda_arg_list", {v("vars"), any(), v("p")})
          .neq(v("x"), v("p")));
  add(Rule().head("freevar", fv("x", "e")).when("call", {v("e"), v("f"), any()}).when("freevar", fv("x", "f")));
  add(Rule().head("freevar", fv("x", "e")).when("call", {v("e"), any(), v("args")}).when("freevar", fv("x", "args")));
  add(Rule().head("freevar", fv("x", "e")).when("prim_call", {v("e"), any(), v("args")}).when("freevar", fv("x", "args")));
  add(Rule().head("freevar", fv("x", "e")).when("call_arg_list", {v("e"), any(), v("arg")}).when("freevar", fv("x", "arg")));
  for (int branch = 0; branch < 3; ++branch) {
    std::vector<Pattern> cols = {v("e"), any(), any(), any()};
    cols[1 + branch] = v("sub");
    add(Rule().head("freevar", fv("x", "e")).when("if", std::move(cols)).when("freevar", fv("x", "sub")));
  }
  add(Rule().head("freevar", fv("y", "e")).when("setb", {v("e"), any(), v("ev")}).when("freevar", fv("y", "ev")));
  add(Rule().head("freevar", fv("x", "e")).when("callcc", {v("e"), v("ev")}).when("freevar", fv("x", "ev")));
  add(Rule().head("freevar", fv("x", "e")).when("let", {v("e"), v("binds"), any()}).when("freevar", fv("x", "binds")));
  add(Rule().head("freevar", fv("x", "e")).when("let", {v("e"), any(), v("body")}).when("freevar", fv("x", "body")));
  add(Rule()
          .head("freevar", fv("x", "e"))
          .when("let_list", {v("e"), v("a"), v("bind")})
          .when("freevar", fv("x", "bind"))
          .neq(v("x"), v("a")));
  return out;
}

std::vector<Rule> eval_rules() {
  std::vector<Rule> out;
  const Pattern here = v("ctx");

  // E-If
  out.push_back(Rule()
                    .head("state_e", {v("eguard"), here, kaddr(v("eguard"), here)})
                    .head("stored_kont", {kaddr(v("eguard"), here),
                                          ctor("If", {v("et"), v("ef"), here, v("ak")})})
                    .head("flow_ee", {v("e"), v("eguard")})
                    .when("state_e", {v("e"), here, v("ak")})
                    .when("if", {v("e"), v("eguard"), v("et"), v("ef")}));
  // E-C/cc
  out.push_back(Rule()
                    .head("state_e", {v("elam"), here, kaddr(v("elam"), here)})
                    .head("stored_kont", {kaddr(v("elam"), here), ctor("Callcc", {v("ectx"), v("ak")})})
                    .head("flow_ee", {v("e"), v("elam")})
                    .when("state_e", {v("e"), here, v("ak")})
                    .when("callcc", {v("e"), v("elam")})
                    .when("peek_ctx", {v("e"), here, v("ectx")}));
  // E-Set!
  out.push_back(Rule()
                    .head("state_e", {v("esetto"), here, kaddr(v("esetto"), here)})
                    .head("stored_kont", {kaddr(v("esetto"), here),
                                          ctor("Set", {vaddr(v("x"), here), v("ak")})})
                    .head("flow_ee", {v("e"), v("esetto")})
                    .when("state_e", {v("e"), here, v("ak")})
                    .when("setb", {v("e"), v("x"), v("esetto")}));
  // E-Call
  out.push_back(Rule()
                    .head("state_e", {v("efunc"), here, kaddr(v("efunc"), here)})
                    .head("stored_kont", {kaddr(v("efunc"), here),
                                          ctor("Arg", {v("eargs"), here, v("ectx"), v("ak")})})
                    .head("flow_ee", {v("e"), v("efunc")})
                    .when("state_e", {v("e"), here, v("ak")})
                    .when("call", {v("e"), v("efunc"), v("eargs")})
                    .when("peek_ctx", {v("e"), here, v("ectx")}));
  // E-Let, one successor per binding.
  out.push_back(Rule()
                    .head("state_e", {v("ebnd"), here, kaddr(v("ebnd"), here)})
                    .head("stored_kont",
                          {kaddr(v("ebnd"), here),
                           ctor("Let", {vaddr(v("x"), v("ectx")), v("ebody"), v("ectx"), v("ak")})})
                    .head("copy_ctx", {here, v("ectx"), v("e")})
                    .head("flow_ee", {v("e"), v("ebnd")})
                    .when("state_e", {v("e"), here, v("ak")})
                    .when("let", {v("e"), v("ll"), v("ebody")})
                    .when("let_list", {v("ll"), v("x"), v("ebnd")})
                    .when("peek_ctx", {v("e"), here, v("ectx")}));
  // E-Prim
  out.push_back(Rule()
                    .head("state_e", {v("earg0"), here, kaddr(v("earg0"), here)})
                    .head("stored_kont", {kaddr(v("earg0"), here),
                                          ctor("Prim1", {v("opname"), v("earg1"), here, v("ak")})})
                    .head("flow_ee", {v("e"), v("earg0")})
                    .when("state_e", {v("e"), here, v("ak")})
                    .when("prim_call", {v("e"), v("op"), v("pl")})
                    .when("prim", {v("op"), v("opname")})
                    .when("call_arg_list", {v("pl"), num(0), v("earg0")})
                    .when("call_arg_list", {v("pl"), num(1), v("earg1")}));
  return out;
}

std::vector<Rule> atomic_rules() {
  std::vector<Rule> out;
  out.push_back(Rule()
                    .head("state_a", {ctor("Number", {v("n")}), v("ak")})
                    .head("flow_ea", {v("e"), ctor("Number", {v("n")})})
                    .when("state_e", {v("e"), any(), v("ak")})
                    .when("num", {v("e"), v("n")}));
  out.push_back(Rule()
                    .head("state_a", {ctor("Bool", {v("b")}), v("ak")})
                    .head("flow_ea", {v("e"), ctor("Bool", {v("b")})})
                    .when("state_e", {v("e"), any(), v("ak")})
                    .when("bool", {v("e"), v("b")}));
  out.push_back(Rule()
                    .head("state_a", {ctor("Closure", {v("e"), v("ctx")}), v("ak")})
                    .head("flow_ea", {v("e"), ctor("Closure", {v("e"), v("ctx")})})
                    .when("state_e", {v("e"), v("ctx"), v("ak")})
                    .when("lambda", {v("e"), any(), any()}));
  out.push_back(Rule()
                    .head("state_a", {v("val"), v("ak")})
                    .head("flow_ea", {v("e"), v("val")})
                    .when("state_e", {v("e"), v("ctx"), v("ak")})
                    .when("var", {v("e"), v("x")})
                    .when("stored_val", {vaddr(v("x"), v("ctx")), v("val")}));
  return out;
}

std::vector<Rule> apply_rules(const AnalysisConfig& cfg) {
  std::vector<Rule> out;

  std::vector<Pattern> truthy = {ctor("Bool", {sym("#t")}), ctor("Closure", {any(), any()}),
                                 ctor("Number", {any()}), ctor("Kont", {any()})};
  std::vector<Pattern> falsy = {ctor("Bool", {sym("#f")})};
  const Pattern primval = ctor("PrimVal", {any(), any(), any()});
  const Pattern numtop = ctor("NumTop", {});
  if (cfg.truthiness == Truthiness::BothBranches) {
    truthy.push_back(primval);
    truthy.push_back(numtop);
    falsy.push_back(primval);
    falsy.push_back(numtop);
  } else {
    truthy.push_back(numtop);
  }
  // A-IfT
  for (const Pattern& guard : truthy) {
    out.push_back(Rule()
                      .head("state_e", {v("et"), v("ctx_k"), v("next_ak")})
                      .head("flow_ae", {ctor("Bool", {sym("#t")}), v("et")})
                      .when("state_a", {guard, v("ak")})
                      .when("stored_kont", {v("ak"), ctor("If", {v("et"), any(), v("ctx_k"), v("next_ak")})}));
  }
  // A-IfF
  for (const Pattern& guard : falsy) {
    out.push_back(Rule()
                      .head("state_e", {v("ef"), v("ctx_k"), v("next_ak")})
                      .head("flow_ae", {ctor("Bool", {sym("#f")}), v("ef")})
                      .when("state_a", {guard, v("ak")})
                      .when("stored_kont", {v("ak"), ctor("If", {any(), v("ef"), v("ctx_k"), v("next_ak")})}));
  }
  // A-C/cc
  out.push_back(Rule()
                    .head("state_e", {v("ebody"), v("ectx"), v("next_ak")})
                    .head("stored_val", {vaddr(v("x"), v("ectx")), ctor("Kont", {v("ak")})})
                    .head("copy_ctx", {v("ctx_clo"), v("ectx"), v("elam")})
                    .head("flow_ae", {ctor("Closure", {v("elam"), v("ctx_clo")}), v("ebody")})
                    .when("state_a", {ctor("Closure", {v("elam"), v("ctx_clo")}), v("ak")})
                    .when("stored_kont", {v("ak"), ctor("Callcc", {v("ectx"), v("next_ak")})})
                    .when("lambda", {v("elam"), v("params"), v("ebody")})
                    .when("lambda_arg_list", {v("params"), num(0), v("x")}));
  // A-C/ccKont
  out.push_back(Rule()
                    .head("state_a", {ctor("Kont", {v("ak")}), v("bk")})
                    .head("flow_aa", {ctor("Kont", {v("bk")}), ctor("Kont", {v("ak")})})
                    .when("state_a", {ctor("Kont", {v("bk")}), v("ak")})
                    .when("stored_kont", {v("ak"), ctor("Callcc", {any(), any()})}));
  // A-Ar
  out.push_back(Rule()
                    .head("state_e", {v("earg"), v("ctx"), kaddr(v("earg"), v("ctx"))})
                    .head("stored_kont", {kaddr(v("earg"), v("ctx")),
                                          ctor("Fn", {v("val"), v("pos"), v("ectx"), v("next_ak")})})
                    .head("flow_ae", {v("val"), v("earg")})
                    .when("state_a", {v("val"), v("ak")})
                    .when("stored_kont", {v("ak"), ctor("Arg", {v("eargs"), v("ctx"), v("ectx"), v("next_ak")})})
                    .when("call_arg_list", {v("eargs"), v("pos"), v("earg")}));
  // A-Call
  out.push_back(Rule()
                    .head("state_e", {v("ebody"), v("ectx"), v("next_ak")})
                    .head("stored_val", {vaddr(v("x"), v("ectx")), v("val")})
                    .head("copy_ctx", {v("ctx_clo"), v("ectx"), v("elam")})
                    .head("flow_ae", {v("val"), v("ebody")})
                    .when("state_a", {v("val"), v("ak")})
                    .when("stored_kont", {v("ak"), ctor("Fn", {ctor("Closure", {v("elam"), v("ctx_clo")}),
                                                                v("pos"), v("ectx"), v("next_ak")})})
                    .when("lambda", {v("elam"), v("params"), v("ebody")})
                    .when("lambda_arg_list", {v("params"), v("pos"), v("x")}));
  // A-CallKont
  out.push_back(Rule()
                    .head("state_a", {v("val"), v("callcc_kont")})
                    .head("flow_aa", {v("val"), v("val")})
                    .when("state_a", {v("val"), v("ak")})
                    .when("stored_kont", {v("ak"), ctor("Fn", {ctor("Kont", {v("callcc_kont")}), num(0), any(), any()})}));
  // A-Let
  out.push_back(Rule()
                    .head("state_e", {v("ebody"), v("ctx"), v("next_ak")})
                    .head("stored_val", {v("av"), v("val")})
                    .head("flow_ae", {v("val"), v("ebody")})
                    .when("state_a", {v("val"), v("ak")})
                    .when("stored_kont", {v("ak"), ctor("Let", {v("av"), v("ebody"), v("ctx"), v("next_ak")})}));
  // A-Prim1
  out.push_back(Rule()
                    .head("state_e", {v("earg1"), v("ctx"), kaddr(v("earg1"), v("ctx"))})
                    .head("stored_kont", {kaddr(v("earg1"), v("ctx")), ctor("Prim2", {v("op"), v("val"), v("next_ak")})})
                    .head("flow_ae", {v("val"), v("earg1")})
                    .when("state_a", {v("val"), v("ak")})
                    .when("stored_kont", {v("ak"), ctor("Prim1", {v("op"), v("earg1"), v("ctx"), v("next_ak")})}));
  // A-Prim2
  out.push_back(Rule()
                    .head("state_a", {v("pv"), v("next_ak")})
                    .head("flow_aa", {v("v2"), v("pv")})
                    .when("state_a", {v("v2"), v("ak")})
                    .when("stored_kont", {v("ak"), ctor("Prim2", {v("op"), v("v1"), v("next_ak")})})
                    .let("pv", "widen", {ctor("PrimVal", {v("op"), v("v1"), v("v2")})}));
  // A-Set!
  out.push_back(Rule()
                    .head("state_a", {ctor("Number", {num(-42)}), v("next_ak")})
                    .head("stored_val", {v("loc"), v("val")})
                    .head("flow_aa", {v("val"), ctor("Number", {num(-42)})})
                    .when("state_a", {v("val"), v("ak")})
                    .when("stored_kont", {v("ak"), ctor("Set", {v("loc"), v("next_ak")})}));
  return out;
}

std::vector<Rule> analysis_rules(const AnalysisConfig& cfg) {
  std::vector<Rule> out;
  auto append = [&](std::vector<Rule> rs) {
    for (Rule& r : rs) out.push_back(std::move(r));
  };
  append(inject_rules());
  append(context_rules());
  append(freevar_rules());
  append(eval_rules());
  append(atomic_rules());
  append(apply_rules(cfg));
  return out;
}

std::map<std::string, engine::TermFunction> analysis_functions(Model model,
                                                               const AnalysisConfig& cfg) {
  std::map<std::string, engine::TermFunction> fns;
  const unsigned m = cfg.m;
  fns["new_ctx"] = [model, m](TermTable&, std::span<const TermId> a) mutable {
    return model.make_context(a[0], a[1], m);
  };
  const WidenDepth depth = cfg.widen_depth;
  fns["widen"] = [model, depth](TermTable&, std::span<const TermId> a) mutable {
    return model.widen_value(a[0], depth);
  };
  return fns;
}

engine::RuleSet build_analysis(TermTable& terms, const AnalysisConfig& cfg) {
  cfg.validate();
  return engine::build_ruleset(terms, analysis_relations(), analysis_rules(cfg),
                               analysis_functions(Model(terms), cfg));
}

void load_edb(const Edb& edb, TermTable& terms, engine::TupleStore& store) {
  std::vector<TermId> tuple;
  for (const auto& [name, tuples] : edb.relations) {
    engine::Relation& rel = store.relation(name);
    for (const FactTuple& t : tuples) {
      tuple.clear();
      for (const FactValue& fv : t) {
        if (const auto* s = std::get_if<std::string>(&fv)) {
          tuple.push_back(terms.symbol(*s));
        } else {
          tuple.push_back(terms.integer(std::get<std::int64_t>(fv)));
        }
      }
      rel.insert(tuple);
    }
  }
}

AnalysisResult analyze_edb(const Edb& edb, const AnalysisConfig& cfg) {
  const auto start = std::chrono::steady_clock::now();
  if (edb["top_exp"].size() != 1) {
    throw std::invalid_argument("expected exactly one top_exp fact, found " +
                                std::to_string(edb["top_exp"].size()));
  }
  AnalysisResult result;
  TermTable& terms = result.terms();
  Model model(terms);
  engine::RuleSet rules = build_analysis(terms, cfg);
  engine::TupleStore store = rules.make_store();
  load_edb(edb, terms, store);

  engine::SaturateOptions opts;
  opts.fact_ceiling = cfg.fact_ceiling;
  engine::SaturateStats stats;
  store = engine::saturate(rules, terms, std::move(store), opts, &stats);

  for (const std::string& rel : output_relations()) {
    const engine::Relation& r = store.relation(rel);
    std::vector<std::vector<TermId>> rows;
    rows.reserve(r.size());
    for (std::size_t i = 0; i < r.size(); ++i) {
      auto row = r.row(i);
      rows.emplace_back(row.begin(), row.end());
    }
    result.set(rel, std::move(rows));
  }
  result.stats.engine = "datalog";
  result.stats.iterations = stats.rounds;
  result.stats.peak_facts = stats.facts;
  result.stats.seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return result;
}

AnalysisResult analyze(const LabeledProgram& program, const AnalysisConfig& cfg) {
  return analyze_edb(extract_facts(program), cfg);
}

}  // namespace schemeflow
