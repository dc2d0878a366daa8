#include "schemeflow/cli.hpp"

#include <CLI11.hpp>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <nlohmann/json.hpp>
#include <sstream>

#include "schemeflow/engine.hpp"
#include "schemeflow/frontend.hpp"
#include "schemeflow/oracle.hpp"
#include "schemeflow/termgen.hpp"

namespace schemeflow::cli {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

std::size_t fact_ceiling_from_env() {
  const char* v = std::getenv("SCHEMEFLOW_FACT_CEILING");
  if (!v || !*v) return 5'000'000;
  char* end = nullptr;
  unsigned long long n = std::strtoull(v, &end, 10);
  if (*end != '\0' || n == 0) {
    throw std::invalid_argument(std::string("SCHEMEFLOW_FACT_CEILING is not a positive integer: ") + v);
  }
  return static_cast<std::size_t>(n);
}

std::string run_report_json(const AnalysisResult& r, const AnalysisConfig& cfg) {
  json j;
  j["engine"] = r.stats.engine;
  j["m"] = cfg.m;
  j["widen_depth"] = cfg.widen_depth ? json(*cfg.widen_depth) : json(nullptr);
  j["strict_appendix"] = cfg.strict_appendix;
  j["truthiness"] = cfg.truthiness == Truthiness::BothBranches ? "both" : "appendix";
  j["iterations"] = r.stats.iterations;
  j["peak_facts"] = r.stats.peak_facts;
  j["seconds"] = r.stats.seconds;
  json counts = json::object();
  for (const std::string& rel : output_relations()) counts[rel] = r.count(rel);
  j["counts"] = counts;
  return j.dump(1) + "\n";
}

namespace {

struct Shared {
  std::string input = "-";
  std::string out_dir;
  unsigned m = 0;
  int widen_depth = 2;
  bool strict = false;
  std::string truthiness = "both";
  std::string format = "tsv";
  bool allow_quote = false;
};

void add_input(CLI::App* cmd, Shared& s) {
  cmd->add_option("input", s.input, "Scheme source file, or - for stdin");
  cmd->add_flag("--allow-quote", s.allow_quote, "Accept quote forms (emitted as dead syntax)");
}

void add_config(CLI::App* cmd, Shared& s) {
  cmd->add_option("--m", s.m, "Context depth")->capture_default_str();
  auto* wd = cmd->add_option("--widen-depth", s.widen_depth, "PrimVal nesting limit")
                 ->check(CLI::PositiveNumber)
                 ->capture_default_str();
  auto* strict = cmd->add_flag("--strict-appendix", s.strict,
                               "No widening, appendix-exact truthiness");
  wd->excludes(strict);
  cmd->add_option("--truthiness", s.truthiness, "PrimVal/NumTop guards: both or appendix")
      ->check(CLI::IsMember({"both", "appendix"}))
      ->capture_default_str()
      ->excludes(strict);
}

AnalysisConfig make_config(const Shared& s) {
  AnalysisConfig cfg =
      s.strict ? AnalysisConfig::strict(s.m) : AnalysisConfig{};
  if (!s.strict) {
    cfg.m = s.m;
    cfg.widen_depth = static_cast<unsigned>(s.widen_depth);
    cfg.truthiness =
        s.truthiness == "appendix" ? Truthiness::AppendixExact : Truthiness::BothBranches;
  }
  cfg.fact_ceiling = fact_ceiling_from_env();
  cfg.validate();
  return cfg;
}

std::string read_input(const std::string& path, std::istream& in) {
  std::ostringstream buf;
  if (path == "-") {
    buf << in.rdbuf();
  } else {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot read " + path);
    buf << f.rdbuf();
  }
  return buf.str();
}

LabeledProgram load(const Shared& s, std::istream& in) {
  FrontendOptions opts;
  opts.allow_quote = s.allow_quote;
  return parse_program(read_input(s.input, in), opts);
}

void emit(const AnalysisResult& r, const AnalysisConfig& cfg, const Shared& s, std::ostream& out) {
  const OutputFormat fmt = s.format == "json" ? OutputFormat::Json : OutputFormat::Tsv;
  if (s.out_dir.empty()) {
    if (fmt == OutputFormat::Json) {
      out << result_to_json(r);
    } else {
      for (const std::string& rel : output_relations()) {
        for (const std::string& line : r.lines(rel)) out << rel << '\t' << line << '\n';
      }
    }
    return;
  }
  serialize_result(r, fmt, s.out_dir);
  std::ofstream report(fs::path(s.out_dir) / "run_report.json", std::ios::binary);
  report << run_report_json(r, cfg);
  if (!report) throw std::runtime_error("cannot write run_report.json in " + s.out_dir);
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::istream& in, std::ostream& out,
            std::ostream& err) {
  CLI::App app{"m-CFA control-flow analysis for a small Scheme subset", "schemeflow"};
  app.require_subcommand(1);

  Shared s;
  auto* facts = app.add_subcommand("facts", "Write the input relations as <relation>.facts");
  add_input(facts, s);
  facts->add_option("--out", s.out_dir, "Output directory")->required();

  auto* analyze_cmd = app.add_subcommand("analyze", "Run the rule-based analysis");
  auto* oracle_cmd = app.add_subcommand("oracle", "Run the worklist abstract machine");
  bool trace = false;
  for (CLI::App* cmd : {analyze_cmd, oracle_cmd}) {
    add_input(cmd, s);
    add_config(cmd, s);
    cmd->add_option("--format", s.format, "tsv or json")
        ->check(CLI::IsMember({"tsv", "json"}))
        ->capture_default_str();
    cmd->add_option("--out", s.out_dir, "Output directory (default: stdout)");
  }
  oracle_cmd->add_flag("--trace", trace, "Print one line per applied transition to stderr");

  auto* diff_cmd = app.add_subcommand("diff", "Compare the two evaluators");
  add_input(diff_cmd, s);
  add_config(diff_cmd, s);
  bool diff_flows = false;
  diff_cmd->add_flag("--diff-flows", diff_flows, "Also compare flow_* relations");

  termgen::GenSpec spec;
  bool vanhorn = false;
  auto* gen_cmd = app.add_subcommand("gen-term", "Print a worst-case term");
  auto* bench_cmd = app.add_subcommand("bench", "Analyze a generated term and print a run report");
  for (CLI::App* cmd : {gen_cmd, bench_cmd}) {
    cmd->add_option("--n", spec.n_bindings, "Calls to f")->check(CLI::PositiveNumber)->capture_default_str();
    cmd->add_option("--k", spec.n_plus, "Nested + applications")->check(CLI::NonNegativeNumber)->capture_default_str();
    cmd->add_option("--padding", spec.padding, "Frames consumed before conflation")
        ->check(CLI::NonNegativeNumber)
        ->capture_default_str();
  }
  gen_cmd->add_flag("--vanhorn", vanhorn, "Print the k-CFA exponential example instead");
  std::string family = "mcfa", engine_name = "datalog";
  bench_cmd->add_option("--family", family, "mcfa or vanhorn")
      ->check(CLI::IsMember({"mcfa", "vanhorn"}))
      ->capture_default_str();
  bench_cmd->add_option("--engine", engine_name, "datalog or worklist")
      ->check(CLI::IsMember({"datalog", "worklist"}))
      ->capture_default_str();
  add_config(bench_cmd, s);

  try {
    std::vector<std::string> rev(args.rbegin(), args.rend());
    app.parse(rev);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return kInputError;
  }

  try {
    if (facts->parsed()) {
      write_facts(extract_facts(load(s, in)), s.out_dir);
      return kOk;
    }
    if (analyze_cmd->parsed() || oracle_cmd->parsed()) {
      const LabeledProgram p = load(s, in);
      const AnalysisConfig cfg = make_config(s);
      AnalysisResult r;
      if (analyze_cmd->parsed()) {
        r = analyze(p, cfg);
      } else {
        oracle::OracleOptions opts;
        opts.fact_ceiling = cfg.fact_ceiling;
        if (trace) opts.trace = &err;
        r = oracle::run_fixpoint(p, cfg, opts);
      }
      emit(r, cfg, s, out);
      return kOk;
    }
    if (diff_cmd->parsed()) {
      const LabeledProgram p = load(s, in);
      const AnalysisConfig cfg = make_config(s);
      oracle::OracleOptions opts;
      opts.fact_ceiling = cfg.fact_ceiling;
      const AnalysisResult a = analyze(p, cfg);
      const AnalysisResult o = oracle::run_fixpoint(p, cfg, opts);
      std::vector<std::string> rels = state_store_relations();
      if (diff_flows) {
        for (const std::string& f : flow_relations()) rels.push_back(f);
      }
      const auto d = compare_results(a, "analyze", o, "oracle", rels);
      if (d.empty()) {
        out << "identical (" << rels.size() << " relations)\n";
        return kOk;
      }
      out << "mismatch in " << d[0].relation << ", only in " << d[0].only_in << ":\t"
          << d[0].line << '\n';
      return kMismatch;
    }
    if (gen_cmd->parsed()) {
      out << (vanhorn ? termgen::gen_vanhorn() + "\n" : termgen::gen_mcfa_worst(spec));
      return kOk;
    }
    if (bench_cmd->parsed()) {
      const std::string src =
          family == "vanhorn" ? termgen::gen_vanhorn() : termgen::gen_mcfa_worst(spec);
      const LabeledProgram p = parse_program(src);
      const AnalysisConfig cfg = make_config(s);
      AnalysisResult r;
      if (engine_name == "datalog") {
        r = analyze(p, cfg);
      } else {
        oracle::OracleOptions opts;
        opts.fact_ceiling = cfg.fact_ceiling;
        r = oracle::run_fixpoint(p, cfg, opts);
      }
      out << run_report_json(r, cfg);
      return kOk;
    }
  } catch (const SourceError& e) {
    err << "error: " << (s.input == "-" ? "<stdin>" : s.input) << ":" << e.what() << '\n';
    return kInputError;
  } catch (const engine::CeilingExceeded& e) {
    err << "error: " << e.what() << '\n';
    return kCeiling;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kInputError;
  }
  return kInputError;
}

}  // namespace schemeflow::cli
