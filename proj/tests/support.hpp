#pragma once

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "schemeflow/analysis.hpp"
#include "schemeflow/frontend.hpp"
#include "schemeflow/oracle.hpp"
#include "schemeflow/result.hpp"

namespace schemeflow::testing {

inline const char* kTwoCalls =
    "(let ([f (lambda (x) x)])\n"
    "  (let ([a (f #t)] [b (f #f)])\n"
    "    (if a 4 5)))\n";

inline std::filesystem::path corpus_dir() { return SCHEMEFLOW_CORPUS_DIR; }

inline std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

inline std::vector<std::filesystem::path> corpus_files() {
  std::vector<std::filesystem::path> out;
  for (const auto& e : std::filesystem::directory_iterator(corpus_dir())) {
    if (e.path().extension() == ".scm") out.push_back(e.path());
  }
  std::sort(out.begin(), out.end());
  return out;
}

inline AnalysisConfig config(unsigned m, Truthiness t = Truthiness::BothBranches) {
  AnalysisConfig c;
  c.m = m;
  c.truthiness = t;
  return c;
}

/// Values stored at each address whose variable is `var`, keyed by the
/// rendered address.
inline std::map<std::string, std::set<std::string>> values_of(const AnalysisResult& r,
                                                              std::string_view var) {
  std::map<std::string, std::set<std::string>> out;
  const std::string prefix = "(VAddress " + std::string(var) + " ";
  for (const std::string& line : r.lines("stored_val")) {
    if (line.rfind(prefix, 0) != 0) continue;
    const auto tab = line.find('\t');
    out[line.substr(0, tab)].insert(line.substr(tab + 1));
  }
  return out;
}

/// First column of every state_a row.
inline std::set<std::string> reached_values(const AnalysisResult& r) {
  std::set<std::string> out;
  for (const std::string& line : r.lines("state_a")) out.insert(line.substr(0, line.find('\t')));
  return out;
}

inline std::filesystem::path fresh_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("schemeflow_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace schemeflow::testing
