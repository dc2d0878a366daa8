#include "schemeflow/result.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace schemeflow {

const std::vector<std::string>& output_relations() {
  static const std::vector<std::string> names = {
      "state_e", "state_a", "stored_val", "stored_kont", "flow_ee", "flow_ea",
      "flow_aa", "flow_ae", "peek_ctx",   "copy_ctx",    "freevar"};
  return names;
}

const std::vector<std::string>& state_store_relations() {
  static const std::vector<std::string> names = {"state_e", "state_a", "stored_val",
                                                 "stored_kont"};
  return names;
}

const std::vector<std::string>& flow_relations() {
  static const std::vector<std::string> names = {"flow_ee", "flow_ea", "flow_aa", "flow_ae"};
  return names;
}

void AnalysisResult::set(const std::string& relation, std::vector<std::vector<TermId>> tuples) {
  std::vector<std::pair<std::string, std::vector<TermId>>> keyed;
  keyed.reserve(tuples.size());
  for (auto& t : tuples) {
    std::string line;
    for (std::size_t c = 0; c < t.size(); ++c) {
      if (c) line.push_back('\t');
      terms_->render_to(line, t[c]);
    }
    keyed.emplace_back(std::move(line), std::move(t));
  }
  std::sort(keyed.begin(), keyed.end());
  keyed.erase(std::unique(keyed.begin(), keyed.end(),
                          [](const auto& a, const auto& b) { return a.first == b.first; }),
              keyed.end());
  Rows rows;
  for (auto& [line, t] : keyed) {
    rows.lines.push_back(std::move(line));
    rows.tuples.push_back(std::move(t));
  }
  relations_[relation] = std::move(rows);
}

const AnalysisResult::Rows& AnalysisResult::rows(std::string_view relation) const {
  static const Rows kEmpty;
  auto it = relations_.find(relation);
  return it == relations_.end() ? kEmpty : it->second;
}

bool AnalysisResult::has_line(std::string_view relation, std::string_view line) const {
  const auto& ls = lines(relation);
  return std::binary_search(ls.begin(), ls.end(), line,
                            [](std::string_view a, std::string_view b) { return a < b; });
}

std::vector<std::string> AnalysisResult::relation_names() const {
  std::vector<std::string> out;
  for (const auto& [name, _] : relations_) out.push_back(name);
  return out;
}

std::string relation_to_tsv(const AnalysisResult& r, std::string_view relation) {
  std::string out;
  for (const std::string& line : r.lines(relation)) {
    out += line;
    out.push_back('\n');
  }
  return out;
}

std::string result_to_json(const AnalysisResult& r) {
  nlohmann::ordered_json doc = nlohmann::ordered_json::object();
  for (const std::string& rel : output_relations()) {
    nlohmann::ordered_json rows = nlohmann::ordered_json::array();
    for (const auto& tuple : r.rows(rel).tuples) {
      nlohmann::ordered_json row = nlohmann::ordered_json::array();
      for (TermId t : tuple) row.push_back(r.terms().render(t));
      rows.push_back(std::move(row));
    }
    doc[rel] = std::move(rows);
  }
  return doc.dump(1) + "\n";
}

namespace {
void write_file(const std::filesystem::path& p, const std::string& content) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + p.string());
  out << content;
  if (!out) throw std::runtime_error("write failed: " + p.string());
}
}  // namespace

void serialize_result(const AnalysisResult& r, OutputFormat format,
                      const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  if (format == OutputFormat::Json) {
    write_file(dir / "result.json", result_to_json(r));
    return;
  }
  for (const std::string& rel : output_relations()) {
    write_file(dir / (rel + ".tsv"), relation_to_tsv(r, rel));
  }
}

AnalysisResult read_tsv_result(const std::filesystem::path& dir) {
  AnalysisResult out;
  for (const std::string& rel : output_relations()) {
    std::ifstream in(dir / (rel + ".tsv"), std::ios::binary);
    if (!in) throw std::runtime_error("missing " + (dir / (rel + ".tsv")).string());
    std::vector<std::vector<TermId>> tuples;
    std::string line;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      std::vector<TermId> t;
      std::stringstream cols(line);
      std::string col;
      while (std::getline(cols, col, '\t')) t.push_back(out.terms().parse(col));
      tuples.push_back(std::move(t));
    }
    out.set(rel, std::move(tuples));
  }
  return out;
}

std::vector<Divergence> compare_results(const AnalysisResult& left, std::string_view left_name,
                                        const AnalysisResult& right, std::string_view right_name,
                                        const std::vector<std::string>& relations,
                                        std::size_t limit) {
  std::vector<Divergence> out;
  for (const std::string& rel : relations) {
    const auto& a = left.lines(rel);
    const auto& b = right.lines(rel);
    std::size_t i = 0, j = 0;
    while ((i < a.size() || j < b.size()) && out.size() < limit) {
      if (j == b.size() || (i < a.size() && a[i] < b[j])) {
        out.push_back({rel, a[i++], std::string(left_name)});
      } else if (i == a.size() || b[j] < a[i]) {
        out.push_back({rel, b[j++], std::string(right_name)});
      } else {
        ++i;
        ++j;
      }
    }
    if (out.size() >= limit) break;
  }
  return out;
}

}  // namespace schemeflow
