#pragma once

#include <chrono>
#include <cstddef>
#include <filesystem>
#include <map>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "schemeflow/terms.hpp"

namespace schemeflow {

/// Output relations in declaration order.
const std::vector<std::string>& output_relations();
/// The subset compared by `diff` unless flows are requested.
const std::vector<std::string>& state_store_relations();
const std::vector<std::string>& flow_relations();

struct RunStats {
  std::string engine;        // "datalog" or "worklist"
  std::size_t iterations = 0;  // saturation rounds or worklist steps
  std::size_t peak_facts = 0;
  double seconds = 0.0;
};

/// Saturated relations in canonical order (rows sorted by their rendered,
/// tab-joined columns). Terms live in the shared table.
class AnalysisResult {
 public:
  struct Rows {
    std::vector<std::vector<TermId>> tuples;
    std::vector<std::string> lines;
  };

  AnalysisResult() : terms_(std::make_shared<TermTable>()) {}
  explicit AnalysisResult(std::shared_ptr<TermTable> terms) : terms_(std::move(terms)) {}

  TermTable& terms() { return *terms_; }
  const TermTable& terms() const { return *terms_; }
  std::shared_ptr<TermTable> shared_terms() const { return terms_; }

  /// Replaces a relation's rows; sorts them canonically.
  void set(const std::string& relation, std::vector<std::vector<TermId>> tuples);

  const Rows& rows(std::string_view relation) const;
  const std::vector<std::string>& lines(std::string_view relation) const {
    return rows(relation).lines;
  }
  std::size_t count(std::string_view relation) const { return rows(relation).tuples.size(); }
  bool has_line(std::string_view relation, std::string_view line) const;
  std::vector<std::string> relation_names() const;

  RunStats stats;

 private:
  std::shared_ptr<TermTable> terms_;
  std::map<std::string, Rows, std::less<>> relations_;
};

enum class OutputFormat { Tsv, Json };

/// TSV: `<relation>.tsv` per output relation. JSON: `result.json` keyed by
/// relation name. Both byte-deterministic.
void serialize_result(const AnalysisResult& r, OutputFormat format,
                      const std::filesystem::path& dir);
std::string result_to_json(const AnalysisResult& r);
std::string relation_to_tsv(const AnalysisResult& r, std::string_view relation);

/// Reads a TSV result directory back (terms re-interned into a fresh table).
AnalysisResult read_tsv_result(const std::filesystem::path& dir);

/// First line present in exactly one of the two results, for the given
/// relations; empty when they agree.
struct Divergence {
  std::string relation;
  std::string line;
  std::string only_in;  // which side has it
};
std::vector<Divergence> compare_results(const AnalysisResult& left, std::string_view left_name,
                                        const AnalysisResult& right, std::string_view right_name,
                                        const std::vector<std::string>& relations,
                                        std::size_t limit = 1);

}  // namespace schemeflow
