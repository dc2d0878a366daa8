#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "schemeflow/analysis.hpp"
#include "schemeflow/result.hpp"

namespace schemeflow::cli {

enum ExitCode : int {
  kOk = 0,
  kInputError = 1,  // parse, validation and usage errors
  kCeiling = 2,     // divergence guard tripped
  kMismatch = 3,    // `diff` found differing relations
};

/// Default divergence guard, overridden by SCHEMEFLOW_FACT_CEILING.
std::size_t fact_ceiling_from_env();

/// Counts per output relation plus the run statistics, as JSON.
std::string run_report_json(const AnalysisResult& r, const AnalysisConfig& cfg);

/// `args` excludes the program name. Input file "-" (or none) reads `in`.
int run_cli(const std::vector<std::string>& args, std::istream& in, std::ostream& out,
            std::ostream& err);

}  // namespace schemeflow::cli
