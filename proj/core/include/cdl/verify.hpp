#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace cdl {

/// One acceptance criterion outcome. `details` is deterministic text (numbers
/// pass through fixed-precision formatting); `seconds` is wall time and is
/// kept out of the deterministic report.
struct CriterionResult {
  int id = 0;
  std::string name;
  bool pass = false;
  std::string details;
  double seconds = 0.0;
};

struct VerifyOptions {
  std::uint64_t seed = 20240915;
  std::string out_dir;  // empty: no artifact files
};

/// Runs the full acceptance suite (all fourteen criteria) with pinned models,
/// grids and tolerances. Criteria are independent; a failure in one does not
/// stop the others.
std::vector<CriterionResult> run_acceptance(const VerifyOptions& opts);

/// Deterministic machine-readable report (no timings).
std::string acceptance_report_json(const std::vector<CriterionResult>& results,
                                   std::uint64_t seed);
/// Wall-time sidecar, intentionally separate from the deterministic report.
std::string acceptance_timing_json(const std::vector<CriterionResult>& results);

bool all_pass(const std::vector<CriterionResult>& results);

}  // namespace cdl
