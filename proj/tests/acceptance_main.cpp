// Acceptance suite runner: executes every criterion at its pinned tolerance
// and prints one pass/fail line per criterion. Exit status is nonzero if any
// criterion fails.

#include <cstdio>
#include <cstdlib>
#include <string>
#include <vector>

#include "cdl/verify.hpp"

int main(int argc, char** argv) {
  cdl::VerifyOptions opts;
  if (argc > 1) opts.seed = std::strtoull(argv[1], nullptr, 10);
  if (argc > 2) opts.out_dir = argv[2];

  const std::vector<cdl::CriterionResult> results = cdl::run_acceptance(opts);
  int failures = 0;
  for (const auto& r : results) {
    std::printf("[%s] criterion %2d: %-32s (%6.1fs)  %s\n",
                r.pass ? "PASS" : "FAIL", r.id, r.name.c_str(), r.seconds,
                r.details.c_str());
    if (!r.pass) ++failures;
  }
  std::printf("%d/%d criteria passed\n", static_cast<int>(results.size()) - failures,
              static_cast<int>(results.size()));
  return failures == 0 ? 0 : 1;
}
