// Acceptance gate: runs the full oracle suite and prints one pass/fail
// line per criterion with the measured value and its pinned tolerance.
#include <chrono>
#include <cstdio>
#include <filesystem>

#include "hessmatch/pipeline.hpp"

int main() {
  namespace fs = std::filesystem;
  const fs::path scratch = fs::temp_directory_path() / "hessmatch_acceptance";
  fs::remove_all(scratch);

  const auto start = std::chrono::steady_clock::now();
  const std::vector<hm::CheckResult> results = hm::run_verification_checks(scratch.string());
  const double elapsed =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

  int failures = 0;
  for (const auto& r : results) {
    std::printf("[%s] %-28s measured=%.6g tolerance=%.6g %s\n", r.pass ? "PASS" : "FAIL",
                r.name.c_str(), r.measured, r.tolerance, r.detail.c_str());
    if (!r.pass) ++failures;
  }
  std::printf("%d/%zu criteria passed in %.2f s\n", static_cast<int>(results.size()) - failures,
              results.size(), elapsed);

  fs::remove_all(scratch);
  return failures == 0 ? 0 : 1;
}
