#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

namespace updp {

struct GradcheckOptions {
  std::size_t instances = 100;
  std::uint64_t seed = 0;
  std::size_t dim = 16;
  std::size_t length = 8;
  double step = 1e-5;
  double tolerance = 1e-6;
  /// Drops the 1/L mean-pool factor from the analytic gradient, so the
  /// checker itself can be seen to fail.
  bool inject_bug = false;
};

struct GradcheckReport {
  std::vector<double> relative_errors;  ///< one per instance
  double max_relative_error = 0.0;
  std::size_t failures = 0;

  bool passed() const { return failures == 0 && !relative_errors.empty(); }
};

/// Compares alignment_grad with central differences on seeded random
/// (encoder, prompt, image feature) instances. The error of an instance is
/// max|analytic - numeric| / max(max|analytic|, max|numeric|).
GradcheckReport run_gradcheck(const GradcheckOptions& options);

}  // namespace updp
