#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "drunet/gradcheck.hpp"

namespace drunet {

struct GradSuiteOptions {
  double tolerance = 1e-4;
  double step = 1e-6;
  double floor = kGradCheckFloor;
  int seeds = 20;
  std::uint64_t base_seed = 0;
  /// Only run these entries (all when empty).
  std::vector<std::string> only;
  /// Negative control: multiplies the analytic gradient flowing out of the
  /// named entry by `fault_scale`, leaving its forward value untouched.
  std::optional<std::string> inject_fault;
  double fault_scale = 1.5;
};

struct GradSuiteResult {
  std::string name;
  int seeds = 0;
  std::size_t checked = 0;  // number of scalar comparisons
  double max_rel_error = 0.0;
  std::uint64_t worst_seed = 0;
  bool passed = true;
};

/// Names of every entry: single ops, two block stacks, and the 16x16
/// miniature full model.
std::vector<std::string> gradient_suite_entries();

/// Runs finite-difference checks in double precision. Throws
/// std::invalid_argument for an unknown entry name.
std::vector<GradSuiteResult> run_gradient_suite(const GradSuiteOptions& options);

}  // namespace drunet
