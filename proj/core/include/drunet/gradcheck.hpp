#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "drunet/autodiff.hpp"

namespace drunet {

struct GradCheckReport {
  double max_rel_error = 0.0;
  std::size_t worst_index = 0;
  std::size_t checked = 0;
  double tolerance = 0.0;
  bool passed = true;
};

/// Denominator floor. Central differences at h = 1e-6 carry roughly
/// eps * |f| / h ~ 1e-10 of rounding noise, so gradients below the floor are
/// compared on an absolute scale (|a - n| <= tol * floor). Otherwise an
/// exactly-zero gradient, such as a conv bias feeding a batch norm, turns
/// that noise into an unbounded ratio.
inline constexpr double kGradCheckFloor = 1e-4;

/// |a - n| / max(|a|, |n|, kGradCheckFloor).
double relative_error(double analytic, double numeric, double floor = kGradCheckFloor);

/// Scalar-valued function of one tensor, built on the given tape.
using ScalarFn = std::function<Var<double>(Tape<double>&, Var<double>)>;

/// Compares the tape gradient of f at x against central differences
/// (f(x + h e_i) - f(x - h e_i)) / 2h. `indices` restricts the comparison to
/// selected elements; empty means every element.
GradCheckReport finite_difference_check(const ScalarFn& f, const Tensor<double>& x, double h,
                                        double tol, std::span<const std::size_t> indices = {},
                                        double floor = kGradCheckFloor);

/// Same comparison over arbitrary scalar slots (e.g. individual model
/// parameters). `analytic[i]` is the gradient already computed for
/// `*slots[i]`; `eval` must recompute the loss from the current slot values.
GradCheckReport finite_difference_check_slots(const std::function<double()>& eval,
                                              std::span<double* const> slots,
                                              std::span<const double> analytic, double h,
                                              double tol, double floor = kGradCheckFloor);

}  // namespace drunet
