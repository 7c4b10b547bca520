#include "drunet/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace drunet {

double relative_error(double analytic, double numeric, double floor) {
  const double scale = std::max({std::abs(analytic), std::abs(numeric), floor});
  return std::abs(analytic - numeric) / scale;
}

namespace {

void note(GradCheckReport& r, std::size_t index, double err) {
  if (r.checked++ == 0 || err > r.max_rel_error) {
    r.max_rel_error = err;
    r.worst_index = index;
  }
}

double finite_or_throw(double v) {
  if (!std::isfinite(v)) throw NonFiniteError("gradient check: function value is not finite");
  return v;
}

}  // namespace

GradCheckReport finite_difference_check(const ScalarFn& f, const Tensor<double>& x, double h,
                                        double tol, std::span<const std::size_t> indices,
                                        double floor) {
  Tensor<double> analytic;
  {
    Tape<double> tape;
    Var<double> xv = tape.variable(x);
    Var<double> y = f(tape, xv);
    finite_or_throw(y.value().item());
    tape.backward(y);
    analytic = tape.grad(xv.id());
  }
  auto eval = [&](const Tensor<double>& at) {
    Tape<double> tape;
    return finite_or_throw(f(tape, tape.constant(at)).value().item());
  };

  std::vector<std::size_t> all;
  if (indices.empty()) {
    all.resize(x.numel());
    std::iota(all.begin(), all.end(), std::size_t{0});
    indices = all;
  }

  GradCheckReport report;
  report.tolerance = tol;
  Tensor<double> probe = x;
  for (std::size_t i : indices) {
    const double orig = probe[i];
    probe[i] = orig + h;
    const double up = eval(probe);
    probe[i] = orig - h;
    const double down = eval(probe);
    probe[i] = orig;
    note(report, i, relative_error(analytic[i], (up - down) / (2.0 * h), floor));
  }
  report.passed = report.max_rel_error <= tol;
  return report;
}

GradCheckReport finite_difference_check_slots(const std::function<double()>& eval,
                                              std::span<double* const> slots,
                                              std::span<const double> analytic, double h,
                                              double tol, double floor) {
  GradCheckReport report;
  report.tolerance = tol;
  for (std::size_t i = 0; i < slots.size(); ++i) {
    double& s = *slots[i];
    const double orig = s;
    s = orig + h;
    const double up = finite_or_throw(eval());
    s = orig - h;
    const double down = finite_or_throw(eval());
    s = orig;
    note(report, i, relative_error(analytic[i], (up - down) / (2.0 * h), floor));
  }
  report.passed = report.max_rel_error <= tol;
  return report;
}

}  // namespace drunet
