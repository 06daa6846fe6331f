#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "openbias/core/error.hpp"
#include "openbias/numeric/param_store.hpp"
#include "openbias/numeric/tape.hpp"

namespace openbias::nn {

using ScalarFn = std::function<Var(Tape&, const ParamStore&)>;

struct GradCheckFailure {
  std::string name;
  std::size_t index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
  double rel_error = 0.0;
};

struct GradCheckReport {
  std::size_t checked = 0;
  double max_rel_error = 0.0;
  std::string worst_name;
  std::vector<GradCheckFailure> failures;

  bool passed() const { return failures.empty(); }
};

/// |a - n| / max(|a|, |n|, abs_floor). The floor keeps components whose true
/// gradient is ~0 from being judged on rounding noise alone.
inline double relative_error(double analytic, double numeric, double abs_floor) {
  const double denom = std::max({std::fabs(analytic), std::fabs(numeric), abs_floor});
  return std::fabs(analytic - numeric) / denom;
}

/// Compares reverse-mode gradients against central differences
/// (f(θ+h) − f(θ−h)) / 2h for every trainable scalar in `params`.
/// `params` is restored exactly; its gradients hold the analytic result on return.
inline GradCheckReport grad_check(const ScalarFn& f, ParamStore& params, double h = 1e-5, double tol = 1e-4,
                                  double abs_floor = 1e-6) {
  require(h >= 1e-7 && h <= 1e-3, ErrorKind::PreconditionFailed, "finite-difference step must be in [1e-7, 1e-3]");
  params.zero_grad();
  {
    Tape tape;
    Var loss = f(tape, params);
    tape.backward(loss, params);
  }
  auto evaluate = [&] {
    Tape tape;
    return f(tape, params).item();
  };

  GradCheckReport report;
  for (auto& [name, entry] : params.entries()) {
    if (!entry.trainable) continue;
    auto values = entry.value.data();
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double original = values[i];
      values[i] = original + h;
      const double up = evaluate();
      values[i] = original - h;
      const double down = evaluate();
      values[i] = original;
      const double numeric = (up - down) / (2.0 * h);
      const double analytic = entry.grad[i];
      const double rel = relative_error(analytic, numeric, abs_floor);
      ++report.checked;
      if (rel > report.max_rel_error) {
        report.max_rel_error = rel;
        report.worst_name = name + "[" + std::to_string(i) + "]";
      }
      if (!(rel < tol)) report.failures.push_back({name, i, analytic, numeric, rel});
    }
  }
  return report;
}

}  // namespace openbias::nn
