#pragma once

#include <cmath>
#include <map>
#include <string>

#include "openbias/numeric/param_store.hpp"

namespace openbias::train {

/// Adam with bias correction; state is keyed by parameter name and only
/// trainable entries are updated.
class Adam {
 public:
  explicit Adam(double lr, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
      : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {}

  void step(nn::ParamStore& store) {
    ++t_;
    const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    for (auto& [name, e] : store.entries()) {
      if (!e.trainable) continue;
      auto& [m, v] = moments_[name];
      if (m.size() != e.value.size()) {
        m.assign(e.value.size(), 0.0);
        v.assign(e.value.size(), 0.0);
      }
      auto w = e.value.data();
      auto g = e.grad.data();
      for (std::size_t i = 0; i < w.size(); ++i) {
        m[i] = beta1_ * m[i] + (1.0 - beta1_) * g[i];
        v[i] = beta2_ * v[i] + (1.0 - beta2_) * g[i] * g[i];
        w[i] -= lr_ * (m[i] / c1) / (std::sqrt(v[i] / c2) + eps_);
      }
    }
  }

  std::size_t steps() const { return t_; }

 private:
  double lr_, beta1_, beta2_, eps_;
  std::size_t t_ = 0;
  std::map<std::string, std::pair<std::vector<double>, std::vector<double>>> moments_;
};

}  // namespace openbias::train
