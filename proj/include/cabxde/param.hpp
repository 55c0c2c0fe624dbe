#pragma once

#include <functional>
#include <string>
#include <vector>

#include "cabxde/matrix.hpp"

namespace cabxde {

/// A learnable tensor: value plus gradient and Adam moment buffers, all of
/// one shape. Gradients accumulate until zero_grad() is called explicitly.
struct ParamTensor {
  std::string name;
  Matrix value;
  Matrix grad;
  Matrix adam_m;
  Matrix adam_v;

  ParamTensor() = default;
  ParamTensor(std::string n, std::size_t rows, std::size_t cols)
      : name(std::move(n)),
        value(rows, cols),
        grad(rows, cols),
        adam_m(rows, cols),
        adam_v(rows, cols) {}

  void zero_grad() { std::fill(grad.data.begin(), grad.data.end(), 0.0); }
};

struct AdamConfig {
  double learning_rate = 0.001;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

class AdamOptimizer {
 public:
  explicit AdamOptimizer(AdamConfig cfg = {}) : cfg_(cfg) {}

  void step(const std::vector<ParamTensor*>& params);
  long steps_taken() const { return t_; }

 private:
  AdamConfig cfg_;
  long t_ = 0;
};

/// Central-difference check of the gradients stored in params[i]->grad
/// against the scalar function f (which must read params[i]->value).
/// Returns max over entries of |analytic - numeric| / max(1, |numeric|).
double finite_diff_check(const std::function<double()>& f,
                         const std::vector<ParamTensor*>& params, double h);

}  // namespace cabxde
