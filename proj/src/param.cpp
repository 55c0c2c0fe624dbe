#include "cabxde/param.hpp"

#include <cmath>
#include <stdexcept>

namespace cabxde {

void AdamOptimizer::step(const std::vector<ParamTensor*>& params) {
  ++t_;
  const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
  for (ParamTensor* p : params) {
    for (std::size_t i = 0; i < p->value.size(); ++i) {
      const double g = p->grad.data[i];
      double& m = p->adam_m.data[i];
      double& v = p->adam_v.data[i];
      m = cfg_.beta1 * m + (1.0 - cfg_.beta1) * g;
      v = cfg_.beta2 * v + (1.0 - cfg_.beta2) * g * g;
      const double m_hat = m / bc1;
      const double v_hat = v / bc2;
      p->value.data[i] -= cfg_.learning_rate * m_hat / (std::sqrt(v_hat) + cfg_.epsilon);
    }
  }
}

double finite_diff_check(const std::function<double()>& f,
                         const std::vector<ParamTensor*>& params, double h) {
  if (h <= 0.0) throw std::invalid_argument("finite_diff_check: h must be positive");
  double worst = 0.0;
  for (ParamTensor* p : params) {
    for (std::size_t i = 0; i < p->value.size(); ++i) {
      const double saved = p->value.data[i];
      p->value.data[i] = saved + h;
      const double f_plus = f();
      p->value.data[i] = saved - h;
      const double f_minus = f();
      p->value.data[i] = saved;
      if (!std::isfinite(f_plus) || !std::isfinite(f_minus))
        throw std::runtime_error("finite_diff_check: non-finite function value at " + p->name);
      const double numeric = (f_plus - f_minus) / (2.0 * h);
      const double analytic = p->grad.data[i];
      const double err = std::fabs(analytic - numeric) / std::max(1.0, std::fabs(numeric));
      worst = std::max(worst, err);
    }
  }
  return worst;
}

}  // namespace cabxde
