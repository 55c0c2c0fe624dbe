#pragma once

#include <cstddef>
#include <span>

namespace cabxde {

struct EvalResult {
  double mape = 0.0;  // fraction, not percent
  double mae = 0.0;
  double rmse = 0.0;
  std::size_t n = 0;
};

/// Mean absolute percentage error as a fraction. Every real value must be
/// nonzero; percent formatting is display-only.
double mape(std::span<const double> real, std::span<const double> pred);
double mae(std::span<const double> real, std::span<const double> pred);
double rmse(std::span<const double> real, std::span<const double> pred);

EvalResult evaluate(std::span<const double> real, std::span<const double> pred);

}  // namespace cabxde
