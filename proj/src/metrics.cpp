#include "cabxde/metrics.hpp"

#include <cmath>
#include <stdexcept>

#include "cabxde/errors.hpp"

namespace cabxde {

namespace {

void check_lengths(std::span<const double> real, std::span<const double> pred) {
  if (real.size() != pred.size())
    throw std::invalid_argument("metrics: series lengths differ");
  if (real.empty()) throw std::invalid_argument("metrics: empty series");
}

}  // namespace

double mape(std::span<const double> real, std::span<const double> pred) {
  check_lengths(real, pred);
  double acc = 0.0;
  for (std::size_t i = 0; i < real.size(); ++i) {
    if (real[i] == 0.0) throw input_error("mape: undefined, real value at index " +
                                          std::to_string(i) + " is zero");
    acc += std::fabs(real[i] - pred[i]) / std::fabs(real[i]);
  }
  return acc / static_cast<double>(real.size());
}

double mae(std::span<const double> real, std::span<const double> pred) {
  check_lengths(real, pred);
  double acc = 0.0;
  for (std::size_t i = 0; i < real.size(); ++i) acc += std::fabs(real[i] - pred[i]);
  return acc / static_cast<double>(real.size());
}

double rmse(std::span<const double> real, std::span<const double> pred) {
  check_lengths(real, pred);
  double acc = 0.0;
  for (std::size_t i = 0; i < real.size(); ++i) {
    const double d = real[i] - pred[i];
    acc += d * d;
  }
  return std::sqrt(acc / static_cast<double>(real.size()));
}

EvalResult evaluate(std::span<const double> real, std::span<const double> pred) {
  return {mape(real, pred), mae(real, pred), rmse(real, pred), real.size()};
}

}  // namespace cabxde
