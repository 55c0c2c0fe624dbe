#include "cabxde/ensemble.hpp"

#include <array>
#include <cmath>
#include <stdexcept>

#include "cabxde/errors.hpp"

namespace cabxde {

ReciprocalWeights reciprocal_weights(double e_bilstm, double e_gbdt) {
  if (e_bilstm < 0.0 || e_gbdt < 0.0)
    throw std::invalid_argument("reciprocal_weights: errors must be non-negative");
  const double total = e_bilstm + e_gbdt;
  if (total == 0.0) return {0.5, 0.5, true};
  return {e_gbdt / total, e_bilstm / total, false};
}

std::vector<double> weighted_combine(std::span<const double> p_bilstm,
                                     std::span<const double> p_gbdt,
                                     const ReciprocalWeights& weights) {
  if (p_bilstm.size() != p_gbdt.size())
    throw std::invalid_argument("weighted_combine: series lengths differ");
  std::vector<double> out(p_bilstm.size());
  for (std::size_t i = 0; i < out.size(); ++i)
    out[i] = weights.w_bilstm * p_bilstm[i] + weights.w_gbdt * p_gbdt[i];
  return out;
}

namespace {

// 3x3 linear solve by Gaussian elimination with partial pivoting. Pivots are
// judged against the matrix scale so exact collinearity that rounds to a
// tiny nonzero pivot is still reported as singular.
bool solve3(std::array<std::array<double, 3>, 3> a, std::array<double, 3> b,
            std::array<double, 3>& x) {
  double scale = 0.0;
  for (const auto& row : a)
    for (double v : row) scale = std::max(scale, std::fabs(v));
  const double tiny = 1e-12 * std::max(1.0, scale);

  for (int col = 0; col < 3; ++col) {
    int pivot = col;
    for (int r = col + 1; r < 3; ++r)
      if (std::fabs(a[r][col]) > std::fabs(a[pivot][col])) pivot = r;
    if (std::fabs(a[pivot][col]) < tiny) return false;
    std::swap(a[col], a[pivot]);
    std::swap(b[col], b[pivot]);
    for (int r = col + 1; r < 3; ++r) {
      const double factor = a[r][col] / a[col][col];
      for (int c = col; c < 3; ++c) a[r][c] -= factor * a[col][c];
      b[r] -= factor * b[col];
    }
  }
  for (int col = 2; col >= 0; --col) {
    double acc = b[col];
    for (int c = col + 1; c < 3; ++c) acc -= a[col][c] * x[c];
    x[col] = acc / a[col][col];
  }
  return x[0] == x[0] && x[1] == x[1] && x[2] == x[2];
}

}  // namespace

StackingModel fit_stacking(std::span<const double> p_bilstm, std::span<const double> p_gbdt,
                           std::span<const double> targets) {
  const std::size_t n = targets.size();
  if (p_bilstm.size() != n || p_gbdt.size() != n)
    throw std::invalid_argument("fit_stacking: series lengths differ");
  if (n < 3) throw input_error("fit_stacking: need at least 3 samples");

  // Normal equations for X = [1, p_bilstm, p_gbdt].
  std::array<std::array<double, 3>, 3> xtx{};
  std::array<double, 3> xty{};
  for (std::size_t i = 0; i < n; ++i) {
    const std::array<double, 3> row = {1.0, p_bilstm[i], p_gbdt[i]};
    for (int r = 0; r < 3; ++r) {
      for (int c = 0; c < 3; ++c) xtx[r][c] += row[r] * row[c];
      xty[r] += row[r] * targets[i];
    }
  }

  std::array<double, 3> coef{};
  if (!solve3(xtx, xty, coef)) {
    for (int d = 0; d < 3; ++d) xtx[d][d] += 1e-10;
    if (!solve3(xtx, xty, coef))
      throw std::runtime_error("fit_stacking: rank-deficient system after ridge fallback");
  }
  return {coef[0], coef[1], coef[2]};
}

std::vector<double> stack_predict(const StackingModel& model, std::span<const double> p_bilstm,
                                  std::span<const double> p_gbdt) {
  if (p_bilstm.size() != p_gbdt.size())
    throw std::invalid_argument("stack_predict: series lengths differ");
  std::vector<double> out(p_bilstm.size());
  for (std::size_t i = 0; i < out.size(); ++i)
    out[i] = model.intercept + model.coef_bilstm * p_bilstm[i] + model.coef_gbdt * p_gbdt[i];
  return out;
}

}  // namespace cabxde
