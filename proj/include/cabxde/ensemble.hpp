#pragma once

#include <span>
#include <vector>

namespace cabxde {

/// Error-reciprocal weights for the two base models; always sums to 1.
struct ReciprocalWeights {
  double w_bilstm = 0.5;
  double w_gbdt = 0.5;
  bool degenerate = false;  // both errors were zero; fell back to 0.5/0.5
};

/// w_bilstm = e_gbdt / (e_bilstm + e_gbdt), w_gbdt = e_bilstm / (e_bilstm + e_gbdt):
/// the model with the smaller error takes the larger weight.
ReciprocalWeights reciprocal_weights(double e_bilstm, double e_gbdt);

/// Elementwise convex combination of the two prediction series.
std::vector<double> weighted_combine(std::span<const double> p_bilstm,
                                     std::span<const double> p_gbdt,
                                     const ReciprocalWeights& weights);

struct StackingModel {
  double intercept = 0.0;
  double coef_bilstm = 0.0;
  double coef_gbdt = 0.0;
};

/// Ordinary least squares of targets on [1, p_bilstm, p_gbdt] via normal
/// equations, with a 1e-10 ridge fallback on singularity.
StackingModel fit_stacking(std::span<const double> p_bilstm, std::span<const double> p_gbdt,
                           std::span<const double> targets);

std::vector<double> stack_predict(const StackingModel& model, std::span<const double> p_bilstm,
                                  std::span<const double> p_gbdt);

}  // namespace cabxde
