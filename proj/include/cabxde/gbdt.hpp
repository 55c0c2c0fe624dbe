#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "cabxde/matrix.hpp"
#include "cabxde/rng.hpp"

namespace cabxde {

/// First and second derivative of the loss at one sample's prediction.
struct GradHess {
  double g = 0.0;
  double h = 0.0;
};

/// l = (target - pred)^2 / 2, so g = pred - target and h = 1.
GradHess grad_hess_squared_error(double pred, double target);

/// Optimal leaf score -T_alpha(G) / (H + lambda), where T_alpha soft-thresholds
/// G toward zero by alpha. alpha = 0 gives the plain closed form.
double leaf_weight(double grad_sum, double hess_sum, double lambda, double alpha);

/// Objective reduction from splitting (G, H) into (G_L, H_L) and (G_R, H_R),
/// net of the per-leaf penalty gamma.
double split_gain(double grad_left, double hess_left, double grad_right, double hess_right,
                  double lambda, double gamma);

/// Flat binary tree; children referenced by index, leaves have feature == -1.
struct TreeNode {
  int feature = -1;
  double threshold = 0.0;
  double weight = 0.0;  // leaf score (unshrunk)
  int left = -1;
  int right = -1;

  bool is_leaf() const { return feature < 0; }
};

struct Tree {
  std::vector<TreeNode> nodes;  // nodes[0] is the root

  double predict(std::span<const double> row) const;
  std::size_t leaf_count() const;
  double leaf_square_sum() const;
};

struct GbdtConfig {
  int n_estimators = 100;
  int max_depth = 8;
  double eta = 0.1;
  double lambda = 1.0;
  double alpha = 10.0;
  double gamma = 2.0;
  double subsample = 1.0;
  std::uint64_t seed = 0;

  void validate() const;
};

struct BoostedModel {
  double base_score = 0.0;
  double eta = 0.1;
  std::vector<Tree> trees;

  std::size_t feature_count = 0;

  /// base_score + eta * sum of tree outputs.
  double predict(std::span<const double> row) const;
  std::vector<double> predict_rows(const Matrix& rows) const;
};

struct BoostRoundLog {
  int round = 0;
  double train_mse = 0.0;
  double objective = 0.0;  // regularized training objective after this round
};

/// Greedy exact split search over every feature and every midpoint between
/// consecutive distinct sorted values. Ties break to the lowest feature
/// index, then the lowest threshold.
Tree build_tree(const Matrix& features, std::span<const std::size_t> sample_idx,
                std::span<const GradHess> grad_hess, const GbdtConfig& config);

BoostedModel fit(const Matrix& features, std::span<const double> targets,
                 const GbdtConfig& config, std::vector<BoostRoundLog>* log = nullptr);

/// Sum of per-sample losses plus the accumulated per-tree penalty
/// gamma * leaves + lambda/2 * sum of effective (shrinkage-scaled) leaf
/// scores, evaluated after every stored tree.
double regularized_objective(const Matrix& features, std::span<const double> targets,
                             const BoostedModel& model, const GbdtConfig& config);

}  // namespace cabxde
