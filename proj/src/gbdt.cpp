#include "cabxde/gbdt.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "cabxde/errors.hpp"

namespace cabxde {

GradHess grad_hess_squared_error(double pred, double target) {
  if (!std::isfinite(pred) || !std::isfinite(target))
    throw std::invalid_argument("grad_hess_squared_error: non-finite input");
  return {pred - target, 1.0};
}

namespace {

double soft_threshold(double g, double alpha) {
  if (g > alpha) return g - alpha;
  if (g < -alpha) return g + alpha;
  return 0.0;
}

}  // namespace

double leaf_weight(double grad_sum, double hess_sum, double lambda, double alpha) {
  const double denom = hess_sum + lambda;
  if (!(denom > 0.0)) throw std::invalid_argument("leaf_weight: hess_sum + lambda must be > 0");
  return -soft_threshold(grad_sum, alpha) / denom;
}

double split_gain(double grad_left, double hess_left, double grad_right, double hess_right,
                  double lambda, double gamma) {
  const double parent_g = grad_left + grad_right;
  const double parent_h = hess_left + hess_right;
  return 0.5 * (grad_left * grad_left / (hess_left + lambda) +
                grad_right * grad_right / (hess_right + lambda) -
                parent_g * parent_g / (parent_h + lambda)) -
         gamma;
}

double Tree::predict(std::span<const double> row) const {
  int i = 0;
  while (!nodes[i].is_leaf())
    i = row[static_cast<std::size_t>(nodes[i].feature)] < nodes[i].threshold ? nodes[i].left
                                                                             : nodes[i].right;
  return nodes[i].weight;
}

std::size_t Tree::leaf_count() const {
  std::size_t n = 0;
  for (const TreeNode& node : nodes)
    if (node.is_leaf()) ++n;
  return n;
}

double Tree::leaf_square_sum() const {
  double acc = 0.0;
  for (const TreeNode& node : nodes)
    if (node.is_leaf()) acc += node.weight * node.weight;
  return acc;
}

void GbdtConfig::validate() const {
  if (n_estimators < 0) throw input_error("gbdt: n_estimators must be >= 0");
  if (max_depth < 0) throw input_error("gbdt: max_depth must be >= 0");
  if (!(eta > 0.0 && eta <= 1.0)) throw input_error("gbdt: eta must be in (0, 1]");
  if (lambda < 0.0) throw input_error("gbdt: lambda must be >= 0");
  if (alpha < 0.0) throw input_error("gbdt: alpha must be >= 0");
  if (gamma < 0.0) throw input_error("gbdt: gamma must be >= 0");
  if (!(subsample > 0.0 && subsample <= 1.0)) throw input_error("gbdt: subsample must be in (0, 1]");
}

double BoostedModel::predict(std::span<const double> row) const {
  if (row.size() != feature_count)
    throw std::invalid_argument("BoostedModel::predict: row width mismatch");
  double acc = 0.0;
  for (const Tree& tree : trees) acc += tree.predict(row);
  return base_score + eta * acc;
}

std::vector<double> BoostedModel::predict_rows(const Matrix& rows) const {
  std::vector<double> out;
  out.reserve(rows.rows);
  for (std::size_t i = 0; i < rows.rows; ++i)
    out.push_back(predict(std::span(rows.data).subspan(i * rows.cols, rows.cols)));
  return out;
}

namespace {

struct SplitCandidate {
  double gain = 0.0;
  int feature = -1;
  double threshold = 0.0;
};

struct TreeBuilder {
  const Matrix& features;
  std::span<const GradHess> grad_hess;
  const GbdtConfig& config;
  std::vector<TreeNode> nodes;
  std::vector<std::size_t> scratch;

  int build(std::vector<std::size_t>& idx, int depth) {
    double g_total = 0.0, h_total = 0.0;
    for (std::size_t i : idx) {
      g_total += grad_hess[i].g;
      h_total += grad_hess[i].h;
    }

    const int node_id = static_cast<int>(nodes.size());
    nodes.emplace_back();

    SplitCandidate best;
    if (depth < config.max_depth && idx.size() >= 2) best = find_best_split(idx, g_total, h_total);

    if (best.feature < 0 || !(best.gain > 0.0)) {
      nodes[node_id].weight = leaf_weight(g_total, h_total, config.lambda, config.alpha);
      return node_id;
    }

    std::vector<std::size_t> left, right;
    left.reserve(idx.size());
    right.reserve(idx.size());
    for (std::size_t i : idx)
      (features(i, static_cast<std::size_t>(best.feature)) < best.threshold ? left : right)
          .push_back(i);

    nodes[node_id].feature = best.feature;
    nodes[node_id].threshold = best.threshold;
    idx.clear();
    idx.shrink_to_fit();
    nodes[node_id].left = build(left, depth + 1);
    nodes[node_id].right = build(right, depth + 1);
    return node_id;
  }

  SplitCandidate find_best_split(const std::vector<std::size_t>& idx, double g_total,
                                 double h_total) {
    SplitCandidate best;
    scratch = idx;
    for (std::size_t f = 0; f < features.cols; ++f) {
      std::stable_sort(scratch.begin(), scratch.end(), [&](std::size_t a, std::size_t b) {
        return features(a, f) < features(b, f);
      });
      double g_left = 0.0, h_left = 0.0;
      for (std::size_t k = 1; k < scratch.size(); ++k) {
        g_left += grad_hess[scratch[k - 1]].g;
        h_left += grad_hess[scratch[k - 1]].h;
        const double lo = features(scratch[k - 1], f);
        const double hi = features(scratch[k], f);
        if (!(hi > lo)) continue;  // only split between distinct values
        const double threshold = lo + (hi - lo) / 2.0;
        const double gain = split_gain(g_left, h_left, g_total - g_left, h_total - h_left,
                                       config.lambda, config.gamma);
        if (gain > best.gain) best = {gain, static_cast<int>(f), threshold};
      }
    }
    return best;
  }
};

}  // namespace

Tree build_tree(const Matrix& features, std::span<const std::size_t> sample_idx,
                std::span<const GradHess> grad_hess, const GbdtConfig& config) {
  if (sample_idx.empty()) throw std::invalid_argument("build_tree: empty sample set");
  TreeBuilder builder{features, grad_hess, config, {}, {}};
  std::vector<std::size_t> idx(sample_idx.begin(), sample_idx.end());
  builder.build(idx, 0);
  return Tree{std::move(builder.nodes)};
}

BoostedModel fit(const Matrix& features, std::span<const double> targets,
                 const GbdtConfig& config, std::vector<BoostRoundLog>* log) {
  config.validate();
  const std::size_t n = features.rows;
  if (n == 0) throw input_error("gbdt fit: empty dataset");
  if (targets.size() != n) throw std::invalid_argument("gbdt fit: target count mismatch");

  BoostedModel model;
  model.feature_count = features.cols;
  model.eta = config.eta;
  model.base_score =
      std::accumulate(targets.begin(), targets.end(), 0.0) / static_cast<double>(n);

  std::vector<double> preds(n, model.base_score);
  std::vector<GradHess> grad_hess(n);
  std::vector<std::size_t> all_rows(n);
  std::iota(all_rows.begin(), all_rows.end(), 0);

  Rng rng(config.seed);
  double omega_acc = 0.0;

  for (int round = 1; round <= config.n_estimators; ++round) {
    for (std::size_t i = 0; i < n; ++i)
      grad_hess[i] = grad_hess_squared_error(preds[i], targets[i]);

    std::vector<std::size_t> rows_used;
    if (config.subsample < 1.0) {
      rows_used = all_rows;
      rng.shuffle(rows_used);
      const auto k = std::max<std::size_t>(
          1, static_cast<std::size_t>(std::floor(config.subsample * static_cast<double>(n) + 0.5)));
      rows_used.resize(std::min(k, n));
      std::sort(rows_used.begin(), rows_used.end());
    }

    Tree tree = build_tree(features, config.subsample < 1.0 ? std::span<const std::size_t>(rows_used)
                                                            : std::span<const std::size_t>(all_rows),
                           grad_hess, config);

    for (std::size_t i = 0; i < n; ++i)
      preds[i] += config.eta *
                  tree.predict(std::span(features.data).subspan(i * features.cols, features.cols));

    omega_acc += config.gamma * static_cast<double>(tree.leaf_count()) +
                 0.5 * config.lambda * config.eta * config.eta * tree.leaf_square_sum();
    model.trees.push_back(std::move(tree));

    if (log) {
      double sq = 0.0, half_sq = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        const double r = targets[i] - preds[i];
        sq += r * r;
        half_sq += 0.5 * r * r;
      }
      log->push_back({round, sq / static_cast<double>(n), half_sq + omega_acc});
    }
  }
  return model;
}

double regularized_objective(const Matrix& features, std::span<const double> targets,
                             const BoostedModel& model, const GbdtConfig& config) {
  double loss = 0.0;
  for (std::size_t i = 0; i < features.rows; ++i) {
    const double pred =
        model.predict(std::span(features.data).subspan(i * features.cols, features.cols));
    const double r = targets[i] - pred;
    loss += 0.5 * r * r;
  }
  double omega = 0.0;
  for (const Tree& tree : model.trees)
    omega += config.gamma * static_cast<double>(tree.leaf_count()) +
             0.5 * config.lambda * model.eta * model.eta * tree.leaf_square_sum();
  return loss + omega;
}

}  // namespace cabxde
