#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "cabxde/errors.hpp"
#include "cabxde/gbdt.hpp"
#include "cabxde/rng.hpp"

using namespace cabxde;

namespace {

// Independent exhaustive search over all (feature, midpoint) pairs; plain
// loops, no shared code with the builder.
double brute_force_best_gain(const Matrix& x, std::span<const GradHess> gh, double lambda,
                             double gamma) {
  double best = -1e300;
  for (std::size_t f = 0; f < x.cols; ++f) {
    std::vector<double> values;
    for (std::size_t i = 0; i < x.rows; ++i) values.push_back(x(i, f));
    std::sort(values.begin(), values.end());
    values.erase(std::unique(values.begin(), values.end()), values.end());
    for (std::size_t k = 1; k < values.size(); ++k) {
      const double thr = values[k - 1] + (values[k] - values[k - 1]) / 2.0;
      double gl = 0, hl = 0, gr = 0, hr = 0;
      for (std::size_t i = 0; i < x.rows; ++i) {
        if (x(i, f) < thr) {
          gl += gh[i].g;
          hl += gh[i].h;
        } else {
          gr += gh[i].g;
          hr += gh[i].h;
        }
      }
      const double gain = 0.5 * (gl * gl / (hl + lambda) + gr * gr / (hr + lambda) -
                                 (gl + gr) * (gl + gr) / (hl + hr + lambda)) -
                          gamma;
      best = std::max(best, gain);
    }
  }
  return best;
}

double realized_root_gain(const Tree& tree, const Matrix& x, std::span<const GradHess> gh,
                          double lambda, double gamma) {
  const TreeNode& root = tree.nodes[0];
  double gl = 0, hl = 0, gr = 0, hr = 0;
  for (std::size_t i = 0; i < x.rows; ++i) {
    if (x(i, static_cast<std::size_t>(root.feature)) < root.threshold) {
      gl += gh[i].g;
      hl += gh[i].h;
    } else {
      gr += gh[i].g;
      hr += gh[i].h;
    }
  }
  return split_gain(gl, hl, gr, hr, lambda, gamma);
}

}  // namespace

TEST_CASE("grad_hess_squared_error") {
  CHECK(grad_hess_squared_error(5.0, 5.0).g == 0.0);
  CHECK(grad_hess_squared_error(5.0, 5.0).h == 1.0);
  CHECK(grad_hess_squared_error(0.0, 10.0).g == -10.0);
  CHECK(grad_hess_squared_error(0.0, 10.0).h == 1.0);
  // h constant = 1 makes g linear in pred
  const double delta = 0.37;
  CHECK(grad_hess_squared_error(2.0 + delta, 7.0).g - grad_hess_squared_error(2.0, 7.0).g ==
        doctest::Approx(delta).epsilon(1e-15));
}

TEST_CASE("leaf_weight closed form") {
  CHECK(leaf_weight(-10.0, 1.0, 1.0, 0.0) == doctest::Approx(5.0).epsilon(1e-15));
  // unregularized optimum is the mean residual
  CHECK(leaf_weight(-12.0, 4.0, 0.0, 0.0) == doctest::Approx(3.0).epsilon(1e-15));
  // |G| <= alpha collapses the leaf to zero
  CHECK(leaf_weight(9.9, 3.0, 1.0, 10.0) == 0.0);
  CHECK(leaf_weight(-10.0, 3.0, 1.0, 10.0) == 0.0);
  CHECK(leaf_weight(15.0, 4.0, 1.0, 10.0) == doctest::Approx(-1.0).epsilon(1e-15));
  CHECK_THROWS_AS(leaf_weight(1.0, 0.0, 0.0, 0.0), std::invalid_argument);
}

TEST_CASE("split_gain") {
  // symmetric halves collapse the bracket, leaving -gamma
  CHECK(split_gain(5.0, 3.0, 5.0, 3.0, 0.0, 2.0) == doctest::Approx(-2.0).epsilon(1e-12));
  CHECK(split_gain(-10.0, 5.0, 10.0, 5.0, 0.0, 0.0) == doctest::Approx(20.0).epsilon(1e-12));
  CHECK(split_gain(-10.0, 5.0, 10.0, 5.0, 0.0, 2.0) == doctest::Approx(18.0).epsilon(1e-12));
}

TEST_CASE("build_tree on tiny datasets") {
  GbdtConfig cfg;
  cfg.max_depth = 4;
  cfg.lambda = 0.0;
  cfg.alpha = 0.0;
  cfg.gamma = 0.0;

  SUBCASE("constant residuals give a single leaf") {
    Matrix x(4, 1);
    for (int i = 0; i < 4; ++i) x(i, 0) = i;
    std::vector<GradHess> gh(4, {-2.5, 1.0});
    std::vector<std::size_t> idx = {0, 1, 2, 3};
    const Tree tree = build_tree(x, idx, gh, cfg);
    REQUIRE(tree.nodes.size() == 1);
    CHECK(tree.nodes[0].is_leaf());
    CHECK(tree.nodes[0].weight == doctest::Approx(2.5).epsilon(1e-15));
  }

  SUBCASE("two samples with distinct targets split at the midpoint") {
    Matrix x(2, 1);
    x(0, 0) = 1.0;
    x(1, 0) = 3.0;
    const std::vector<GradHess> gh = {{-1.0, 1.0}, {-5.0, 1.0}};  // residuals 1 and 5
    const std::vector<std::size_t> idx = {0, 1};
    const Tree tree = build_tree(x, idx, gh, cfg);
    REQUIRE(tree.nodes.size() == 3);
    CHECK(tree.nodes[0].feature == 0);
    CHECK(tree.nodes[0].threshold == doctest::Approx(2.0).epsilon(1e-15));
    const double w_left = tree.predict(std::vector{1.0});
    const double w_right = tree.predict(std::vector{3.0});
    CHECK(w_left == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(w_right == doctest::Approx(5.0).epsilon(1e-15));
  }
}

TEST_CASE("root split matches brute force on random datasets") {
  Rng rng(2024);
  GbdtConfig cfg;
  cfg.max_depth = 3;
  cfg.lambda = 1.0;
  cfg.gamma = 0.5;
  cfg.alpha = 0.0;

  for (int trial = 0; trial < 60; ++trial) {
    const std::size_t n = 2 + rng.below(63);
    const std::size_t f = 1 + rng.below(4);
    Matrix x(n, f);
    // draw from a coarse grid so duplicate values show up
    for (double& v : x.data) v = static_cast<double>(rng.below(12)) / 3.0;
    std::vector<GradHess> gh(n);
    for (auto& g : gh) g = {rng.uniform(-4.0, 4.0), 1.0};
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);

    const Tree tree = build_tree(x, idx, gh, cfg);
    const double brute = brute_force_best_gain(x, gh, cfg.lambda, cfg.gamma);
    if (tree.nodes[0].is_leaf()) {
      CHECK(brute <= 1e-12);
    } else {
      const double realized = realized_root_gain(tree, x, gh, cfg.lambda, cfg.gamma);
      CHECK(realized == doctest::Approx(brute).epsilon(1e-12));
      CHECK(realized > 0.0);  // gain consistency: split only happens when it pays
    }
  }
}

TEST_CASE("fit: single-leaf model predicts the target mean") {
  Matrix x(5, 2);
  Rng rng(9);
  for (double& v : x.data) v = rng.uniform(0, 1);
  const std::vector<double> y = {1.0, 2.0, 3.0, 4.0, 10.0};
  GbdtConfig cfg;
  cfg.n_estimators = 1;
  cfg.max_depth = 0;
  cfg.eta = 1.0;
  cfg.lambda = 0.0;
  cfg.alpha = 0.0;
  const BoostedModel model = fit(x, y, cfg);
  const double mean = 4.0;
  for (std::size_t i = 0; i < x.rows; ++i) {
    const double p = model.predict(std::span(x.data).subspan(i * 2, 2));
    CHECK(std::fabs(p - mean) < 1e-12);
  }
}

TEST_CASE("fit: constant targets give zero-weight single leaves every round") {
  Matrix x(6, 1);
  for (int i = 0; i < 6; ++i) x(i, 0) = i;
  const std::vector<double> y(6, 3.25);
  GbdtConfig cfg;
  cfg.n_estimators = 5;
  cfg.alpha = 0.0;
  const BoostedModel model = fit(x, y, cfg);
  REQUIRE(model.trees.size() == 5);
  for (const Tree& tree : model.trees) {
    REQUIRE(tree.nodes.size() == 1);
    CHECK(tree.nodes[0].weight == 0.0);
  }
  CHECK(model.predict(std::vector{2.0}) == 3.25);
}

TEST_CASE("fit: step-function dataset improves over rounds") {
  Matrix x(8, 1);
  std::vector<double> y(8);
  for (int i = 0; i < 8; ++i) {
    x(i, 0) = i;
    y[i] = i < 4 ? 10.0 : 30.0;
  }
  GbdtConfig cfg;
  cfg.n_estimators = 10;
  cfg.max_depth = 2;
  cfg.eta = 0.5;
  cfg.lambda = 0.0;
  cfg.alpha = 0.0;
  cfg.gamma = 0.0;
  std::vector<BoostRoundLog> log;
  const BoostedModel model = fit(x, y, cfg, &log);
  REQUIRE(log.size() == 10);
  CHECK(log.back().train_mse < log.front().train_mse);
  // objective recomputed from scratch agrees with the incremental log
  CHECK(regularized_objective(x, y, model, cfg) ==
        doctest::Approx(log.back().objective).epsilon(1e-12));
}

TEST_CASE("objective is non-increasing across rounds with gamma = 0") {
  Rng rng(77);
  Matrix x(120, 3);
  std::vector<double> y(120);
  for (std::size_t i = 0; i < 120; ++i) {
    for (std::size_t f = 0; f < 3; ++f) x(i, f) = rng.uniform(0, 10);
    y[i] = 3.0 * x(i, 0) - 2.0 * x(i, 1) + rng.normal(0.0, 0.5);
  }
  GbdtConfig cfg;
  cfg.n_estimators = 40;
  cfg.max_depth = 4;
  cfg.eta = 0.3;
  cfg.lambda = 1.5;
  cfg.alpha = 0.0;
  cfg.gamma = 0.0;
  std::vector<BoostRoundLog> log;
  fit(x, y, cfg, &log);
  for (std::size_t t = 1; t < log.size(); ++t)
    CHECK(log[t].objective <= log[t - 1].objective * (1 + 1e-12) + 1e-9);
}

TEST_CASE("predict composition") {
  BoostedModel empty;
  empty.base_score = 7.5;
  empty.eta = 0.1;
  empty.feature_count = 2;
  CHECK(empty.predict(std::vector{1.0, 2.0}) == 7.5);
  CHECK_THROWS_AS(empty.predict(std::vector{1.0}), std::invalid_argument);

  BoostedModel one = empty;
  Tree leaf;
  leaf.nodes.push_back({-1, 0.0, 4.0, -1, -1});
  one.trees.push_back(leaf);
  CHECK(one.predict(std::vector{1.0, 2.0}) == doctest::Approx(7.5 + 0.1 * 4.0).epsilon(1e-15));

  // three stumps traversed manually
  BoostedModel three = empty;
  for (int k = 0; k < 3; ++k) {
    Tree t;
    t.nodes.push_back({0, 1.5, 0.0, 1, 2});
    t.nodes.push_back({-1, 0.0, 1.0 + k, -1, -1});
    t.nodes.push_back({-1, 0.0, -2.0 * k, -1, -1});
    three.trees.push_back(t);
  }
  const std::vector<double> row_left = {1.0, 0.0};
  const std::vector<double> row_right = {2.0, 0.0};
  double manual_left = 7.5, manual_right = 7.5;
  for (int k = 0; k < 3; ++k) {
    manual_left += 0.1 * (1.0 + k);
    manual_right += 0.1 * (-2.0 * k);
  }
  CHECK(three.predict(row_left) == doctest::Approx(manual_left).epsilon(1e-15));
  CHECK(three.predict(row_right) == doctest::Approx(manual_right).epsilon(1e-15));
}

TEST_CASE("shrinkage scaling: frozen trees, eta vs 2 eta") {
  Rng rng(55);
  Matrix x(40, 2);
  std::vector<double> y(40);
  for (std::size_t i = 0; i < 40; ++i) {
    x(i, 0) = rng.uniform(0, 4);
    x(i, 1) = rng.uniform(0, 4);
    y[i] = x(i, 0) * x(i, 1) + rng.uniform(-0.1, 0.1);
  }
  GbdtConfig cfg;
  cfg.n_estimators = 5;
  cfg.max_depth = 3;
  cfg.alpha = 0.0;
  cfg.gamma = 0.0;
  BoostedModel model = fit(x, y, cfg);
  BoostedModel doubled = model;
  doubled.eta = 2.0 * model.eta;
  for (std::size_t i = 0; i < x.rows; ++i) {
    const auto row = std::span(x.data).subspan(i * 2, 2);
    const double lift = model.predict(row) - model.base_score;
    const double lift2 = doubled.predict(row) - doubled.base_score;
    CHECK(lift2 == doctest::Approx(2.0 * lift).epsilon(1e-12));
  }
}

TEST_CASE("subsample draws a strict subset deterministically") {
  Rng rng(66);
  Matrix x(50, 2);
  std::vector<double> y(50);
  for (std::size_t i = 0; i < 50; ++i) {
    x(i, 0) = rng.uniform(0, 1);
    x(i, 1) = rng.uniform(0, 1);
    y[i] = 2.0 * x(i, 0) + rng.uniform(-0.05, 0.05);
  }
  GbdtConfig cfg;
  cfg.n_estimators = 8;
  cfg.max_depth = 3;
  cfg.subsample = 0.5;
  cfg.alpha = 0.0;
  cfg.seed = 123;
  const BoostedModel a = fit(x, y, cfg);
  const BoostedModel b = fit(x, y, cfg);
  REQUIRE(a.trees.size() == b.trees.size());
  for (std::size_t i = 0; i < x.rows; ++i) {
    const auto row = std::span(x.data).subspan(i * 2, 2);
    CHECK(a.predict(row) == b.predict(row));
  }
}

TEST_CASE("config validation") {
  GbdtConfig cfg;
  cfg.eta = 0.0;
  CHECK_THROWS_AS(cfg.validate(), input_error);
  cfg = {};
  cfg.subsample = 1.5;
  CHECK_THROWS_AS(cfg.validate(), input_error);
  cfg = {};
  cfg.lambda = -1;
  CHECK_THROWS_AS(cfg.validate(), input_error);
}
