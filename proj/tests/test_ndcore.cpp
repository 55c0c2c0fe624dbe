#include <doctest.h>

#include <cmath>
#include <limits>

#include "cabxde/matrix.hpp"
#include "cabxde/param.hpp"
#include "cabxde/rng.hpp"

using namespace cabxde;

TEST_CASE("matmul basics") {
  const Matrix a = Matrix::from_rows({{1, 2}, {3, 4}});
  const Matrix b = Matrix::from_rows({{5}, {6}});
  const Matrix ab = matmul(a, b);
  CHECK(ab.rows == 2);
  CHECK(ab.cols == 1);
  CHECK(ab(0, 0) == 17.0);
  CHECK(ab(1, 0) == 39.0);

  Matrix identity(3, 3);
  for (int i = 0; i < 3; ++i) identity(i, i) = 1.0;
  Matrix m(3, 3);
  Rng rng(7);
  for (double& v : m.data) v = rng.uniform(-2, 2);
  const Matrix mi = matmul(m, identity);
  for (std::size_t i = 0; i < m.size(); ++i) CHECK(mi.data[i] == m.data[i]);

  CHECK_THROWS_AS(matmul(a, Matrix(3, 2)), std::invalid_argument);
}

TEST_CASE("hadamard and add_rowvec") {
  const Matrix a = Matrix::from_rows({{1, -2}, {3, 4}});
  const Matrix zeros(2, 2);
  const Matrix hz = hadamard(a, zeros);
  for (double v : hz.data) CHECK(v == 0.0);

  const Matrix bias = Matrix::from_rows({{10, 20}});
  const Matrix ab = add_rowvec(a, bias);
  CHECK(ab(0, 0) == 11);
  CHECK(ab(0, 1) == 18);
  CHECK(ab(1, 0) == 13);
  CHECK(ab(1, 1) == 24);
  CHECK_THROWS_AS(add_rowvec(a, Matrix(1, 3)), std::invalid_argument);
  CHECK_THROWS_AS(hadamard(a, Matrix(2, 3)), std::invalid_argument);
}

TEST_CASE("transpose-style products agree with explicit transpose") {
  Rng rng(11);
  Matrix a(4, 3), b(4, 2);
  for (double& v : a.data) v = rng.uniform(-1, 1);
  for (double& v : b.data) v = rng.uniform(-1, 1);
  const Matrix expected_at = matmul(transpose(a), b);
  const Matrix got_at = matmul_at(a, b);
  for (std::size_t i = 0; i < expected_at.size(); ++i)
    CHECK(got_at.data[i] == doctest::Approx(expected_at.data[i]).epsilon(1e-15));

  Matrix c(3, 5), d(2, 5);
  for (double& v : c.data) v = rng.uniform(-1, 1);
  for (double& v : d.data) v = rng.uniform(-1, 1);
  const Matrix expected_bt = matmul(c, transpose(d));
  const Matrix got_bt = matmul_bt(c, d);
  for (std::size_t i = 0; i < expected_bt.size(); ++i)
    CHECK(got_bt.data[i] == doctest::Approx(expected_bt.data[i]).epsilon(1e-15));
}

TEST_CASE("activations") {
  CHECK(sigmoid(0.0) == 0.5);
  CHECK(std::tanh(0.0) == 0.0);

  const std::vector<double> equal_logits = {3.7, 3.7, 3.7};
  const std::vector<double> sm = softmax(equal_logits);
  for (double v : sm) CHECK(v == doctest::Approx(1.0 / 3.0).epsilon(1e-15));

  // sums to 1 and survives large logits thanks to max subtraction
  const std::vector<double> big = {700.0, 710.0, 705.0};
  const std::vector<double> smb = softmax(big);
  double total = 0.0;
  for (double v : smb) {
    CHECK(std::isfinite(v));
    total += v;
  }
  CHECK(std::fabs(total - 1.0) < 1e-12);

  double prev_sig = -1.0, prev_tanh = -2.0;
  for (double x = -8.0; x <= 8.0; x += 0.25) {
    const double s = sigmoid(x);
    CHECK(s > prev_sig);
    prev_sig = s;
    const double t = std::tanh(x);
    CHECK(t > prev_tanh);
    prev_tanh = t;
    CHECK(std::fabs(sigmoid(x) + sigmoid(-x) - 1.0) < 1e-14);
    CHECK(s > 0.0);
    CHECK(s < 1.0);
  }
}

TEST_CASE("glorot init stays within its limit") {
  Rng rng(123);
  const std::size_t rows = 30, cols = 50;
  const Matrix m = glorot_init(rows, cols, rng);
  const double limit = std::sqrt(6.0 / (rows + cols));
  for (double v : m.data) {
    CHECK(v >= -limit);
    CHECK(v <= limit);
  }
}

TEST_CASE("dropout mask") {
  Rng rng(42);
  const Matrix ones_mask = dropout_mask(10, 10, 0.0, rng);
  for (double v : ones_mask.data) CHECK(v == 1.0);

  Rng rng2(42);
  const Matrix big = dropout_mask(1000, 100, 0.2, rng2);
  std::size_t kept = 0;
  for (double v : big.data) {
    CHECK((v == 0.0 || v == doctest::Approx(1.25).epsilon(1e-15)));
    if (v != 0.0) ++kept;
  }
  const double kept_fraction = static_cast<double>(kept) / static_cast<double>(big.size());
  CHECK(kept_fraction > 0.79);
  CHECK(kept_fraction < 0.81);

  Rng a(7), b(7);
  const Matrix ma = dropout_mask(20, 20, 0.5, a);
  const Matrix mb = dropout_mask(20, 20, 0.5, b);
  for (std::size_t i = 0; i < ma.size(); ++i) CHECK(ma.data[i] == mb.data[i]);

  Rng c(1);
  CHECK_THROWS_AS(dropout_mask(2, 2, 1.0, c), std::invalid_argument);
}

TEST_CASE("rng reproducibility and ranges") {
  Rng a(999), b(999);
  for (int i = 0; i < 1000; ++i) CHECK(a.next_u64() == b.next_u64());
  Rng u(5);
  for (int i = 0; i < 1000; ++i) {
    const double v = u.uniform01();
    CHECK(v >= 0.0);
    CHECK(v < 1.0);
  }
  Rng f1 = Rng(5).fork(1);
  Rng f2 = Rng(5).fork(2);
  CHECK(f1.seed() != f2.seed());
}

TEST_CASE("finite_diff_check") {
  ParamTensor w("w", 1, 1);
  std::vector<ParamTensor*> params = {&w};

  SUBCASE("quadratic") {
    w.value(0, 0) = 3.0;
    w.grad(0, 0) = 6.0;  // d/dw w^2 at 3
    const auto f = [&] { return w.value(0, 0) * w.value(0, 0); };
    CHECK(finite_diff_check(f, params, 1e-5) < 1e-8);
  }
  SUBCASE("constant function has zero gradient both ways") {
    w.value(0, 0) = 1.7;
    w.grad(0, 0) = 0.0;
    const auto f = [&] { return 42.0; };
    CHECK(finite_diff_check(f, params, 1e-5) == 0.0);
  }
  SUBCASE("sigmoid slope at zero is 1/4") {
    w.value(0, 0) = 0.0;
    w.grad(0, 0) = 0.25;
    const auto f = [&] { return sigmoid(w.value(0, 0)); };
    CHECK(finite_diff_check(f, params, 1e-5) < 1e-7);
  }
  SUBCASE("non-finite evaluations and bad step sizes are rejected") {
    const auto bad = [&] { return std::numeric_limits<double>::infinity(); };
    CHECK_THROWS_AS(finite_diff_check(bad, params, 1e-5), std::runtime_error);
    const auto fine = [&] { return 0.0; };
    CHECK_THROWS_AS(finite_diff_check(fine, params, 0.0), std::invalid_argument);
  }
}

TEST_CASE("adam drives a quadratic toward its minimum") {
  ParamTensor w("w", 1, 1);
  w.value(0, 0) = 4.0;
  std::vector<ParamTensor*> params = {&w};
  AdamOptimizer opt({0.05, 0.9, 0.999, 1e-8});
  for (int i = 0; i < 2000; ++i) {
    w.zero_grad();
    w.grad(0, 0) = 2.0 * (w.value(0, 0) - 1.5);
    opt.step(params);
  }
  CHECK(std::fabs(w.value(0, 0) - 1.5) < 1e-3);
}
