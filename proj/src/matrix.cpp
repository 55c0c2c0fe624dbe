#include "cabxde/matrix.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace cabxde {

namespace {

void require(bool ok, const char* msg) {
  if (!ok) throw std::invalid_argument(msg);
}

}  // namespace

Matrix Matrix::from_rows(std::initializer_list<std::initializer_list<double>> rows_init) {
  Matrix m(rows_init.size(), rows_init.size() ? rows_init.begin()->size() : 0);
  std::size_t r = 0;
  for (const auto& row : rows_init) {
    require(row.size() == m.cols, "Matrix::from_rows: ragged rows");
    std::size_t c = 0;
    for (double v : row) m(r, c++) = v;
    ++r;
  }
  return m;
}

Matrix matmul(const Matrix& a, const Matrix& b) {
  require(a.cols == b.rows, "matmul: inner dimensions differ");
  Matrix out(a.rows, b.cols);
  const std::size_t n = a.rows, k = a.cols, m = b.cols;
  for (std::size_t i = 0; i < n; ++i) {
    const double* arow = a.data.data() + i * k;
    double* orow = out.data.data() + i * m;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = arow[p];
      if (av == 0.0) continue;
      const double* brow = b.data.data() + p * m;
      for (std::size_t j = 0; j < m; ++j) orow[j] += av * brow[j];
    }
  }
  return out;
}

Matrix matmul_at(const Matrix& a, const Matrix& b) {
  require(a.rows == b.rows, "matmul_at: row counts differ");
  Matrix out(a.cols, b.cols);
  const std::size_t n = a.rows, k = a.cols, m = b.cols;
  for (std::size_t i = 0; i < n; ++i) {
    const double* arow = a.data.data() + i * k;
    const double* brow = b.data.data() + i * m;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = arow[p];
      if (av == 0.0) continue;
      double* orow = out.data.data() + p * m;
      for (std::size_t j = 0; j < m; ++j) orow[j] += av * brow[j];
    }
  }
  return out;
}

Matrix matmul_bt(const Matrix& a, const Matrix& b) {
  require(a.cols == b.cols, "matmul_bt: column counts differ");
  Matrix out(a.rows, b.rows);
  const std::size_t n = a.rows, k = a.cols, m = b.rows;
  for (std::size_t i = 0; i < n; ++i) {
    const double* arow = a.data.data() + i * k;
    double* orow = out.data.data() + i * m;
    for (std::size_t j = 0; j < m; ++j) {
      const double* brow = b.data.data() + j * k;
      double acc = 0.0;
      for (std::size_t p = 0; p < k; ++p) acc += arow[p] * brow[p];
      orow[j] = acc;
    }
  }
  return out;
}

Matrix transpose(const Matrix& a) {
  Matrix out(a.cols, a.rows);
  for (std::size_t i = 0; i < a.rows; ++i)
    for (std::size_t j = 0; j < a.cols; ++j) out(j, i) = a(i, j);
  return out;
}

Matrix add(const Matrix& a, const Matrix& b) {
  require(a.same_shape(b), "add: shape mismatch");
  Matrix out = a;
  for (std::size_t i = 0; i < out.size(); ++i) out.data[i] += b.data[i];
  return out;
}

Matrix sub(const Matrix& a, const Matrix& b) {
  require(a.same_shape(b), "sub: shape mismatch");
  Matrix out = a;
  for (std::size_t i = 0; i < out.size(); ++i) out.data[i] -= b.data[i];
  return out;
}

Matrix hadamard(const Matrix& a, const Matrix& b) {
  require(a.same_shape(b), "hadamard: shape mismatch");
  Matrix out = a;
  for (std::size_t i = 0; i < out.size(); ++i) out.data[i] *= b.data[i];
  return out;
}

Matrix scaled(const Matrix& a, double s) {
  Matrix out = a;
  for (double& v : out.data) v *= s;
  return out;
}

void add_inplace(Matrix& a, const Matrix& b) {
  require(a.same_shape(b), "add_inplace: shape mismatch");
  for (std::size_t i = 0; i < a.size(); ++i) a.data[i] += b.data[i];
}

Matrix add_rowvec(const Matrix& a, const Matrix& bias) {
  require(bias.rows == 1 && bias.cols == a.cols, "add_rowvec: bias must be 1 x cols");
  Matrix out = a;
  for (std::size_t i = 0; i < a.rows; ++i)
    for (std::size_t j = 0; j < a.cols; ++j) out(i, j) += bias(0, j);
  return out;
}

Matrix colsum(const Matrix& a) {
  Matrix out(1, a.cols);
  for (std::size_t i = 0; i < a.rows; ++i)
    for (std::size_t j = 0; j < a.cols; ++j) out(0, j) += a(i, j);
  return out;
}

double sum(const Matrix& a) {
  double acc = 0.0;
  for (double v : a.data) acc += v;
  return acc;
}

Matrix concat_cols(const Matrix& a, const Matrix& b) {
  require(a.rows == b.rows, "concat_cols: row counts differ");
  Matrix out(a.rows, a.cols + b.cols);
  for (std::size_t i = 0; i < a.rows; ++i) {
    for (std::size_t j = 0; j < a.cols; ++j) out(i, j) = a(i, j);
    for (std::size_t j = 0; j < b.cols; ++j) out(i, a.cols + j) = b(i, j);
  }
  return out;
}

Matrix slice_cols(const Matrix& a, std::size_t c0, std::size_t c1) {
  require(c0 <= c1 && c1 <= a.cols, "slice_cols: bad column range");
  Matrix out(a.rows, c1 - c0);
  for (std::size_t i = 0; i < a.rows; ++i)
    for (std::size_t j = c0; j < c1; ++j) out(i, j - c0) = a(i, j);
  return out;
}

bool all_finite(const Matrix& a) {
  return std::all_of(a.data.begin(), a.data.end(), [](double v) { return std::isfinite(v); });
}

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

Matrix sigmoid(const Matrix& a) {
  Matrix out = a;
  for (double& v : out.data) v = sigmoid(v);
  return out;
}

Matrix tanh_act(const Matrix& a) {
  Matrix out = a;
  for (double& v : out.data) v = std::tanh(v);
  return out;
}

std::vector<double> softmax(const std::vector<double>& logits) {
  std::vector<double> out(logits.size());
  if (logits.empty()) return out;
  const double m = *std::max_element(logits.begin(), logits.end());
  double denom = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    out[i] = std::exp(logits[i] - m);
    denom += out[i];
  }
  for (double& v : out) v /= denom;
  return out;
}

Matrix softmax_rows(const Matrix& a) {
  Matrix out(a.rows, a.cols);
  for (std::size_t i = 0; i < a.rows; ++i) {
    double m = a(i, 0);
    for (std::size_t j = 1; j < a.cols; ++j) m = std::max(m, a(i, j));
    double denom = 0.0;
    for (std::size_t j = 0; j < a.cols; ++j) {
      out(i, j) = std::exp(a(i, j) - m);
      denom += out(i, j);
    }
    for (std::size_t j = 0; j < a.cols; ++j) out(i, j) /= denom;
  }
  return out;
}

Matrix glorot_init(std::size_t rows, std::size_t cols, Rng& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(rows + cols));
  Matrix out(rows, cols);
  for (double& v : out.data) v = rng.uniform(-limit, limit);
  return out;
}

Matrix dropout_mask(std::size_t rows, std::size_t cols, double rate, Rng& rng) {
  require(rate >= 0.0 && rate < 1.0, "dropout_mask: rate must be in [0, 1)");
  Matrix out(rows, cols);
  const double keep_scale = 1.0 / (1.0 - rate);
  for (double& v : out.data) v = rng.uniform01() < rate ? 0.0 : keep_scale;
  return out;
}

}  // namespace cabxde
