#pragma once

#include <cstddef>
#include <initializer_list>
#include <vector>

#include "cabxde/rng.hpp"

namespace cabxde {

/// Dense row-major matrix of doubles. Value type; all operations below are
/// pure and throw std::invalid_argument on shape mismatch.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), data(r * c, fill) {}

  static Matrix from_rows(std::initializer_list<std::initializer_list<double>> rows);

  double& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }

  std::size_t size() const { return data.size(); }
  bool empty() const { return data.empty(); }
  bool same_shape(const Matrix& other) const { return rows == other.rows && cols == other.cols; }
};

Matrix matmul(const Matrix& a, const Matrix& b);
Matrix matmul_at(const Matrix& a, const Matrix& b);  // transpose(a) * b
Matrix matmul_bt(const Matrix& a, const Matrix& b);  // a * transpose(b)
Matrix transpose(const Matrix& a);

Matrix add(const Matrix& a, const Matrix& b);
Matrix sub(const Matrix& a, const Matrix& b);
Matrix hadamard(const Matrix& a, const Matrix& b);
Matrix scaled(const Matrix& a, double s);
void add_inplace(Matrix& a, const Matrix& b);

/// Adds a 1 x cols bias row to every row of a.
Matrix add_rowvec(const Matrix& a, const Matrix& bias);
/// Column sums as a 1 x cols row vector.
Matrix colsum(const Matrix& a);
double sum(const Matrix& a);

Matrix concat_cols(const Matrix& a, const Matrix& b);
/// Columns [c0, c1) as a new matrix.
Matrix slice_cols(const Matrix& a, std::size_t c0, std::size_t c1);

bool all_finite(const Matrix& a);

double sigmoid(double x);
Matrix sigmoid(const Matrix& a);
Matrix tanh_act(const Matrix& a);
std::vector<double> softmax(const std::vector<double>& logits);
/// Row-wise softmax (each row sums to 1).
Matrix softmax_rows(const Matrix& a);

/// Uniform init in +-sqrt(6 / (rows + cols)).
Matrix glorot_init(std::size_t rows, std::size_t cols, Rng& rng);
/// Inverted dropout mask: entries are 0 or 1/(1-rate). rate must be in [0, 1).
Matrix dropout_mask(std::size_t rows, std::size_t cols, double rate, Rng& rng);

}  // namespace cabxde
