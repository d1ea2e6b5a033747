#pragma once

#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace cood {

/// Thrown when operand shapes do not fit an operation (non-square, ragged,
/// dimension mismatch, asymmetric input to a symmetric routine).
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Base for failures of numerical procedures (non-finite values, singular
/// systems).
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Thrown when a matrix that must be positive definite is not, after jitter.
class SingularityError : public NumericalError {
 public:
  SingularityError(const std::string& what, double eigenvalue)
      : NumericalError(what), eigenvalue_(eigenvalue) {}
  double eigenvalue() const noexcept { return eigenvalue_; }

 private:
  double eigenvalue_;
};

/// Dense row-major matrix of doubles.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0);
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> data);

  static Matrix identity(std::size_t n);
  static Matrix diagonal(std::span<const double> values);
  static Matrix from_rows(const std::vector<std::vector<double>>& rows);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }
  bool is_square() const noexcept { return rows_ == cols_; }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

  std::span<double> values() noexcept { return data_; }
  std::span<const double> values() const noexcept { return data_; }

  Matrix transposed() const;
  /// Rows selected by index, in the given order.
  Matrix select_rows(std::span<const std::size_t> indices) const;

  bool all_finite() const noexcept;
  double frobenius_norm() const noexcept;
  double trace() const;

  bool operator==(const Matrix&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

Matrix operator+(const Matrix& a, const Matrix& b);
Matrix operator-(const Matrix& a, const Matrix& b);
Matrix operator*(double s, const Matrix& a);

/// a·b
Matrix matmul(const Matrix& a, const Matrix& b);
/// aᵀ·b
Matrix matmul_tn(const Matrix& a, const Matrix& b);
/// a·bᵀ
Matrix matmul_nt(const Matrix& a, const Matrix& b);

double dot(std::span<const double> a, std::span<const double> b);
double l2_norm(std::span<const double> a);

/// Largest absolute entry of a - b. Shapes must agree.
double max_abs_diff(const Matrix& a, const Matrix& b);

struct SymmetricEigen {
  std::vector<double> values;  // descending
  Matrix vectors;              // column i pairs with values[i]
};

/// Cyclic Jacobi eigendecomposition of a symmetric matrix. Iterates until the
/// off-diagonal Frobenius norm drops to 1e-12·‖m‖_F.
SymmetricEigen sym_eig(const Matrix& m);

/// (m + jitter·I)⁻¹ computed through the eigendecomposition.
/// Throws SingularityError naming the first non-positive eigenvalue.
Matrix invert_spd(const Matrix& m, double jitter);

/// Σ ln λᵢ of a symmetric positive definite matrix.
double log_det_spd(const Matrix& m);

/// Checked eigendecomposition of m + jitter·I, for callers that need the
/// inverse, log-determinant or KL terms of one matrix without re-solving.
struct SpdFactor {
  std::vector<double> values;  // descending, all > 0
  Matrix vectors;

  Matrix inverse() const;
  double log_det() const;
};

SpdFactor factor_spd(const Matrix& m, double jitter = 0.0);

/// Scale-aware ridge for covariance matrices: scale · trace(Σ) / D.
double default_jitter(const Matrix& covariance, double scale = 1e-3);

/// Multivariate normal with a dense covariance.
struct Gaussian {
  std::vector<double> mean;
  Matrix covariance;

  std::size_t dim() const noexcept { return mean.size(); }
};

/// Sample mean and unbiased covariance (denominator N-1) of the rows of
/// `samples`, with `jitter_scale`·trace/D added to the diagonal.
Gaussian fit_gaussian(const Matrix& samples, double jitter_scale = 1e-3);

/// Closed-form KL(p‖q) between two Gaussians.
double gaussian_kl(const Gaussian& p, const Gaussian& q);
/// Same, reusing factorizations of both covariances.
double gaussian_kl(const Gaussian& p, const SpdFactor& p_factor, const Gaussian& q, const SpdFactor& q_factor);

/// Singular values of `features`, descending, length min(rows, cols).
/// Obtained as square roots of the eigenvalues of the smaller Gram matrix.
std::vector<double> singular_values(const Matrix& features);

}  // namespace cood
