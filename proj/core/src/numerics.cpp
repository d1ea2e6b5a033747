#include "cood/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

namespace cood {

Matrix::Matrix(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (data_.size() != rows_ * cols_) {
    throw ShapeError("Matrix: data length " + std::to_string(data_.size()) +
                     " does not equal " + std::to_string(rows_) + "x" + std::to_string(cols_));
  }
}

Matrix Matrix::identity(std::size_t n) {
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

Matrix Matrix::diagonal(std::span<const double> values) {
  Matrix m(values.size(), values.size());
  for (std::size_t i = 0; i < values.size(); ++i) m(i, i) = values[i];
  return m;
}

Matrix Matrix::from_rows(const std::vector<std::vector<double>>& rows) {
  if (rows.empty()) return {};
  const std::size_t cols = rows.front().size();
  Matrix m(rows.size(), cols);
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r].size() != cols) throw ShapeError("Matrix::from_rows: ragged rows");
    std::copy(rows[r].begin(), rows[r].end(), m.row(r).begin());
  }
  return m;
}

Matrix Matrix::transposed() const {
  Matrix t(cols_, rows_);
  for (std::size_t r = 0; r < rows_; ++r)
    for (std::size_t c = 0; c < cols_; ++c) t(c, r) = (*this)(r, c);
  return t;
}

Matrix Matrix::select_rows(std::span<const std::size_t> indices) const {
  Matrix out(indices.size(), cols_);
  for (std::size_t i = 0; i < indices.size(); ++i) {
    if (indices[i] >= rows_) throw ShapeError("Matrix::select_rows: index out of range");
    auto src = row(indices[i]);
    std::copy(src.begin(), src.end(), out.row(i).begin());
  }
  return out;
}

bool Matrix::all_finite() const noexcept {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

double Matrix::frobenius_norm() const noexcept {
  double s = 0.0;
  for (double v : data_) s += v * v;
  return std::sqrt(s);
}

double Matrix::trace() const {
  if (!is_square()) throw ShapeError("trace: matrix is not square");
  double t = 0.0;
  for (std::size_t i = 0; i < rows_; ++i) t += (*this)(i, i);
  return t;
}

namespace {

void require_same_shape(const Matrix& a, const Matrix& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    std::ostringstream os;
    os << op << ": shape " << a.rows() << "x" << a.cols() << " vs " << b.rows() << "x" << b.cols();
    throw ShapeError(os.str());
  }
}

void require_symmetric(const Matrix& m, const char* op) {
  if (!m.is_square()) throw ShapeError(std::string(op) + ": matrix is not square");
  double scale = 1.0;
  for (double v : m.values()) scale = std::max(scale, std::abs(v));
  const double tol = 1e-8 * scale;
  for (std::size_t i = 0; i < m.rows(); ++i)
    for (std::size_t j = i + 1; j < m.cols(); ++j)
      if (std::abs(m(i, j) - m(j, i)) > tol) {
        std::ostringstream os;
        os << op << ": matrix is not symmetric at (" << i << "," << j << ")";
        throw ShapeError(os.str());
      }
}

// Eigenvalues below this are indistinguishable from zero at double precision.
double singular_floor(const std::vector<double>& values) {
  double largest = 0.0;
  for (double v : values) largest = std::max(largest, std::abs(v));
  return largest * static_cast<double>(values.size()) * std::numeric_limits<double>::epsilon();
}

std::vector<double> checked_spd_spectrum(const Matrix& m, double jitter, const char* op,
                                         Matrix* vectors) {
  auto eig = sym_eig(m);
  for (double& v : eig.values) v += jitter;
  const double floor = singular_floor(eig.values);
  for (double v : eig.values) {
    if (!(v > floor)) {
      std::ostringstream os;
      os.precision(17);
      os << op << ": matrix is not positive definite (eigenvalue " << v << ")";
      throw SingularityError(os.str(), v);
    }
  }
  if (vectors) *vectors = std::move(eig.vectors);
  return eig.values;
}

}  // namespace

Matrix operator+(const Matrix& a, const Matrix& b) {
  require_same_shape(a, b, "operator+");
  Matrix out = a;
  auto o = out.values();
  auto bv = b.values();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] += bv[i];
  return out;
}

Matrix operator-(const Matrix& a, const Matrix& b) {
  require_same_shape(a, b, "operator-");
  Matrix out = a;
  auto o = out.values();
  auto bv = b.values();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] -= bv[i];
  return out;
}

Matrix operator*(double s, const Matrix& a) {
  Matrix out = a;
  for (double& v : out.values()) v *= s;
  return out;
}

Matrix matmul(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows()) throw ShapeError("matmul: inner dimensions differ");
  Matrix c(a.rows(), b.cols());
  const std::size_t n = b.cols();
  for (std::size_t i = 0; i < a.rows(); ++i) {
    double* ci = c.row(i).data();
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const double aik = a(i, k);
      if (aik == 0.0) continue;
      const double* bk = b.row(k).data();
      for (std::size_t j = 0; j < n; ++j) ci[j] += aik * bk[j];
    }
  }
  return c;
}

Matrix matmul_tn(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows()) throw ShapeError("matmul_tn: row counts differ");
  Matrix c(a.cols(), b.cols());
  const std::size_t n = b.cols();
  for (std::size_t r = 0; r < a.rows(); ++r) {
    const double* br = b.row(r).data();
    for (std::size_t i = 0; i < a.cols(); ++i) {
      const double ari = a(r, i);
      if (ari == 0.0) continue;
      double* ci = c.row(i).data();
      for (std::size_t j = 0; j < n; ++j) ci[j] += ari * br[j];
    }
  }
  return c;
}

Matrix matmul_nt(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.cols()) throw ShapeError("matmul_nt: column counts differ");
  Matrix c(a.rows(), b.rows());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    auto ai = a.row(i);
    for (std::size_t j = 0; j < b.rows(); ++j) c(i, j) = dot(ai, b.row(j));
  }
  return c;
}

double dot(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw ShapeError("dot: length mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double l2_norm(std::span<const double> a) { return std::sqrt(dot(a, a)); }

double max_abs_diff(const Matrix& a, const Matrix& b) {
  require_same_shape(a, b, "max_abs_diff");
  double worst = 0.0;
  auto av = a.values();
  auto bv = b.values();
  for (std::size_t i = 0; i < av.size(); ++i) worst = std::max(worst, std::abs(av[i] - bv[i]));
  return worst;
}

SymmetricEigen sym_eig(const Matrix& m) {
  require_symmetric(m, "sym_eig");
  const std::size_t n = m.rows();

  Matrix a(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) a(i, j) = 0.5 * (m(i, j) + m(j, i));
  Matrix v = Matrix::identity(n);

  const double target = 1e-12 * a.frobenius_norm();
  auto off_norm = [&] {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j)
        if (i != j) s += a(i, j) * a(i, j);
    return std::sqrt(s);
  };

  constexpr int kMaxSweeps = 100;
  for (int sweep = 0; sweep < kMaxSweeps && off_norm() > target; ++sweep) {
    for (std::size_t p = 0; p + 1 < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        const double apq = a(p, q);
        if (apq == 0.0) continue;
        const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
        const double t = std::copysign(1.0, theta) / (std::abs(theta) + std::hypot(theta, 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (std::size_t k = 0; k < n; ++k) {
          const double akp = a(k, p);
          const double akq = a(k, q);
          a(k, p) = c * akp - s * akq;
          a(k, q) = s * akp + c * akq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double apk = a(p, k);
          const double aqk = a(q, k);
          a(p, k) = c * apk - s * aqk;
          a(q, k) = s * apk + c * aqk;
        }
        a(p, q) = 0.0;
        a(q, p) = 0.0;
        for (std::size_t k = 0; k < n; ++k) {
          const double vkp = v(k, p);
          const double vkq = v(k, q);
          v(k, p) = c * vkp - s * vkq;
          v(k, q) = s * vkp + c * vkq;
        }
      }
    }
  }

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t i, std::size_t j) { return a(i, i) > a(j, j); });

  SymmetricEigen out{std::vector<double>(n), Matrix(n, n)};
  for (std::size_t col = 0; col < n; ++col) {
    out.values[col] = a(order[col], order[col]);
    for (std::size_t k = 0; k < n; ++k) out.vectors(k, col) = v(k, order[col]);
  }
  return out;
}

SpdFactor factor_spd(const Matrix& m, double jitter) {
  SpdFactor f;
  f.values = checked_spd_spectrum(m, jitter, "factor_spd", &f.vectors);
  return f;
}

Matrix SpdFactor::inverse() const {
  const std::size_t n = values.size();
  Matrix inv(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i; j < n; ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < n; ++k) s += vectors(i, k) * vectors(j, k) / values[k];
      inv(i, j) = s;
      inv(j, i) = s;
    }
  }
  return inv;
}

double SpdFactor::log_det() const {
  double s = 0.0;
  for (double v : values) s += std::log(v);
  return s;
}

Matrix invert_spd(const Matrix& m, double jitter) {
  if (!(jitter >= 0.0)) throw std::invalid_argument("invert_spd: jitter must be >= 0");
  SpdFactor f;
  f.values = checked_spd_spectrum(m, jitter, "invert_spd", &f.vectors);
  return f.inverse();
}

double log_det_spd(const Matrix& m) {
  SpdFactor f;
  f.values = checked_spd_spectrum(m, 0.0, "log_det_spd", nullptr);
  return f.log_det();
}

double default_jitter(const Matrix& covariance, double scale) {
  if (covariance.rows() == 0) return 0.0;
  return scale * covariance.trace() / static_cast<double>(covariance.rows());
}

Gaussian fit_gaussian(const Matrix& samples, double jitter_scale) {
  const std::size_t n = samples.rows();
  const std::size_t d = samples.cols();
  if (n < 2) throw ShapeError("fit_gaussian: need at least 2 samples");

  Gaussian g{std::vector<double>(d, 0.0), Matrix(d, d)};
  for (std::size_t r = 0; r < n; ++r) {
    auto row = samples.row(r);
    for (std::size_t j = 0; j < d; ++j) g.mean[j] += row[j];
  }
  for (double& v : g.mean) v /= static_cast<double>(n);

  Matrix centered(n, d);
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t j = 0; j < d; ++j) centered(r, j) = samples(r, j) - g.mean[j];
  g.covariance = matmul_tn(centered, centered);
  const double inv = 1.0 / static_cast<double>(n - 1);
  for (std::size_t i = 0; i < d; ++i) {
    for (std::size_t j = i; j < d; ++j) {
      const double s = 0.5 * (g.covariance(i, j) + g.covariance(j, i)) * inv;
      g.covariance(i, j) = s;
      g.covariance(j, i) = s;
    }
  }
  const double jitter = default_jitter(g.covariance, jitter_scale);
  for (std::size_t i = 0; i < d; ++i) g.covariance(i, i) += jitter;
  return g;
}

double gaussian_kl(const Gaussian& p, const Gaussian& q) {
  if (q.dim() != p.dim()) throw ShapeError("gaussian_kl: dimension mismatch");
  SpdFactor fp;
  SpdFactor fq;
  fq.values = checked_spd_spectrum(q.covariance, 0.0, "gaussian_kl(q)", &fq.vectors);
  fp.values = checked_spd_spectrum(p.covariance, 0.0, "gaussian_kl(p)", nullptr);
  return gaussian_kl(p, fp, q, fq);
}

double gaussian_kl(const Gaussian& p, const SpdFactor& p_factor, const Gaussian& q, const SpdFactor& q_factor) {
  const std::size_t d = p.dim();
  if (q.dim() != d || p.covariance.rows() != d || q.covariance.rows() != d || p_factor.values.size() != d ||
      q_factor.values.size() != d || q_factor.vectors.rows() != d) {
    throw ShapeError("gaussian_kl: dimension mismatch");
  }
  const auto& vq = q_factor.vectors;
  const auto& lq = q_factor.values;

  // Work in q's eigenbasis: tr(Σq⁻¹Σp) = Σᵢ vᵢᵀΣp vᵢ / λᵢ.
  const Matrix sp_v = matmul(p.covariance, vq);
  double trace_term = 0.0;
  double maha = 0.0;
  for (std::size_t i = 0; i < d; ++i) {
    double quad = 0.0;
    double proj = 0.0;
    for (std::size_t k = 0; k < d; ++k) {
      quad += vq(k, i) * sp_v(k, i);
      proj += vq(k, i) * (q.mean[k] - p.mean[k]);
    }
    trace_term += quad / lq[i];
    maha += proj * proj / lq[i];
  }
  return 0.5 * (trace_term + maha - static_cast<double>(d) + q_factor.log_det() - p_factor.log_det());
}

std::vector<double> singular_values(const Matrix& features) {
  if (features.empty()) throw ShapeError("singular_values: empty matrix");
  const Matrix gram = features.rows() >= features.cols() ? matmul_tn(features, features)
                                                         : matmul_nt(features, features);
  auto eig = sym_eig(gram);
  std::vector<double> sigma(eig.values.size());
  std::transform(eig.values.begin(), eig.values.end(), sigma.begin(),
                 [](double l) { return std::sqrt(std::max(l, 0.0)); });
  return sigma;
}

}  // namespace cood
