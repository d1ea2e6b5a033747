#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "cood/numerics.hpp"
#include "support/oracles.hpp"

using cood::Matrix;

namespace {

Matrix symmetrize(const Matrix& a) { return 0.5 * (a + a.transposed()); }

Matrix reconstruct(const cood::SymmetricEigen& e) {
  const std::size_t n = e.values.size();
  Matrix out(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      for (std::size_t k = 0; k < n; ++k) out(i, j) += e.vectors(i, k) * e.values[k] * e.vectors(j, k);
  return out;
}

}  // namespace

TEST_CASE("matrix construction validates shape") {
  CHECK_THROWS_AS(Matrix(2, 3, std::vector<double>(5)), cood::ShapeError);
  CHECK_THROWS_AS(Matrix::from_rows({{1.0, 2.0}, {3.0}}), cood::ShapeError);
  const Matrix a = Matrix::from_rows({{1, 2}, {3, 4}});
  CHECK(a.trace() == 5.0);
  CHECK(cood::matmul(a, Matrix::identity(2)) == a);
  CHECK(cood::max_abs_diff(cood::matmul_tn(a, a), cood::matmul(a.transposed(), a)) == 0.0);
  CHECK(cood::max_abs_diff(cood::matmul_nt(a, a), cood::matmul(a, a.transposed())) == 0.0);
}

TEST_CASE("sym_eig on diagonal and 2x2 cases") {
  const double d[] = {3.0, 1.0, 2.0};
  auto e = cood::sym_eig(Matrix::diagonal(d));
  REQUIRE(e.values.size() == 3);
  CHECK(e.values[0] == doctest::Approx(3.0).epsilon(1e-14));
  CHECK(e.values[1] == doctest::Approx(2.0).epsilon(1e-14));
  CHECK(e.values[2] == doctest::Approx(1.0).epsilon(1e-14));

  e = cood::sym_eig(Matrix::from_rows({{2, 1}, {1, 2}}));
  CHECK(e.values[0] == doctest::Approx(3.0).epsilon(1e-13));
  CHECK(e.values[1] == doctest::Approx(1.0).epsilon(1e-13));
}

TEST_CASE("sym_eig reconstructs random symmetric matrices with orthonormal vectors") {
  std::mt19937_64 rng(11);
  for (std::size_t n = 1; n <= 12; ++n) {
    const Matrix m = symmetrize(oracle::random_matrix(n, n, rng));
    const auto e = cood::sym_eig(m);
    CHECK(cood::max_abs_diff(reconstruct(e), m) <= 1e-8 * m.frobenius_norm());
    CHECK(cood::max_abs_diff(cood::matmul_tn(e.vectors, e.vectors), Matrix::identity(n)) <= 1e-8);
    CHECK(std::is_sorted(e.values.rbegin(), e.values.rend()));
  }
}

TEST_CASE("sym_eig rejects non-square and asymmetric input") {
  CHECK_THROWS_AS(cood::sym_eig(Matrix(2, 3)), cood::ShapeError);
  CHECK_THROWS_AS(cood::sym_eig(Matrix::from_rows({{1, 2}, {0, 1}})), cood::ShapeError);
}

TEST_CASE("invert_spd examples") {
  CHECK(cood::max_abs_diff(cood::invert_spd(Matrix::identity(4), 0.0), Matrix::identity(4)) <= 1e-15);
  const double d[] = {2.0, 4.0};
  const double inv[] = {0.5, 0.25};
  CHECK(cood::max_abs_diff(cood::invert_spd(Matrix::diagonal(d), 0.0), Matrix::diagonal(inv)) <= 1e-15);
  const double j[] = {1.0 / 3.0, 0.2};
  CHECK(cood::max_abs_diff(cood::invert_spd(Matrix::diagonal(d), 1.0), Matrix::diagonal(j)) <= 1e-15);
}

TEST_CASE("invert_spd times input is identity and double inversion round-trips") {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t n = 2 + static_cast<std::size_t>(trial % 7);
    const Matrix a = oracle::random_spd(n, rng);
    const Matrix inv = cood::invert_spd(a, 0.0);
    CHECK(cood::max_abs_diff(cood::matmul(a, inv), Matrix::identity(n)) <= 1e-8);
    CHECK(cood::max_abs_diff(inv, inv.transposed()) == 0.0);
    CHECK(cood::max_abs_diff(cood::invert_spd(inv, 0.0), a) <= 1e-6);
  }
}

TEST_CASE("invert_spd names the offending eigenvalue") {
  const Matrix singular = Matrix::from_rows({{1, 1}, {1, 1}});
  try {
    (void)cood::invert_spd(singular, 0.0);
    FAIL("expected SingularityError");
  } catch (const cood::SingularityError& e) {
    CHECK(e.eigenvalue() <= 1e-12);
    CHECK(std::string(e.what()).find("eigenvalue") != std::string::npos);
  }
  const double neg[] = {1.0, -2.0};
  CHECK_THROWS_AS(cood::invert_spd(Matrix::diagonal(neg), 0.0), cood::SingularityError);
  CHECK_NOTHROW(cood::invert_spd(singular, 1e-3));
}

TEST_CASE("log_det_spd matches a Cholesky oracle") {
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 10; ++trial) {
    const Matrix a = oracle::random_spd(6, rng);
    CHECK(cood::log_det_spd(a) == doctest::Approx(oracle::log_det_cholesky(a)).epsilon(1e-11));
    const auto f = cood::factor_spd(a);
    CHECK(cood::max_abs_diff(f.inverse(), cood::invert_spd(a, 0.0)) <= 1e-12);
  }
}

TEST_CASE("fit_gaussian matches two-pass covariance plus scale-aware jitter") {
  std::mt19937_64 rng(3);
  const Matrix x = oracle::random_matrix(40, 5, rng, 2.0);
  const auto g = cood::fit_gaussian(x, 1e-3);
  Matrix expect = oracle::covariance(x);
  const double jitter = 1e-3 * expect.trace() / 5.0;
  CHECK(cood::default_jitter(expect) == doctest::Approx(jitter).epsilon(1e-14));
  for (std::size_t i = 0; i < 5; ++i) expect(i, i) += jitter;
  CHECK(cood::max_abs_diff(g.covariance, expect) <= 1e-10);
}

TEST_CASE("gaussian_kl closed-form examples") {
  cood::Gaussian g{{0.3, -1.0}, Matrix::from_rows({{2.0, 0.4}, {0.4, 1.0}})};
  CHECK(std::abs(cood::gaussian_kl(g, g)) <= 1e-12);

  const cood::Gaussian p{{0.0}, Matrix::identity(1)};
  const cood::Gaussian q{{1.0}, Matrix::identity(1)};
  CHECK(cood::gaussian_kl(p, q) == doctest::Approx(0.5).epsilon(1e-14));

  const cood::Gaussian wrong{{0.0, 0.0, 0.0}, Matrix::identity(3)};
  CHECK_THROWS_AS(cood::gaussian_kl(p, wrong), cood::ShapeError);
}

TEST_CASE("gaussian_kl agrees with Monte-Carlo on a random 3-D pair") {
  std::mt19937_64 rng(21);
  const cood::Gaussian p{{0.2, -0.4, 1.0}, oracle::random_spd(3, rng, 1.0)};
  const cood::Gaussian q{{-0.5, 0.3, 0.2}, oracle::random_spd(3, rng, 1.0)};
  const double exact = cood::gaussian_kl(p, q);
  const double mc = oracle::monte_carlo_kl(p, q, 400000, rng);
  CHECK(std::abs(mc - exact) <= 0.02 * exact);
}

TEST_CASE("gaussian_kl is non-negative over random SPD pairs") {
  std::mt19937_64 rng(99);
  std::normal_distribution<double> normal;
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 1 + static_cast<std::size_t>(trial % 6);
    cood::Gaussian p{std::vector<double>(n), oracle::random_spd(n, rng, 0.05)};
    cood::Gaussian q{std::vector<double>(n), oracle::random_spd(n, rng, 0.05)};
    for (auto& v : p.mean) v = normal(rng);
    for (auto& v : q.mean) v = normal(rng);
    CHECK(cood::gaussian_kl(p, q) >= -1e-9);
  }
}

TEST_CASE("singular_values examples") {
  auto s = cood::singular_values(Matrix::identity(5));
  REQUIRE(s.size() == 5);
  for (double v : s) CHECK(v == doctest::Approx(1.0).epsilon(1e-14));

  const std::vector<double> u = {1.0, 2.0, -2.0};
  const std::vector<double> v = {3.0, 4.0};
  Matrix outer(3, 2);
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 2; ++j) outer(i, j) = u[i] * v[j];
  s = cood::singular_values(outer);
  REQUIRE(s.size() == 2);
  CHECK(s[0] == doctest::Approx(15.0).epsilon(1e-12));
  CHECK(s[1] <= 1e-6);

  CHECK_THROWS_AS(cood::singular_values(Matrix()), cood::ShapeError);
}

TEST_CASE("singular_values of a random 20x5 matrix match Gram-matrix invariants") {
  std::mt19937_64 rng(4);
  const Matrix x = oracle::random_matrix(20, 5, rng);
  const auto s = cood::singular_values(x);
  REQUIRE(s.size() == 5);
  const Matrix gram = cood::matmul_tn(x, x);
  // Power sums of σ² equal traces of Gram powers; the product equals det(Gram).
  double p1 = 0.0, p2 = 0.0, prod = 1.0;
  for (double v : s) {
    p1 += v * v;
    p2 += v * v * v * v;
    prod *= v * v;
  }
  CHECK(p1 == doctest::Approx(gram.trace()).epsilon(1e-12));
  CHECK(p2 == doctest::Approx(cood::matmul(gram, gram).trace()).epsilon(1e-12));
  CHECK(prod == doctest::Approx(oracle::determinant(gram)).epsilon(1e-9));
  // Each σ² is a root of det(G − λI).
  for (double v : s) {
    Matrix shifted = gram;
    for (std::size_t i = 0; i < 5; ++i) shifted(i, i) -= v * v;
    CHECK(std::abs(oracle::determinant(shifted)) <= 1e-8 * std::pow(gram.frobenius_norm(), 5));
  }
  const auto st = cood::singular_values(x.transposed());
  for (std::size_t i = 0; i < 5; ++i) CHECK(st[i] == doctest::Approx(s[i]).epsilon(1e-10));
}

TEST_CASE("singular_values are invariant under row permutation") {
  std::mt19937_64 rng(17);
  const Matrix x = oracle::random_matrix(15, 6, rng);
  std::vector<std::size_t> perm(15);
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), rng);
  const auto a = cood::singular_values(x);
  const auto b = cood::singular_values(x.select_rows(perm));
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(b[i] == doctest::Approx(a[i]).epsilon(1e-10));
}
