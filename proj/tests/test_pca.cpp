#include <cmath>
#include <vector>

#include "doctest.h"
#include "jacobi.hpp"
#include "slr/error.hpp"
#include "slr/pca.hpp"
#include "slr/rng.hpp"

using namespace slr;

namespace {

Eigen::MatrixXd gaussian_rows(int n, int d, std::uint64_t seed) {
  Rng rng(seed);
  Eigen::MatrixXd m(n, d);
  // Decaying column scales give well separated eigenvalues.
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < d; ++j) m(i, j) = rng.normal() * (1.0 + 3.0 / (1 + j));
  }
  return m;
}

double orthonormality_error(const PcaModel& m) {
  const Eigen::MatrixXd g = m.components * m.components.transpose();
  return (g - Eigen::MatrixXd::Identity(g.rows(), g.cols())).cwiseAbs().maxCoeff();
}

double reconstruction_error(const PcaModel& m, const Eigen::MatrixXd& data) {
  double total = 0.0;
  for (int i = 0; i < data.rows(); ++i) {
    std::vector<double> v(static_cast<std::size_t>(data.cols()));
    for (int j = 0; j < data.cols(); ++j) v[j] = data(i, j);
    const std::vector<double> back = reconstruct(m, project(m, v));
    for (int j = 0; j < data.cols(); ++j) total += (back[j] - v[j]) * (back[j] - v[j]);
  }
  return total;
}

}  // namespace

TEST_CASE("points on y = x") {
  Eigen::MatrixXd data(4, 2);
  data << 0, 0, 1, 1, 2, 2, 5, 5;
  const PcaModel m = fit_pca(data, 2);
  CHECK(m.components(0, 0) == doctest::Approx(1.0 / std::sqrt(2.0)).epsilon(1e-12));
  CHECK(m.components(0, 1) == doctest::Approx(1.0 / std::sqrt(2.0)).epsilon(1e-12));
  CHECK(std::abs(m.explained_variance(1)) < 1e-12);
  CHECK(m.mean(0) == 2.0);
}

TEST_CASE("exact affine subspace is reproduced") {
  Rng rng(3);
  const int n = 30;
  const int d = 6;
  const int k = 2;
  Eigen::MatrixXd basis(k, d);
  for (int i = 0; i < k; ++i) {
    for (int j = 0; j < d; ++j) basis(i, j) = rng.normal();
  }
  Eigen::VectorXd offset(d);
  for (int j = 0; j < d; ++j) offset(j) = rng.normal(0, 5);
  Eigen::MatrixXd data(n, d);
  for (int i = 0; i < n; ++i) {
    data.row(i) = offset.transpose() + rng.normal() * basis.row(0) + rng.normal() * basis.row(1);
  }
  const PcaModel m = fit_pca(data, k);
  for (int i = 0; i < n; ++i) {
    std::vector<double> v(d);
    for (int j = 0; j < d; ++j) v[j] = data(i, j);
    const auto back = reconstruct(m, project(m, v));
    for (int j = 0; j < d; ++j) CHECK(std::abs(back[j] - v[j]) <= 1e-8);
  }
}

TEST_CASE("explained variance matches a Jacobi eigensolve") {
  const Eigen::MatrixXd data = gaussian_rows(100, 50, 11);
  std::vector<std::vector<double>> rows(100, std::vector<double>(50));
  for (int i = 0; i < 100; ++i) {
    for (int j = 0; j < 50; ++j) rows[i][j] = data(i, j);
  }
  const slr::test::EigenPairs oracle = slr::test::jacobi_eigen(slr::test::sample_covariance(rows), 50);
  const PcaModel m = fit_pca(data, 10);
  for (int i = 0; i < 10; ++i) {
    CHECK(std::abs(m.explained_variance(i) - oracle.values[i]) <= 1e-8 * oracle.values[i]);
    // Components agree with the oracle eigenvectors up to sign.
    double dot = 0.0;
    for (int j = 0; j < 50; ++j) dot += m.components(i, j) * oracle.vectors[i][j];
    CHECK(std::abs(std::abs(dot) - 1.0) <= 1e-6);
  }
}

TEST_CASE("Gram and covariance routes agree") {
  // d > n takes the Gram route; the transposed problem's spectrum matches.
  const Eigen::MatrixXd wide = gaussian_rows(12, 40, 5);
  const PcaModel m = fit_pca(wide, 11);
  std::vector<std::vector<double>> rows(12, std::vector<double>(40));
  for (int i = 0; i < 12; ++i) {
    for (int j = 0; j < 40; ++j) rows[i][j] = wide(i, j);
  }
  const auto oracle = slr::test::jacobi_eigen(slr::test::sample_covariance(rows), 40);
  for (int i = 0; i < 11; ++i) {
    CHECK(std::abs(m.explained_variance(i) - oracle.values[i]) <= 1e-8 * oracle.values[0]);
  }
  CHECK(orthonormality_error(m) <= 1e-8);
}

TEST_CASE("component invariants") {
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    const Eigen::MatrixXd data = gaussian_rows(40, 15, seed);
    const PcaModel m = fit_pca(data, 12);
    CHECK(orthonormality_error(m) <= 1e-8);
    for (int i = 0; i < 12; ++i) {
      CHECK(m.explained_variance(i) >= 0.0);
      if (i > 0) CHECK(m.explained_variance(i) <= m.explained_variance(i - 1));
      Eigen::Index arg = 0;
      m.components.row(i).cwiseAbs().maxCoeff(&arg);
      CHECK(m.components(i, arg) >= 0.0);
    }
    const Eigen::MatrixXd centered = data.rowwise() - data.colwise().mean();
    const double total_var = centered.squaredNorm() / (data.rows() - 1);
    CHECK(m.explained_variance.sum() <= total_var + 1e-8);
  }
}

TEST_CASE("rank-deficient Gram input is completed to an orthonormal basis") {
  Eigen::MatrixXd data = Eigen::MatrixXd::Zero(5, 8);
  data(1, 0) = 1.0;
  data(2, 0) = 2.0;
  data(3, 1) = 1.0;
  const PcaModel m = fit_pca(data, 4);
  CHECK(orthonormality_error(m) <= 1e-8);
  CHECK(m.explained_variance(3) == 0.0);
}

TEST_CASE("fit is bit-for-bit deterministic") {
  const Eigen::MatrixXd data = gaussian_rows(30, 20, 9);
  const PcaModel a = fit_pca(data, 8);
  const PcaModel b = fit_pca(data, 8);
  CHECK(a.components == b.components);
  CHECK(a.explained_variance == b.explained_variance);
  CHECK(a.mean == b.mean);
}

TEST_CASE("reconstruction error does not grow with k") {
  const Eigen::MatrixXd data = gaussian_rows(25, 10, 4);
  double previous = INFINITY;
  for (int k = 1; k <= 10; ++k) {
    const double err = reconstruction_error(fit_pca(data, k), data);
    CHECK(err <= previous + 1e-9);
    previous = err;
  }
}

TEST_CASE("projection") {
  const Eigen::MatrixXd data = gaussian_rows(20, 6, 2);
  const PcaModel m = fit_pca(data, 3);
  SUBCASE("the mean projects to zero") {
    std::vector<double> mean(m.mean.data(), m.mean.data() + m.mean.size());
    for (double v : project(m, mean)) CHECK(std::abs(v) <= 1e-12);
    CHECK_THROWS_AS(project(m, FeatureVector{"mean", mean}).validate(), Error);
  }
  SUBCASE("projection contracts") {
    Rng rng(6);
    for (int t = 0; t < 20; ++t) {
      std::vector<double> v(6);
      for (double& x : v) x = rng.normal(0, 3);
      const auto p = project(m, v);
      double pn = 0.0;
      double cn = 0.0;
      for (double x : p) pn += x * x;
      for (int j = 0; j < 6; ++j) cn += (v[j] - m.mean(j)) * (v[j] - m.mean(j));
      CHECK(std::sqrt(pn) <= std::sqrt(cn) + 1e-8);
    }
  }
  SUBCASE("dim mismatch") {
    CHECK_THROWS_AS(project(m, std::vector<double>(5, 1.0)), Error);
  }
  SUBCASE("identity model") {
    PcaModel id;
    id.mean = Eigen::VectorXd::Zero(3);
    id.components = Eigen::MatrixXd::Identity(3, 3);
    id.explained_variance = Eigen::VectorXd::Ones(3);
    CHECK(project(id, std::vector<double>{1.5, -2.0, 0.25}) == std::vector<double>{1.5, -2.0, 0.25});
  }
}

TEST_CASE("argument checks") {
  const Eigen::MatrixXd data = gaussian_rows(5, 4, 1);
  CHECK_THROWS_AS(fit_pca(data, 0), Error);
  CHECK_THROWS_AS(fit_pca(data, 5), Error);  // > n - 1
  CHECK_THROWS_AS(fit_pca(gaussian_rows(1, 4, 1), 1), Error);
  Eigen::MatrixXd same(4, 3);
  same.rowwise() = Eigen::RowVector3d(1, 2, 3);
  try {
    fit_pca(same, 1);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find("rank") != std::string::npos);
  }
}

TEST_CASE("default dimension") {
  CHECK(default_pca_dim(2048, 1000) == 256);
  CHECK(default_pca_dim(182, 1000) == 182);
  CHECK(default_pca_dim(2048, 100) == 99);
}
