#include "slr/pca.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>

#include "slr/error.hpp"

namespace slr {
namespace {

void fix_sign(Eigen::MatrixXd& m, Eigen::Index i) {
  Eigen::Index best = 0;
  for (Eigen::Index j = 1; j < m.cols(); ++j) {
    if (std::abs(m(i, j)) > std::abs(m(i, best))) best = j;
  }
  if (m(i, best) < 0.0) m.row(i) *= -1.0;
}

// Fills rows [from, k) with unit vectors orthogonal to every earlier row,
// taking standard basis vectors in order through two Gram-Schmidt passes.
void complete_basis(Eigen::MatrixXd& components, Eigen::Index from) {
  const Eigen::Index d = components.cols();
  Eigen::Index basis = 0;
  for (Eigen::Index i = from; i < components.rows(); ++i) {
    while (true) {
      if (basis >= d) throw_runtime("PCA basis completion ran out of directions");
      Eigen::RowVectorXd v = Eigen::RowVectorXd::Unit(d, basis++);
      for (int pass = 0; pass < 2; ++pass) {
        for (Eigen::Index j = 0; j < i; ++j) v -= v.dot(components.row(j)) * components.row(j);
      }
      const double norm = v.norm();
      if (norm > 1e-6) {
        components.row(i) = v / norm;
        break;
      }
    }
  }
}

}  // namespace

PcaModel fit_pca(const Eigen::MatrixXd& data, int k) {
  const Eigen::Index n = data.rows();
  const Eigen::Index d = data.cols();
  if (n < 2) throw_validation("PCA needs at least 2 vectors, got " + std::to_string(n));
  if (d < 1) throw_validation("PCA input has zero dimension");
  const Eigen::Index k_max = std::min(n - 1, d);
  if (k < 1 || k > k_max) {
    throw_validation("PCA output dim k=" + std::to_string(k) + " out of range [1, " + std::to_string(k_max) + "]");
  }
  if (!data.allFinite()) throw_validation("PCA input contains non-finite values");

  PcaModel model;
  model.mean = data.colwise().mean().transpose();
  const Eigen::MatrixXd centered = data.rowwise() - model.mean.transpose();

  const double scale = std::max(1.0, data.cwiseAbs().maxCoeff());
  if (centered.cwiseAbs().maxCoeff() <= 1e-12 * scale) {
    throw_validation("PCA input is degenerate: all vectors are identical (covariance rank 0)");
  }

  const double denom = static_cast<double>(n - 1);
  model.components.resize(k, d);
  model.explained_variance.resize(k);

  if (d <= n) {
    const Eigen::MatrixXd cov = (centered.transpose() * centered) / denom;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(cov);
    if (solver.info() != Eigen::Success) throw_runtime("covariance eigendecomposition failed");
    for (int i = 0; i < k; ++i) {
      const Eigen::Index col = d - 1 - i;  // eigenvalues come out ascending
      model.explained_variance(i) = std::max(0.0, solver.eigenvalues()(col));
      model.components.row(i) = solver.eigenvectors().col(col).transpose();
    }
  } else {
    // Gram route: if G v = lambda v with G = X X^T / (n-1), then
    // u = X^T v / sqrt(lambda (n-1)) is a unit eigenvector of the covariance.
    const Eigen::MatrixXd gram = (centered * centered.transpose()) / denom;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(gram);
    if (solver.info() != Eigen::Success) throw_runtime("Gram eigendecomposition failed");
    const double top = std::max(0.0, solver.eigenvalues()(n - 1));
    const double tol = top * 1e-12 * static_cast<double>(n);
    Eigen::Index usable = 0;
    for (int i = 0; i < k; ++i) {
      const Eigen::Index col = n - 1 - i;
      const double lambda = solver.eigenvalues()(col);
      if (!(lambda > tol)) break;
      Eigen::RowVectorXd u = (centered.transpose() * solver.eigenvectors().col(col)).transpose();
      u /= u.norm();
      model.explained_variance(i) = lambda;
      model.components.row(i) = u;
      ++usable;
    }
    for (Eigen::Index i = usable; i < k; ++i) model.explained_variance(i) = 0.0;
    if (usable < k) complete_basis(model.components, usable);
  }

  for (int i = 0; i < k; ++i) fix_sign(model.components, i);
  return model;
}

PcaModel fit_pca(std::span<const FeatureVector> vectors, int k) {
  if (vectors.empty()) throw_validation("PCA needs at least 2 vectors, got 0");
  const auto d = static_cast<Eigen::Index>(vectors.front().dim());
  Eigen::MatrixXd data(static_cast<Eigen::Index>(vectors.size()), d);
  for (std::size_t i = 0; i < vectors.size(); ++i) {
    if (static_cast<Eigen::Index>(vectors[i].dim()) != d) {
      throw_validation("PCA input vector '" + vectors[i].image_id + "' has dim " +
                       std::to_string(vectors[i].dim()) + ", expected " + std::to_string(d));
    }
    data.row(static_cast<Eigen::Index>(i)) = Eigen::Map<const Eigen::RowVectorXd>(vectors[i].values.data(), d);
  }
  return fit_pca(data, k);
}

std::vector<double> project(const PcaModel& model, std::span<const double> v) {
  if (static_cast<int>(v.size()) != model.input_dim()) {
    throw_validation("projection input has dim " + std::to_string(v.size()) + ", model expects " +
                     std::to_string(model.input_dim()));
  }
  const Eigen::Map<const Eigen::VectorXd> x(v.data(), static_cast<Eigen::Index>(v.size()));
  const Eigen::VectorXd reduced = model.components * (x - model.mean);
  return {reduced.data(), reduced.data() + reduced.size()};
}

FeatureVector project(const PcaModel& model, const FeatureVector& v) {
  return FeatureVector{v.image_id, project(model, std::span<const double>(v.values))};
}

std::vector<double> reconstruct(const PcaModel& model, std::span<const double> reduced) {
  if (static_cast<int>(reduced.size()) != model.output_dim()) {
    throw_validation("reconstruction input has dim " + std::to_string(reduced.size()) + ", model has " +
                     std::to_string(model.output_dim()) + " components");
  }
  const Eigen::Map<const Eigen::VectorXd> r(reduced.data(), static_cast<Eigen::Index>(reduced.size()));
  const Eigen::VectorXd x = model.components.transpose() * r + model.mean;
  return {x.data(), x.data() + x.size()};
}

int default_pca_dim(int input_dim, int sample_count) {
  const int wanted = input_dim >= 256 ? 256 : input_dim;
  return std::max(1, std::min(wanted, sample_count - 1));
}

}  // namespace slr
