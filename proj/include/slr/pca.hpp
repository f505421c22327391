#pragma once

#include <Eigen/Dense>
#include <span>
#include <vector>

#include "slr/features.hpp"

namespace slr {

struct PcaModel {
  Eigen::VectorXd mean;                // d
  Eigen::MatrixXd components;          // k x d, orthonormal rows
  Eigen::VectorXd explained_variance;  // k, non-increasing

  int input_dim() const { return static_cast<int>(mean.size()); }
  int output_dim() const { return static_cast<int>(components.rows()); }
};

/// Fits a k-component PCA on the rows of `data` (n x d).
///
/// The top-k eigenvectors of the sample covariance (divisor n - 1) come from
/// a self-adjoint eigensolve of either the d x d covariance or the n x n Gram
/// matrix, whichever is smaller. Each component is signed so that its entry
/// of largest magnitude is non-negative. Requires n >= 2 and
/// 1 <= k <= min(n - 1, d); identical rows (rank 0) are rejected.
PcaModel fit_pca(const Eigen::MatrixXd& data, int k);
PcaModel fit_pca(std::span<const FeatureVector> vectors, int k);

/// components * (v - mean). The result may be the zero vector.
std::vector<double> project(const PcaModel& model, std::span<const double> v);
FeatureVector project(const PcaModel& model, const FeatureVector& v);

/// Maps a reduced vector back into input space.
std::vector<double> reconstruct(const PcaModel& model, std::span<const double> reduced);

/// Default: 256 when the input is at least that long, else the
/// input dim; always clamped to n - 1.
int default_pca_dim(int input_dim, int sample_count);

}  // namespace slr
