#include "jacobi.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace slr::test {

EigenPairs jacobi_eigen(std::vector<double> a, int n, double tol, int max_sweeps) {
  auto A = [&](int i, int j) -> double& { return a[static_cast<std::size_t>(i) * n + j]; };
  std::vector<double> v(static_cast<std::size_t>(n) * n, 0.0);
  auto V = [&](int i, int j) -> double& { return v[static_cast<std::size_t>(i) * n + j]; };
  for (int i = 0; i < n; ++i) V(i, i) = 1.0;

  double scale = 0.0;
  for (double x : a) scale += x * x;
  scale = std::sqrt(scale);
  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    double off = 0.0;
    for (int i = 0; i < n; ++i) {
      for (int j = i + 1; j < n; ++j) off += A(i, j) * A(i, j);
    }
    if (std::sqrt(off) <= tol * std::max(scale, 1e-300)) break;
    for (int p = 0; p < n; ++p) {
      for (int q = p + 1; q < n; ++q) {
        if (A(p, q) == 0.0) continue;
        const double theta = (A(q, q) - A(p, p)) / (2.0 * A(p, q));
        const double t = (theta >= 0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (int k = 0; k < n; ++k) {
          const double akp = A(k, p);
          const double akq = A(k, q);
          A(k, p) = c * akp - s * akq;
          A(k, q) = s * akp + c * akq;
        }
        for (int k = 0; k < n; ++k) {
          const double apk = A(p, k);
          const double aqk = A(q, k);
          A(p, k) = c * apk - s * aqk;
          A(q, k) = s * apk + c * aqk;
        }
        for (int k = 0; k < n; ++k) {
          const double vkp = V(k, p);
          const double vkq = V(k, q);
          V(k, p) = c * vkp - s * vkq;
          V(k, q) = s * vkp + c * vkq;
        }
      }
    }
  }
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int x, int y) { return A(x, x) > A(y, y); });
  EigenPairs out;
  for (int i : order) {
    out.values.push_back(A(i, i));
    std::vector<double> vec(n);
    for (int k = 0; k < n; ++k) vec[k] = V(k, i);
    out.vectors.push_back(std::move(vec));
  }
  return out;
}

std::vector<double> sample_covariance(const std::vector<std::vector<double>>& rows) {
  const std::size_t n = rows.size();
  const std::size_t d = rows.front().size();
  std::vector<double> mean(d, 0.0);
  for (const auto& r : rows) {
    for (std::size_t j = 0; j < d; ++j) mean[j] += r[j];
  }
  for (double& m : mean) m /= static_cast<double>(n);
  std::vector<double> cov(d * d, 0.0);
  for (const auto& r : rows) {
    for (std::size_t i = 0; i < d; ++i) {
      for (std::size_t j = 0; j < d; ++j) cov[i * d + j] += (r[i] - mean[i]) * (r[j] - mean[j]);
    }
  }
  for (double& c : cov) c /= static_cast<double>(n - 1);
  return cov;
}

}  // namespace slr::test
