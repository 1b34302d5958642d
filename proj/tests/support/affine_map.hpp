#pragma once

// Synthetic coupling maps for coordinator tests: v_hat = M v + B r + b and
// J = 0.5 (r - r0)' Q (r - r0) + |v|^2 * cost_v.

#include "hiercoord/coordinator.hpp"

#include <Eigen/Eigenvalues>
#include <random>

namespace hctest {

using hiercoord::Matrix;
using hiercoord::Vector;

class AffineMap final : public hiercoord::CouplingMap {
 public:
  Matrix M;
  Matrix B;  // length x dim(r), may be empty
  Vector b;
  double cost_v = 0.0;
  mutable int rounds = 0;

  std::size_t length() const override { return static_cast<std::size_t>(b.size()); }
  hiercoord::RoundOutput round(const Vector& r, const Vector& v) const override {
    ++rounds;
    hiercoord::RoundOutput out;
    out.v_in_hat = M * v + b;
    if (B.size() > 0) out.v_in_hat += B * r;
    out.costs = {cost_v * v.squaredNorm()};
    return out;
  }
  /// The fixed point (I - M)^{-1} (B r + b).
  Vector direct(const Vector& r) const {
    Vector rhs = b;
    if (B.size() > 0) rhs += B * r;
    const Matrix I = Matrix::Identity(M.rows(), M.cols());
    return (I - M).fullPivLu().solve(rhs);
  }
};

/// Random matrix rescaled to the given spectral radius.
inline Matrix random_contraction(int n, double radius, std::mt19937& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  Matrix m(n, n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) m(i, j) = g(rng);
  }
  const double rho = Eigen::EigenSolver<Matrix>(m).eigenvalues().cwiseAbs().maxCoeff();
  return m * (radius / rho);
}

inline Vector random_vector(int n, std::mt19937& rng, double scale = 1.0) {
  std::normal_distribution<double> g(0.0, scale);
  Vector v(n);
  for (int i = 0; i < n; ++i) v[i] = g(rng);
  return v;
}

/// Scalar map on one channel: v_hat = gain * v + offset.
inline AffineMap scalar_map(double gain, double offset) {
  AffineMap m;
  m.M = Matrix::Constant(1, 1, gain);
  m.b = Vector::Constant(1, offset);
  return m;
}

}  // namespace hctest
