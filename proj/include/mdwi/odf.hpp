#pragma once

// Square-root ODF framework: real even-order spherical harmonics, the
// sphere log/exp maps at the uniform ODF, GFA, geodesic and peak extraction.

#include <Eigen/Dense>

#include <cmath>
#include <numbers>
#include <vector>

#include "mdwi/common.hpp"
#include "mdwi/sphere.hpp"

namespace mdwi {

template <typename Scalar>
using ShVec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

/// Number of real symmetric SH functions up to even order L.
constexpr int sh_count(int order) { return (order + 1) * (order + 2) / 2; }

/// Flat index of (l, m), l even, -l <= m <= l.
constexpr int sh_index(int l, int m) { return l * (l + 1) / 2 + m; }

/// Real symmetric SH function: sqrt(2) Re for m < 0, sqrt(2) Im for m > 0.
double real_sh(int l, int m, double theta, double phi);

/// Coefficient vector of the uniform square-root ODF, u = (1, 0, ..., 0).
template <typename Scalar = double>
ShVec<Scalar> uniform_coeffs(int k) {
  ShVec<Scalar> u = ShVec<Scalar>::Zero(k);
  u(0) = Scalar(1);
  return u;
}

/// Tolerance on ||c|| = 1 for points of the coefficient sphere.
inline constexpr double kUnitNormTol = 1e-8;

enum class OrthantPolicy {
  positive,      ///< require c0 > 0 (parameter space of valid ODFs)
  whole_sphere,  ///< accept any point short of the antipode of u
};

/// Sphere log map at u: the tangent vector pointing from u to c, with
/// length equal to the arc angle.
template <typename Derived>
ShVec<typename Derived::Scalar> log_u(const Eigen::MatrixBase<Derived>& c,
                                      OrthantPolicy policy = OrthantPolicy::positive) {
  using Scalar = typename Derived::Scalar;
  if (c.size() < 1 || !c.allFinite()) fail(ErrorKind::invalid_argument, "log_u: invalid coefficients");
  if (std::abs(c.norm() - Scalar(1)) > Scalar(kUnitNormTol))
    fail(ErrorKind::not_on_manifold, "log_u: coefficients not unit norm");
  const Scalar c0 = c(0);
  if (policy == OrthantPolicy::positive && !(c0 > Scalar(0)))
    fail(ErrorKind::not_on_manifold, "log_u: outside positive orthant (c0 <= 0)");
  ShVec<Scalar> v = c;
  v(0) = Scalar(0);
  const Scalar tail = v.norm();
  if (tail == Scalar(0)) {
    if (c0 < Scalar(0)) fail(ErrorKind::not_on_manifold, "log_u: antipode of u has no log");
    return v;
  }
  // atan2 keeps the angle accurate at both ends of [0, pi).
  const Scalar psi = std::atan2(tail, c0);
  return v * (psi / tail);
}

/// Sphere exp map at u. Input must be tangent at u (v0 = 0) with norm < pi.
template <typename Derived>
ShVec<typename Derived::Scalar> exp_u(const Eigen::MatrixBase<Derived>& v) {
  using Scalar = typename Derived::Scalar;
  if (v.size() < 1 || !v.allFinite()) fail(ErrorKind::invalid_argument, "exp_u: invalid tangent vector");
  if (std::abs(v(0)) > Scalar(kUnitNormTol)) fail(ErrorKind::invalid_argument, "exp_u: vector not tangent at u");
  const Scalar psi = v.norm();
  if (psi >= std::numbers::pi_v<Scalar>) fail(ErrorKind::not_on_manifold, "exp_u: cut locus exceeded");
  const Scalar sinc = psi < Scalar(1e-8) ? Scalar(1) - psi * psi / Scalar(6) : std::sin(psi) / psi;
  ShVec<Scalar> c = v * sinc;
  c(0) = std::cos(psi);
  return c;
}

/// Log-Euclidean ODF distance through the tangent plane at u.
template <typename D1, typename D2>
typename D1::Scalar geodesic_odf(const Eigen::MatrixBase<D1>& c1, const Eigen::MatrixBase<D2>& c2) {
  if (c1.size() != c2.size()) fail(ErrorKind::shape_mismatch, "geodesic_odf: size mismatch");
  return (log_u(c1) - log_u(c2)).norm();
}

/// Generalized FA from SH coefficients: sqrt(1 - c0^2 / sum c^2).
template <typename Derived>
typename Derived::Scalar gfa(const Eigen::MatrixBase<Derived>& c) {
  using Scalar = typename Derived::Scalar;
  const Scalar total = c.squaredNorm();
  if (!(total > Scalar(0))) fail(ErrorKind::degenerate, "gfa: zero coefficient vector");
  const Scalar ratio = c(0) * c(0) / total;
  return std::sqrt(std::max(Scalar(0), Scalar(1) - ratio));
}

/// Evaluation table of the real symmetric SH basis over a sphere grid, with
/// the weighted least-squares projector used for fitting.
class ShBasis {
 public:
  explicit ShBasis(int order = 4, const SphereGrid& grid = default_sphere());

  int order() const { return order_; }
  int size() const { return sh_count(order_); }
  const SphereGrid& grid() const { return grid_; }
  /// N x K, row i holds B_k(s_i).
  const Eigen::MatrixXd& matrix() const { return table_; }
  bool full_rank() const { return full_rank_; }
  /// K x N weighted least-squares projector; only valid when full_rank().
  const Eigen::MatrixXd& projector() const { return projector_; }

  Eigen::VectorXd evaluate(const Eigen::Vector3d& direction) const;

 private:
  int order_;
  SphereGrid grid_;
  Eigen::MatrixXd table_;
  Eigen::MatrixXd projector_;
  bool full_rank_ = false;
};

/// Order-4 basis over the default 642-vertex grid, built once.
const ShBasis& default_basis();

/// psi(s) = sum_k c_k B_k(s) on every grid vertex.
Eigen::VectorXd sh_eval(const Eigen::VectorXd& c, const ShBasis& basis);

/// Weighted least-squares projection of grid samples of psi, renormalized
/// to a unit coefficient vector.
Eigen::VectorXd fit_sh(const Eigen::VectorXd& psi, const ShBasis& basis);

struct PeakParams {
  double relative_threshold = 0.5;
  double min_separation_deg = 25.0;
};

/// Local maxima of p(s|c) = psi^2 over the grid graph. Values are shifted by
/// the grid minimum before thresholding, so flat ODFs have no peaks. Peaks
/// are antipodally collapsed, sign-normalized and sorted by value.
std::vector<Eigen::Vector3d> odf_maxima(const Eigen::VectorXd& c, const ShBasis& basis,
                                        const PeakParams& params = {});

/// Square root of the exact diffusion ODF of a Gaussian with tensor d,
/// p(s) = 1 / (4 pi sqrt(det d) (s^T d^-1 s)^(3/2)), sampled on the grid.
Eigen::VectorXd tensor_odf_sqrt(const Eigen::Matrix3d& d, const SphereGrid& grid);

/// Minimum of psi over the grid (PS_K nonnegativity audit).
double min_on_grid(const Eigen::VectorXd& c, const ShBasis& basis);

}  // namespace mdwi
