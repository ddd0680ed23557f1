#include "mdwi/odf.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "mdwi/spd.hpp"

namespace mdwi {

double real_sh(int l, int m, double theta, double phi) {
  const unsigned ul = static_cast<unsigned>(l);
  if (m == 0) return std::sph_legendre(ul, 0u, theta);
  const unsigned am = static_cast<unsigned>(std::abs(m));
  const double y = std::sqrt(2.0) * std::sph_legendre(ul, am, theta);
  return m < 0 ? y * std::cos(am * phi) : y * std::sin(am * phi);
}

ShBasis::ShBasis(int order, const SphereGrid& grid) : order_(order), grid_(grid) {
  if (order < 0 || order % 2 != 0) fail(ErrorKind::invalid_argument, "ShBasis: order must be even and >= 0");
  const int k = size();
  const int n = grid_.size();
  table_.resize(n, k);
  for (int i = 0; i < n; ++i) table_.row(i) = evaluate(grid_.directions[i]).transpose();

  const Eigen::VectorXd sw = grid_.weights.cwiseSqrt();
  const Eigen::MatrixXd design = sw.asDiagonal() * table_;
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(design);
  full_rank_ = n >= k && qr.rank() == k;
  if (full_rank_) {
    const Eigen::MatrixXd gram = design.transpose() * design;
    projector_ = gram.ldlt().solve(design.transpose() * sw.asDiagonal());
  }
}

Eigen::VectorXd ShBasis::evaluate(const Eigen::Vector3d& direction) const {
  const Eigen::Vector3d s = direction.normalized();
  const double theta = std::acos(std::clamp(s.z(), -1.0, 1.0));
  const double phi = std::atan2(s.y(), s.x());
  Eigen::VectorXd row(size());
  for (int l = 0; l <= order_; l += 2)
    for (int m = -l; m <= l; ++m) row(sh_index(l, m)) = real_sh(l, m, theta, phi);
  return row;
}

const ShBasis& default_basis() {
  static const ShBasis basis(4, default_sphere());
  return basis;
}

Eigen::VectorXd sh_eval(const Eigen::VectorXd& c, const ShBasis& basis) {
  if (c.size() != basis.size()) fail(ErrorKind::shape_mismatch, "sh_eval: coefficient count does not match basis");
  if (!c.allFinite()) fail(ErrorKind::invalid_argument, "sh_eval: non-finite coefficients");
  return basis.matrix() * c;
}

Eigen::VectorXd fit_sh(const Eigen::VectorXd& psi, const ShBasis& basis) {
  if (psi.size() != basis.grid().size()) fail(ErrorKind::shape_mismatch, "fit_sh: sample count does not match grid");
  if (!basis.full_rank()) fail(ErrorKind::degenerate, "fit_sh: rank-deficient design (grid too small for order)");
  Eigen::VectorXd c = basis.projector() * psi;
  const double n = c.norm();
  if (!(n > 0.0)) fail(ErrorKind::degenerate, "fit_sh: zero projection");
  return c / n;
}

std::vector<Eigen::Vector3d> odf_maxima(const Eigen::VectorXd& c, const ShBasis& basis,
                                        const PeakParams& params) {
  const Eigen::VectorXd psi = sh_eval(c, basis);
  const Eigen::VectorXd p = psi.cwiseMax(0.0).cwiseAbs2();
  const double pmin = p.minCoeff();
  const double pmax = p.maxCoeff();
  std::vector<Eigen::Vector3d> out;
  if (!(pmax - pmin > 1e-9 * pmax)) return out;

  const double threshold = params.relative_threshold * (pmax - pmin);
  const auto& grid = basis.grid();
  std::vector<int> candidates;
  for (int i = 0; i < grid.size(); ++i) {
    const double v = p(i) - pmin;
    if (v < threshold) continue;
    bool is_max = true;
    for (int j : grid.neighbors[i]) {
      if (p(j) > p(i)) {
        is_max = false;
        break;
      }
    }
    if (is_max) candidates.push_back(i);
  }
  std::stable_sort(candidates.begin(), candidates.end(), [&](int a, int b) { return p(a) > p(b); });

  const double cos_sep = std::cos(params.min_separation_deg * std::numbers::pi / 180.0);
  for (int i : candidates) {
    const Eigen::Vector3d d = sign_normalized<double>(grid.directions[i]);
    bool separate = true;
    for (const auto& kept : out) {
      if (std::abs(kept.dot(d)) > cos_sep) {
        separate = false;
        break;
      }
    }
    if (separate) out.push_back(d);
  }
  return out;
}

Eigen::VectorXd tensor_odf_sqrt(const Eigen::Matrix3d& d, const SphereGrid& grid) {
  const Eigen::Matrix3d inv = d.inverse();
  const double norm = 1.0 / (4.0 * std::numbers::pi * std::sqrt(d.determinant()));
  Eigen::VectorXd psi(grid.size());
  for (int i = 0; i < grid.size(); ++i) {
    const Eigen::Vector3d& s = grid.directions[i];
    psi(i) = std::sqrt(norm / std::pow(s.dot(inv * s), 1.5));
  }
  return psi;
}

double min_on_grid(const Eigen::VectorXd& c, const ShBasis& basis) {
  return sh_eval(c, basis).minCoeff();
}

}  // namespace mdwi
