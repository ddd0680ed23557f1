#pragma once

// Log-Euclidean framework on SPD(3): closed-form symmetric eigensolver,
// log/exp maps at the identity, geodesic distance, FA and principal direction.

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numbers>

#include "mdwi/common.hpp"

namespace mdwi {

template <typename Scalar>
using Mat3 = Eigen::Matrix<Scalar, 3, 3>;
template <typename Scalar>
using Vec3 = Eigen::Matrix<Scalar, 3, 1>;
/// Packed symmetric 3x3 matrix, upper triangle order xx, xy, xz, yy, yz, zz.
template <typename Scalar>
using Sym6 = Eigen::Matrix<Scalar, 6, 1>;

using Mat3d = Mat3<double>;
using Vec3d = Vec3<double>;
using Sym6d = Sym6<double>;

/// Eigenvalues at or below this are treated as off the SPD manifold.
inline constexpr double kSpdFloor = 1e-12;

enum class SpdPolicy {
  strict,   ///< reject eigenvalues <= kSpdFloor
  lenient,  ///< clamp positive eigenvalues below the floor up to it
};

template <typename Derived>
Sym6<typename Derived::Scalar> pack_sym(const Eigen::MatrixBase<Derived>& m) {
  Sym6<typename Derived::Scalar> v;
  v << m(0, 0), m(0, 1), m(0, 2), m(1, 1), m(1, 2), m(2, 2);
  return v;
}

template <typename Derived>
Mat3<typename Derived::Scalar> unpack_sym(const Eigen::MatrixBase<Derived>& v) {
  Mat3<typename Derived::Scalar> m;
  m << v(0), v(1), v(2),
       v(1), v(3), v(4),
       v(2), v(4), v(5);
  return m;
}

template <typename Derived>
Mat3<typename Derived::Scalar> sym(const Eigen::MatrixBase<Derived>& a) {
  return (a + a.transpose()) / typename Derived::Scalar(2);
}

template <typename Scalar>
struct EigenDecomp3 {
  Vec3<Scalar> values;   ///< descending
  Mat3<Scalar> vectors;  ///< columns match values

  Mat3<Scalar> reconstruct() const {
    return vectors * values.asDiagonal() * vectors.transpose();
  }
};

/// Flips v so that its first non-negligible component is nonnegative.
template <typename Scalar>
Vec3<Scalar> sign_normalized(const Vec3<Scalar>& v) {
  for (int i = 0; i < 3; ++i) {
    if (std::abs(v(i)) > Scalar(1e-12)) return v(i) < 0 ? Vec3<Scalar>(-v) : v;
  }
  return v;
}

namespace detail {

template <typename Scalar>
bool all_finite(const Mat3<Scalar>& m) {
  return m.allFinite();
}

// Cyclic Jacobi rotations. Converges for any symmetric input, used near
// eigenvalue degeneracy where the closed form loses its vectors.
template <typename Scalar>
void jacobi_sym3(Mat3<Scalar> a, Vec3<Scalar>& values, Mat3<Scalar>& vectors) {
  vectors.setIdentity();
  const Scalar scale = a.cwiseAbs().maxCoeff();
  for (int sweep = 0; sweep < 64; ++sweep) {
    const Scalar off = std::abs(a(0, 1)) + std::abs(a(0, 2)) + std::abs(a(1, 2));
    if (off <= std::numeric_limits<Scalar>::min() ||
        off <= scale * std::numeric_limits<Scalar>::epsilon() * Scalar(1e-3))
      break;
    for (int p = 0; p < 2; ++p) {
      for (int q = p + 1; q < 3; ++q) {
        const Scalar apq = a(p, q);
        if (apq == Scalar(0)) continue;
        const Scalar theta = (a(q, q) - a(p, p)) / (Scalar(2) * apq);
        const Scalar t = (theta >= 0 ? Scalar(1) : Scalar(-1)) /
                         (std::abs(theta) + std::sqrt(theta * theta + Scalar(1)));
        const Scalar c = Scalar(1) / std::sqrt(t * t + Scalar(1));
        const Scalar s = t * c;
        Mat3<Scalar> rot = Mat3<Scalar>::Identity();
        rot(p, p) = c;
        rot(q, q) = c;
        rot(p, q) = s;
        rot(q, p) = -s;
        a = rot.transpose() * a * rot;
        a(p, q) = a(q, p) = Scalar(0);
        vectors = vectors * rot;
      }
    }
  }
  values = a.diagonal();
}

// Unit vector orthogonal to the nullspace-defining rows of (A - lambda I),
// picked from the best-conditioned cross product of two rows.
template <typename Scalar>
Vec3<Scalar> nullspace_vector(const Mat3<Scalar>& shifted) {
  const Vec3<Scalar> r0 = shifted.row(0).transpose();
  const Vec3<Scalar> r1 = shifted.row(1).transpose();
  const Vec3<Scalar> r2 = shifted.row(2).transpose();
  const std::array<Vec3<Scalar>, 3> cands = {r0.cross(r1), r0.cross(r2), r1.cross(r2)};
  int best = 0;
  Scalar best_norm = cands[0].squaredNorm();
  for (int i = 1; i < 3; ++i) {
    const Scalar n = cands[i].squaredNorm();
    if (n > best_norm) {
      best_norm = n;
      best = i;
    }
  }
  return cands[best] / std::sqrt(best_norm);
}

template <typename Scalar>
void orthonormal_complement(const Vec3<Scalar>& w, Vec3<Scalar>& u, Vec3<Scalar>& v) {
  if (std::abs(w(0)) > std::abs(w(1))) {
    const Scalar inv = Scalar(1) / std::sqrt(w(0) * w(0) + w(2) * w(2));
    u = Vec3<Scalar>(-w(2) * inv, 0, w(0) * inv);
  } else {
    const Scalar inv = Scalar(1) / std::sqrt(w(1) * w(1) + w(2) * w(2));
    u = Vec3<Scalar>(0, w(2) * inv, -w(1) * inv);
  }
  v = w.cross(u);
}

// Eigenvector for `lambda` restricted to the plane orthogonal to `v0`.
template <typename Scalar>
Vec3<Scalar> complement_vector(const Mat3<Scalar>& a, const Vec3<Scalar>& v0, Scalar lambda) {
  Vec3<Scalar> u, v;
  orthonormal_complement(v0, u, v);
  const Vec3<Scalar> au = a * u;
  const Vec3<Scalar> av = a * v;
  Scalar m00 = u.dot(au) - lambda;
  Scalar m01 = u.dot(av);
  Scalar m11 = v.dot(av) - lambda;
  const Scalar a00 = std::abs(m00), a01 = std::abs(m01), a11 = std::abs(m11);
  if (a00 >= a11) {
    const Scalar mx = std::max(a00, a01);
    if (mx > 0) {
      if (a00 >= a01) {
        m01 /= m00;
        m00 = Scalar(1) / std::sqrt(Scalar(1) + m01 * m01);
        m01 *= m00;
      } else {
        m00 /= m01;
        m01 = Scalar(1) / std::sqrt(Scalar(1) + m00 * m00);
        m00 *= m01;
      }
      return (m01 * u - m00 * v).normalized();
    }
    return u;
  }
  const Scalar mx = std::max(a11, a01);
  if (mx > 0) {
    if (a11 >= a01) {
      m01 /= m11;
      m11 = Scalar(1) / std::sqrt(Scalar(1) + m01 * m01);
      m01 *= m11;
    } else {
      m11 /= m01;
      m01 = Scalar(1) / std::sqrt(Scalar(1) + m11 * m11);
      m11 *= m01;
    }
    return (m11 * u - m01 * v).normalized();
  }
  return u;
}

}  // namespace detail

/// Relative eigenvalue gap below which the solver switches to Jacobi.
inline constexpr double kClosedFormGap = 1e-6;

/// Eigendecomposition of a symmetric 3x3 matrix. Eigenvalues come out
/// descending; each eigenvector has its first non-negligible component
/// nonnegative. Only the upper triangle is read.
template <typename Derived>
EigenDecomp3<typename Derived::Scalar> eig_sym3(const Eigen::MatrixBase<Derived>& input) {
  using Scalar = typename Derived::Scalar;
  const Mat3<Scalar> upper = input;
  const Mat3<Scalar> a = upper.template selfadjointView<Eigen::Upper>();
  if (!detail::all_finite(a)) fail(ErrorKind::invalid_argument, "eig_sym3: non-finite input");

  const Scalar scale = a.cwiseAbs().maxCoeff();
  EigenDecomp3<Scalar> out;
  if (scale == Scalar(0)) {
    out.values.setZero();
    out.vectors.setIdentity();
    return out;
  }
  const Mat3<Scalar> b = a / scale;
  Vec3<Scalar> vals;
  Mat3<Scalar> vecs;

  const Scalar p1 = b(0, 1) * b(0, 1) + b(0, 2) * b(0, 2) + b(1, 2) * b(1, 2);
  if (p1 == Scalar(0)) {
    vals = b.diagonal();
    vecs.setIdentity();
  } else {
    // Trigonometric solution of the characteristic cubic.
    const Scalar q = b.trace() / Scalar(3);
    const Scalar d0 = b(0, 0) - q, d1 = b(1, 1) - q, d2 = b(2, 2) - q;
    const Scalar p2 = d0 * d0 + d1 * d1 + d2 * d2 + Scalar(2) * p1;
    const Scalar p = std::sqrt(p2 / Scalar(6));
    const Mat3<Scalar> c = (b - q * Mat3<Scalar>::Identity()) / p;
    const Scalar r = std::clamp(c.determinant() / Scalar(2), Scalar(-1), Scalar(1));
    const Scalar phi = std::acos(r) / Scalar(3);
    const Scalar l0 = q + Scalar(2) * p * std::cos(phi);
    const Scalar l2 = q + Scalar(2) * p * std::cos(phi + Scalar(2) * std::numbers::pi_v<Scalar> / Scalar(3));
    const Scalar l1 = Scalar(3) * q - l0 - l2;
    const Scalar span = std::max({std::abs(l0), std::abs(l1), std::abs(l2)});
    const Scalar gap = std::min(l0 - l1, l1 - l2);
    if (gap < Scalar(kClosedFormGap) * span) {
      detail::jacobi_sym3(b, vals, vecs);
    } else {
      // Start from the eigenvalue farther from the middle one; the second
      // vector is solved in its orthogonal complement, the third is a cross.
      const bool top_first = (l0 - l1) >= (l1 - l2);
      const Scalar first = top_first ? l0 : l2;
      const Vec3<Scalar> v_first = detail::nullspace_vector<Scalar>(b - first * Mat3<Scalar>::Identity());
      const Vec3<Scalar> v_mid = detail::complement_vector<Scalar>(b, v_first, l1);
      const Vec3<Scalar> v_last = v_first.cross(v_mid);
      Mat3<Scalar> basis;
      if (top_first) {
        basis << v_first, v_mid, v_last;
      } else {
        basis << v_last, v_mid, v_first;
      }
      // The cubic's roots lose digits near a double root; a Jacobi pass on
      // the almost-diagonal projected matrix restores full precision.
      Mat3<Scalar> rot;
      detail::jacobi_sym3<Scalar>(basis.transpose() * b * basis, vals, rot);
      vecs = basis * rot;
    }
  }

  std::array<int, 3> order = {0, 1, 2};
  std::stable_sort(order.begin(), order.end(), [&](int i, int j) { return vals(i) > vals(j); });
  for (int k = 0; k < 3; ++k) {
    out.values(k) = vals(order[k]) * scale;
    out.vectors.col(k) = sign_normalized<Scalar>(vecs.col(order[k]));
  }
  return out;
}

/// Applies a scalar function to the spectrum: U f(Sigma) U^T.
template <typename Scalar, typename F>
Mat3<Scalar> spectral_apply(const EigenDecomp3<Scalar>& e, F&& f) {
  Vec3<Scalar> fv;
  for (int i = 0; i < 3; ++i) fv(i) = f(e.values(i));
  return e.vectors * fv.asDiagonal() * e.vectors.transpose();
}

template <typename Derived>
bool is_spd(const Eigen::MatrixBase<Derived>& m, double floor = kSpdFloor) {
  using Scalar = typename Derived::Scalar;
  if (!m.allFinite()) return false;
  return eig_sym3(m).values(2) > Scalar(floor);
}

/// Matrix logarithm of an SPD tensor (tangent plane at the identity).
template <typename Scalar>
Mat3<Scalar> log_id(const EigenDecomp3<Scalar>& e, SpdPolicy policy = SpdPolicy::strict) {
  const Scalar floor = Scalar(kSpdFloor);
  if (policy == SpdPolicy::strict) {
    if (!(e.values(2) > floor)) fail(ErrorKind::not_on_manifold, "log_id: not on manifold (eigenvalue <= floor)");
  } else if (!(e.values(2) > Scalar(0))) {
    fail(ErrorKind::not_on_manifold, "log_id: not on manifold (non-positive eigenvalue)");
  }
  return spectral_apply(e, [floor](Scalar s) { return std::log(std::max(s, floor)); });
}

template <typename Derived>
Mat3<typename Derived::Scalar> log_id(const Eigen::MatrixBase<Derived>& p,
                                      SpdPolicy policy = SpdPolicy::strict) {
  return log_id(eig_sym3(p), policy);
}

/// Matrix exponential of a symmetric tangent matrix; SPD for finite input.
template <typename Derived>
Mat3<typename Derived::Scalar> exp_id(const Eigen::MatrixBase<Derived>& s) {
  using Scalar = typename Derived::Scalar;
  if (!s.allFinite()) fail(ErrorKind::invalid_argument, "exp_id: non-finite input");
  return spectral_apply(eig_sym3(s), [](Scalar x) { return std::exp(x); });
}

/// Log-Euclidean geodesic distance ||log P1 - log P2||_F.
template <typename D1, typename D2>
typename D1::Scalar geodesic_spd(const Eigen::MatrixBase<D1>& p1, const Eigen::MatrixBase<D2>& p2) {
  return (log_id(p1) - log_id(p2)).norm();
}

/// Fractional anisotropy from a (descending) spectrum.
template <typename Scalar>
Scalar fa(const Vec3<Scalar>& l) {
  if (l(2) < Scalar(-1e-12) * std::abs(l(0)))
    fail(ErrorKind::not_on_manifold, "fa: negative eigenvalue");
  const Scalar den = l.squaredNorm();
  if (!(den > Scalar(0))) fail(ErrorKind::degenerate, "fa: degenerate tensor (all-zero eigenvalues)");
  const Scalar d01 = l(0) - l(1), d12 = l(1) - l(2), d02 = l(0) - l(2);
  const Scalar num = d01 * d01 + d12 * d12 + d02 * d02;
  return std::min(Scalar(1), std::sqrt(num / (Scalar(2) * den)));
}

template <typename Scalar>
Scalar fa(const EigenDecomp3<Scalar>& e) {
  return fa<Scalar>(e.values);
}

/// Relative leading-eigenvalue gap below which the direction is refused.
inline constexpr double kDirectionTie = 1e-9;

template <typename Scalar>
Vec3<Scalar> principal_direction(const EigenDecomp3<Scalar>& e, double tie = kDirectionTie) {
  if (!(e.values(0) - e.values(1) > Scalar(tie) * std::abs(e.values(0))))
    fail(ErrorKind::degenerate, "principal_direction: ill-defined direction (tied leading eigenvalues)");
  return e.vectors.col(0);
}

}  // namespace mdwi
