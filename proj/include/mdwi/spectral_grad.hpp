#pragma once

// Backward passes of the spectral layers log_id / exp_id (matrix
// backpropagation through the eigendecomposition), the sphere maps used for
// ODF synthesis, and a central finite-difference checker.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>

#include "mdwi/odf.hpp"
#include "mdwi/spd.hpp"

namespace mdwi {

enum class MapTag { log, exp };

inline const char* to_string(MapTag t) { return t == MapTag::log ? "log" : "exp"; }

/// Forward-pass state kept for the backward pass of one voxel.
template <typename Scalar>
struct SpectralContext {
  EigenDecomp3<Scalar> eig;
  MapTag map = MapTag::log;
};

/// Relative eigengap under which the Loewner entry 1/(s_i - s_j) is replaced
/// by its divided-difference limit f'(s).
inline constexpr double kLoewnerGap = 1e-6;

/// K(i,j) = 1/(s_i - s_j) off the diagonal, 0 on it and for pairs closer
/// than kLoewnerGap * max|s| (those are handled by the caller).
template <typename Scalar>
Mat3<Scalar> loewner_matrix(const Vec3<Scalar>& s) {
  const Scalar eps = Scalar(kLoewnerGap) * s.cwiseAbs().maxCoeff();
  Mat3<Scalar> k = Mat3<Scalar>::Zero();
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      if (i != j && std::abs(s(i) - s(j)) > eps) k(i, j) = Scalar(1) / (s(i) - s(j));
  return k;
}

/// Runs the forward map and records the decomposition of its input.
template <typename Derived>
SpectralContext<typename Derived::Scalar> spectral_forward(MapTag map, const Eigen::MatrixBase<Derived>& input,
                                                           Mat3<typename Derived::Scalar>& output) {
  using Scalar = typename Derived::Scalar;
  if (!input.allFinite()) fail(ErrorKind::invalid_argument, "spectral_forward: non-finite input");
  SpectralContext<Scalar> ctx{eig_sym3(input), map};
  if (map == MapTag::log) {
    output = log_id(ctx.eig);
  } else {
    output = spectral_apply(ctx.eig, [](Scalar x) { return std::exp(x); });
  }
  return ctx;
}

namespace detail {

// Shared assembly: dL/dM = U (sym(K^T o (U^T dL/dU)) + diag(dL/dSigma)) U^T,
// with dL/dU = 2 sym(G) U f(Sigma) and dL/dSigma = f'(Sigma) U^T sym(G) U.
template <typename Scalar, typename F, typename DF>
Mat3<Scalar> spectral_backward(const EigenDecomp3<Scalar>& e, const Mat3<Scalar>& upstream, F f, DF df) {
  if (!upstream.allFinite()) fail(ErrorKind::invalid_argument, "spectral backward: non-finite upstream gradient");
  const Mat3<Scalar>& u = e.vectors;
  const Vec3<Scalar>& s = e.values;
  const Mat3<Scalar> g = sym(upstream);

  Vec3<Scalar> fs, dfs;
  for (int i = 0; i < 3; ++i) {
    fs(i) = f(s(i));
    dfs(i) = df(s(i));
  }
  const Mat3<Scalar> g_hat = u.transpose() * g * u;
  const Mat3<Scalar> d_u = Scalar(2) * g * u * fs.asDiagonal();
  const Mat3<Scalar> d_sigma = (dfs.asDiagonal() * g_hat).diagonal().asDiagonal();

  const Mat3<Scalar> k = loewner_matrix<Scalar>(s);
  Mat3<Scalar> inner = sym(Mat3<Scalar>(k.transpose().cwiseProduct(u.transpose() * d_u)));
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) {
      if (i != j && k(i, j) == Scalar(0)) inner(i, j) = df((s(i) + s(j)) / Scalar(2)) * g_hat(i, j);
    }
  }
  return u * (inner + d_sigma) * u.transpose();
}

}  // namespace detail

/// Gradient of a scalar loss w.r.t. the SPD input of log_id, given the
/// gradient w.r.t. its output.
template <typename Scalar>
Mat3<Scalar> log_id_backward(const SpectralContext<Scalar>& ctx, const Mat3<Scalar>& upstream) {
  if (ctx.map != MapTag::log) fail(ErrorKind::invalid_argument, "log_id_backward: context is not from log_id");
  if (!(ctx.eig.values(2) > Scalar(0))) fail(ErrorKind::not_on_manifold, "log_id_backward: non-SPD context");
  return detail::spectral_backward<Scalar>(
      ctx.eig, upstream, [](Scalar x) { return std::log(x); }, [](Scalar x) { return Scalar(1) / x; });
}

/// Gradient of a scalar loss w.r.t. the symmetric input of exp_id.
template <typename Scalar>
Mat3<Scalar> exp_id_backward(const SpectralContext<Scalar>& ctx, const Mat3<Scalar>& upstream) {
  if (ctx.map != MapTag::exp) fail(ErrorKind::invalid_argument, "exp_id_backward: context is not from exp_id");
  const auto ex = [](Scalar x) { return std::exp(x); };
  return detail::spectral_backward<Scalar>(ctx.eig, upstream, ex, ex);
}

/// Packed-channel view of a symmetric gradient: the xy, xz, yz channels
/// each stand for two matrix entries, so they carry twice the entry.
template <typename Scalar>
Sym6<Scalar> pack_sym_gradient(const Mat3<Scalar>& g) {
  Sym6<Scalar> v = pack_sym(g);
  v(1) *= Scalar(2);
  v(2) *= Scalar(2);
  v(4) *= Scalar(2);
  return v;
}

template <typename Scalar>
Mat3<Scalar> unpack_sym_gradient(const Sym6<Scalar>& v) {
  Sym6<Scalar> half = v;
  half(1) /= Scalar(2);
  half(2) /= Scalar(2);
  half(4) /= Scalar(2);
  return unpack_sym(half);
}

/// Vector-Jacobian product of exp_u at tangent vector v. Component 0 of the
/// result is zero (v is constrained to the tangent plane at u).
template <typename Scalar>
ShVec<Scalar> exp_u_backward(const ShVec<Scalar>& v, const ShVec<Scalar>& upstream) {
  ShVec<Scalar> vt = v;
  vt(0) = Scalar(0);
  ShVec<Scalar> gt = upstream;
  const Scalar g0 = gt(0);
  gt(0) = Scalar(0);
  const Scalar psi = vt.norm();
  Scalar sinc, dsinc_over_psi;
  if (psi < Scalar(1e-4)) {
    const Scalar p2 = psi * psi;
    sinc = Scalar(1) - p2 / Scalar(6);
    dsinc_over_psi = Scalar(-1) / Scalar(3) + p2 / Scalar(30);
  } else {
    sinc = std::sin(psi) / psi;
    dsinc_over_psi = (psi * std::cos(psi) - std::sin(psi)) / (psi * psi * psi);
  }
  ShVec<Scalar> grad = sinc * gt + (gt.dot(vt) * dsinc_over_psi - g0 * sinc) * vt;
  grad(0) = Scalar(0);
  return grad;
}

/// Vector-Jacobian product of log_u at c (c treated as a free vector).
template <typename Scalar>
ShVec<Scalar> log_u_backward(const ShVec<Scalar>& c, const ShVec<Scalar>& upstream) {
  ShVec<Scalar> tail = c;
  const Scalar c0 = tail(0);
  tail(0) = Scalar(0);
  ShVec<Scalar> gt = upstream;
  gt(0) = Scalar(0);
  const Scalar t = tail.norm();
  const Scalar gdot = gt.dot(tail);
  const Scalar rr = t * t + c0 * c0;
  Scalar ratio, dratio_over_t;
  if (t < Scalar(1e-4) * std::abs(c0)) {
    const Scalar c3 = c0 * c0 * c0;
    ratio = Scalar(1) / c0 - t * t / (Scalar(3) * c3);
    dratio_over_t = Scalar(-2) / (Scalar(3) * c3);
  } else {
    const Scalar psi = std::atan2(t, c0);
    ratio = psi / t;
    dratio_over_t = (c0 * t / rr - psi) / (t * t * t);
  }
  ShVec<Scalar> grad = ratio * gt + gdot * dratio_over_t * tail;
  grad(0) = -gdot / rr;
  return grad;
}

enum class GradcheckStatus { ok, skipped_degenerate };

struct GradcheckResult {
  GradcheckStatus status = GradcheckStatus::ok;
  double max_rel_error = 0.0;
  double min_eigengap = 0.0;
};

/// Central finite-difference check of the analytic backward pass for the
/// linear loss L(M) = <W, f(M)>, over the 6 packed components of M.
/// Inputs whose smallest eigengap is <= min_gap are skipped, not scored.
GradcheckResult fd_gradcheck(MapTag map, const Mat3d& m, const Mat3d& loss_weights, double step = 1e-5,
                             double min_gap = 1e-3);

}  // namespace mdwi
