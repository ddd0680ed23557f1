#include "mdwi/spectral_grad.hpp"

#include <cmath>

namespace mdwi {

namespace {

double linear_loss(MapTag map, const Mat3d& m, const Mat3d& w) {
  Mat3d out;
  spectral_forward(map, m, out);
  return w.cwiseProduct(out).sum();
}

}  // namespace

GradcheckResult fd_gradcheck(MapTag map, const Mat3d& m, const Mat3d& loss_weights, double step, double min_gap) {
  GradcheckResult result;
  const auto e = eig_sym3(m);
  result.min_eigengap = std::min(e.values(0) - e.values(1), e.values(1) - e.values(2));
  if (!(result.min_eigengap > min_gap) || (map == MapTag::log && !(e.values(2) > kSpdFloor))) {
    result.status = GradcheckStatus::skipped_degenerate;
    return result;
  }

  Mat3d out;
  const auto ctx = spectral_forward(map, m, out);
  const Mat3d grad = map == MapTag::log ? log_id_backward(ctx, loss_weights) : exp_id_backward(ctx, loss_weights);
  const Sym6d analytic = pack_sym_gradient(grad);

  const Sym6d base = pack_sym(m);
  for (int k = 0; k < 6; ++k) {
    Sym6d plus = base, minus = base;
    plus(k) += step;
    minus(k) -= step;
    const double fd = (linear_loss(map, unpack_sym(plus), loss_weights) -
                       linear_loss(map, unpack_sym(minus), loss_weights)) / (2.0 * step);
    const double rel = std::abs(analytic(k) - fd) / (std::abs(fd) + 1e-12);
    result.max_rel_error = std::max(result.max_rel_error, rel);
  }
  return result;
}

}  // namespace mdwi
