#include "mdwi/losses.hpp"

#include <cmath>

#include "mdwi/odf.hpp"
#include "mdwi/parallel.hpp"
#include "mdwi/spd.hpp"

namespace mdwi {

void LossWeights::validate() const {
  for (double v : {cyc_x, cyc_y, prior_x, prior_y})
    if (!(v >= 0.0) || !std::isfinite(v)) fail(ErrorKind::invalid_argument, "LossWeights: weights must be finite and >= 0");
}

namespace {

void require_scores(const Eigen::VectorXd& s, const char* what) {
  if (s.size() == 0) fail(ErrorKind::invalid_argument, std::string(what) + ": empty batch");
  if (!s.allFinite()) fail(ErrorKind::invalid_argument, std::string(what) + ": non-finite score");
}

void require_same(const VolumeD& a, const VolumeD& b, const char* what) {
  if (a.dims() != b.dims() || a.channels() != b.channels())
    fail(ErrorKind::shape_mismatch, std::string(what) + ": shape mismatch");
}

void require_tangent(const VolumeD& v, const char* what) {
  if (v.domain() == Domain::tensor || v.domain() == Domain::odf)
    fail(ErrorKind::invalid_argument,
         std::string(what) + ": diffusion terms take log-domain values, got " + to_string(v.domain()));
}

}  // namespace

double lsgan_d_loss(const Eigen::VectorXd& real, const Eigen::VectorXd& fake, Eigen::VectorXd* d_real,
                    Eigen::VectorXd* d_fake) {
  require_scores(real, "lsgan_d_loss");
  require_scores(fake, "lsgan_d_loss");
  const Eigen::ArrayXd r = real.array() - 1.0;
  if (d_real) *d_real = r.matrix() / static_cast<double>(real.size());
  if (d_fake) *d_fake = fake / static_cast<double>(fake.size());
  return 0.5 * r.square().mean() + 0.5 * fake.array().square().mean();
}

double lsgan_g_loss(const Eigen::VectorXd& fake, Eigen::VectorXd* d_fake) {
  require_scores(fake, "lsgan_g_loss");
  const Eigen::ArrayXd f = fake.array() - 1.0;
  if (d_fake) *d_fake = f.matrix() / static_cast<double>(fake.size());
  return 0.5 * f.square().mean();
}

double l1_loss(const VolumeD& pred, const VolumeD& target, const VolumeD* weight, VolumeD* grad) {
  require_same(pred, target, "l1_loss");
  if (weight && (weight->dims() != pred.dims() || weight->channels() != 1))
    fail(ErrorKind::shape_mismatch, "l1_loss: weight map must be one channel on the same grid");
  const std::size_t voxels = pred.voxels();
  const int channels = pred.channels();
  const double inv = 1.0 / (static_cast<double>(voxels) * channels);
  if (grad) *grad = VolumeD(pred.header());
  double sum = 0.0;
  for (int c = 0; c < channels; ++c) {
    for (std::size_t v = 0; v < voxels; ++v) {
      const double w = weight ? weight->at(v, 0) : 1.0;
      const double d = pred.at(v, c) - target.at(v, c);
      sum += w * std::abs(d);
      if (grad) grad->at(v, c) = d > 0.0 ? w * inv : (d < 0.0 ? -w * inv : 0.0);
    }
  }
  const double value = sum * inv;
  if (!std::isfinite(value)) fail(ErrorKind::divergence, "l1_loss: non-finite value");
  return value;
}

VolumeD anisotropy_weight(const VolumeD& target_log) {
  VolumeHeader h = target_log.header();
  h.channels = 1;
  h.domain = Domain::scalar;
  VolumeD out(h);
  if (target_log.domain() == Domain::tensor_log) {
    parallel_for(out.voxels(), [&](std::size_t v) {
      const Mat3d s = target_log.matrix(v);
      if (!s.allFinite()) fail(ErrorKind::invalid_argument, "anisotropy_weight: non-finite diffusion value");
      auto e = eig_sym3(s);
      e.values = e.values.array().exp().matrix();
      out.at(v, 0) = fa(e.values);
    });
  } else if (target_log.domain() == Domain::odf_log) {
    parallel_for(out.voxels(), [&](std::size_t v) { out.at(v, 0) = gfa(exp_u(target_log.vector(v))); });
  } else {
    fail(ErrorKind::invalid_argument,
         std::string("anisotropy_weight: expected tensor-log or odf-log volume, got ") + to_string(target_log.domain()));
  }
  return out;
}

double cycle_loss(const VolumeD& x, const VolumeD& x_rec, const VolumeD& y_log_up, const VolumeD& y_rec_hr,
                  const VolumeD& y_log, const VolumeD& y_rec_lr, const LossWeights& w, const VolumeD& aniso_hr,
                  const VolumeD& aniso_lr, CycleGradients* grads) {
  w.validate();
  require_tangent(y_log_up, "cycle_loss");
  require_tangent(y_rec_hr, "cycle_loss");
  require_tangent(y_log, "cycle_loss");
  require_tangent(y_rec_lr, "cycle_loss");
  VolumeD* gx = grads ? &grads->x_rec : nullptr;
  VolumeD* ghr = grads ? &grads->y_rec_hr : nullptr;
  VolumeD* glr = grads ? &grads->y_rec_lr : nullptr;
  const double lx = l1_loss(x_rec, x, nullptr, gx);
  const double lhr = l1_loss(y_rec_hr, y_log_up, &aniso_hr, ghr);
  const double llr = l1_loss(y_rec_lr, y_log, &aniso_lr, glr);
  if (grads) {
    for (double& g : grads->x_rec.data()) g *= w.cyc_x;
    for (double& g : grads->y_rec_hr.data()) g *= 0.5 * w.cyc_y;
    for (double& g : grads->y_rec_lr.data()) g *= 0.5 * w.cyc_y;
  }
  return w.cyc_x * lx + 0.5 * w.cyc_y * lhr + 0.5 * w.cyc_y * llr;
}

double prior_loss(const VolumeD& gen_y, const VolumeD& y_log_up_paired, const VolumeD& gen_x, const VolumeD& x_paired,
                  const LossWeights& w, const VolumeD& aniso, PriorGradients* grads) {
  w.validate();
  require_tangent(gen_y, "prior_loss");
  require_tangent(y_log_up_paired, "prior_loss");
  const double ly = l1_loss(gen_y, y_log_up_paired, &aniso, grads ? &grads->gen_y : nullptr);
  const double lx = l1_loss(gen_x, x_paired, nullptr, grads ? &grads->gen_x : nullptr);
  if (grads) {
    for (double& g : grads->gen_y.data()) g *= w.prior_x;
    for (double& g : grads->gen_x.data()) g *= w.prior_y;
  }
  return w.prior_x * ly + w.prior_y * lx;
}

ObjectiveBreakdown full_objective(const ObjectiveParts& p) {
  ObjectiveBreakdown b;
  b.terms = {{"g_adv_x", p.g_adv_x}, {"g_adv_y", p.g_adv_y}, {"cycle", p.cycle}, {"prior", p.prior}};
  for (const auto& [name, value] : b.terms) b.generator += value;
  b.discriminator = p.d_x + p.d_y;
  b.signed_total = -p.d_x - p.d_y + p.cycle + p.prior;
  return b;
}

}  // namespace mdwi
