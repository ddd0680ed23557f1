#pragma once

// Synthesis losses: least-squares adversarial terms, the threefold cycle
// loss, the paired prior loss and anisotropy weighting. Reductions are means
// over voxels and channels. Diffusion terms only accept tangent-domain
// volumes; anisotropy maps are treated as constants (no gradient).

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "mdwi/volume.hpp"

namespace mdwi {

struct LossWeights {
  double cyc_x = 5.0;
  double cyc_y = 0.25;
  double prior_x = 10.0;
  double prior_y = 0.5;

  void validate() const;
};

/// 1/2 mean((real - 1)^2) + 1/2 mean(fake^2). Optional outputs receive the
/// gradient w.r.t. each score.
double lsgan_d_loss(const Eigen::VectorXd& real, const Eigen::VectorXd& fake, Eigen::VectorXd* d_real = nullptr,
                    Eigen::VectorXd* d_fake = nullptr);

/// 1/2 mean((fake - 1)^2).
double lsgan_g_loss(const Eigen::VectorXd& fake, Eigen::VectorXd* d_fake = nullptr);

/// mean_v,c weight(v) |pred - target|. `weight` is a one-channel map on the
/// same grid, or nullptr for unit weights. `grad` (if given) receives
/// d/d pred.
double l1_loss(const VolumeD& pred, const VolumeD& target, const VolumeD* weight = nullptr, VolumeD* grad = nullptr);

/// Per-voxel FA (tensor_log input, through exp_id) or GFA (odf_log input,
/// through exp_u).
VolumeD anisotropy_weight(const VolumeD& target_log);

struct CycleGradients {
  VolumeD x_rec;
  VolumeD y_rec_hr;
  VolumeD y_rec_lr;
};

/// cyc_x L1(x_rec, x) + cyc_y/2 L1w(y_rec_hr, y_log_up) + cyc_y/2 L1w(y_rec_lr, y_log).
/// `aniso_hr` / `aniso_lr` weight the two diffusion terms.
double cycle_loss(const VolumeD& x, const VolumeD& x_rec, const VolumeD& y_log_up, const VolumeD& y_rec_hr,
                  const VolumeD& y_log, const VolumeD& y_rec_lr, const LossWeights& w, const VolumeD& aniso_hr,
                  const VolumeD& aniso_lr, CycleGradients* grads = nullptr);

struct PriorGradients {
  VolumeD gen_y;
  VolumeD gen_x;
};

/// prior_x L1w(gen_y, y_log_up_paired) + prior_y L1(gen_x, x_paired).
double prior_loss(const VolumeD& gen_y, const VolumeD& y_log_up_paired, const VolumeD& gen_x, const VolumeD& x_paired,
                  const LossWeights& w, const VolumeD& aniso, PriorGradients* grads = nullptr);

/// Loss values of one training step.
struct ObjectiveParts {
  double g_adv_x = 0.0;  ///< lsgan_g on D_X scores of G_X output
  double g_adv_y = 0.0;  ///< lsgan_g on D_Y scores of downsampled G_Y output
  double cycle = 0.0;
  double prior = 0.0;
  double d_x = 0.0;  ///< lsgan_d of D_X
  double d_y = 0.0;  ///< lsgan_d of D_Y
};

struct ObjectiveBreakdown {
  std::vector<std::pair<std::string, double>> terms;  ///< generator terms, in summation order
  double generator = 0.0;                             ///< sum of `terms`
  double discriminator = 0.0;                         ///< d_x + d_y
  /// -d_x - d_y + cycle + prior: the signed minimax composition, logged only.
  double signed_total = 0.0;
};

ObjectiveBreakdown full_objective(const ObjectiveParts& parts);

}  // namespace mdwi
