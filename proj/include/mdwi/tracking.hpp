#pragma once

// Deterministic streamline propagation (EuDX style) over tensor or ODF
// fields: jittered seeding, Euler steps, bidirectional half-tracks.

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <vector>

#include "mdwi/io.hpp"
#include "mdwi/metrics.hpp"
#include "mdwi/odf.hpp"
#include "mdwi/volume.hpp"

namespace mdwi {

struct TrackingParams {
  double step = 0.5;        ///< mm
  double max_angle = 60.0;  ///< degrees between consecutive steps
  int seeds_per_voxel = 2;
  double min_length = 10.0;  ///< mm
  double max_length = 300.0;

  void validate() const;
};

/// `seeds_per_voxel` uniform points inside every masked voxel, in world mm.
std::vector<Eigen::Vector3d> seed_mask(const Mask& mask, int seeds_per_voxel, std::uint64_t rng_seed);

/// Interpolated direction field over a tensor (6/9 channels, any tensor
/// domain) or ODF volume.
class DirectionField {
 public:
  DirectionField(const VolumeD& field, const Mask& mask, const ShBasis& basis = default_basis());

  const VolumeHeader& header() const { return header_; }
  bool is_odf() const { return odf_; }

  /// World mm to continuous voxel index and back.
  Eigen::Vector3d to_voxel(const Eigen::Vector3d& world) const;
  Eigen::Vector3d to_world(const Eigen::Vector3d& voxel) const;

  /// True when the nearest voxel of `world` lies in the volume and mask.
  bool inside(const Eigen::Vector3d& world) const;

  /// Unit world-space direction at `world`, sign-aligned to `prev` (zero
  /// `prev` means unconstrained). None outside the mask, where no direction
  /// is defined, or beyond the angle limit.
  std::optional<Eigen::Vector3d> direction_at(const Eigen::Vector3d& world, const Eigen::Vector3d& prev,
                                              const TrackingParams& params) const;

 private:
  std::vector<Eigen::Vector3d> candidates(const Eigen::Vector3d& voxel, std::vector<double>* amplitude) const;

  VolumeHeader header_;
  VolumeD values_;  // tensor_log (6 channels) or unit ODF coefficients
  const Mask* mask_;
  const ShBasis* basis_;
  bool odf_ = false;
  Eigen::Matrix3d linear_;      // voxel -> world linear part
  Eigen::Matrix3d inv_linear_;  // world -> voxel
  Eigen::Vector3d origin_;
};

/// Streamlines from every seed of `mask`, in seed order.
std::vector<Streamline> track(const VolumeD& field, const Mask& mask, const TrackingParams& params,
                              std::uint64_t rng_seed, const ShBasis& basis = default_basis());

}  // namespace mdwi
