#pragma once

// Field and tractogram comparison metrics. Diffusion arguments may be given
// on the manifold (tensor, odf) or in the tangent plane (tensor-log,
// odf-log); generated voxels that are off the manifold are skipped.

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "mdwi/io.hpp"
#include "mdwi/odf.hpp"
#include "mdwi/volume.hpp"

namespace mdwi {

using Mask = Volume<std::uint8_t>;

/// |a.b| / (|a| |b|).
double cosine_similarity(const Eigen::Vector3d& a, const Eigen::Vector3d& b);

/// FA (tensor domains) or GFA (ODF domains) per voxel; NaN where the voxel
/// is off the manifold.
VolumeD anisotropy_map(const VolumeD& diffusion);

/// Principal orientation per voxel: leading eigenvector or strongest ODF
/// peak. `valid[v]` is 0 where it is ill-defined or the voxel is invalid.
struct DirectionMap {
  std::vector<Eigen::Vector3d> directions;
  std::vector<std::uint8_t> valid;
};
DirectionMap principal_directions(const VolumeD& diffusion, const ShBasis& basis = default_basis());

struct FieldSimilarity {
  double mean = 0.0;
  VolumeD map;                ///< per-voxel cosine, 0 outside the evaluated set
  std::size_t evaluated = 0;  ///< voxels in the mean
  std::size_t excluded = 0;   ///< masked voxels with an ill-defined direction
};

/// Mean cosine over voxels whose reference FA/GFA is >= fa_threshold.
FieldSimilarity field_similarity(const VolumeD& gen, const VolumeD& ref, double fa_threshold,
                                 const ShBasis& basis = default_basis());

/// Mean squared FA/GFA difference over reference FA/GFA >= threshold.
double fa_mse(const VolumeD& gen, const VolumeD& ref, double threshold = 0.0);

/// Mean Log-Euclidean distance over reference FA/GFA >= threshold.
double mean_geodesic(const VolumeD& gen, const VolumeD& ref, double threshold = 0.0);

double dice(const Mask& a, const Mask& b);
/// |B n A| / |A|.
double overlap(const Mask& a_ref, const Mask& b);

enum class OverreachVariant {
  as_written,  ///< (|B u A| - |B n A|) / |A|
  common,      ///< (|B| - |B n A|) / |A|
};
double overreach(const Mask& a_ref, const Mask& b, OverreachVariant variant = OverreachVariant::as_written);

/// Voxels (on `grid`) crossed by any segment of any streamline.
Mask rasterize(const std::vector<Streamline>& lines, const VolumeHeader& grid);

struct TractogramStats {
  std::size_t count = 0;
  double mean_length = 0.0;  ///< mm
  double std_length = 0.0;
  std::size_t volume = 0;  ///< occupied voxels
  VolumeD density;         ///< streamlines per voxel
};

double streamline_length(const Streamline& line);
TractogramStats tractogram_stats(const std::vector<Streamline>& lines, const VolumeHeader& grid);

/// Mask from a scalar volume: value > 0.5.
Mask mask_from(const VolumeD& v);
VolumeD mask_volume(const Mask& m);

}  // namespace mdwi
