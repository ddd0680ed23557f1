#pragma once

// Resampling, patching, normalization and manifold-validity auditing of
// volumes. Interpolation and pooling of diffusion data only happen in the
// tangent (log) domain.

#include <array>
#include <cstddef>
#include <functional>
#include <vector>

#include "mdwi/odf.hpp"
#include "mdwi/volume.hpp"

namespace mdwi {

/// Corner-aligned trilinear interpolation to `target` dims, clamp-to-edge.
/// Accepts scalar and tangent-domain volumes; raw SPD/ODF input is rejected.
VolumeD upsample_log_trilinear(const VolumeD& volume, std::array<int, 3> target);
/// Target dims are round(dims * factor); factor must be >= 1.
VolumeD upsample_log_trilinear(const VolumeD& volume, double factor);

/// Block mean per channel; every dim must be divisible by factor.
VolumeD downsample_avg(const VolumeD& volume, int factor);

/// Any fixed or learned resolution-halving map used by the synthesis loop.
using Downsampler = std::function<VolumeD(const VolumeD&)>;

struct Patch {
  std::array<int, 3> origin{};
  VolumeD data;
};

struct PatchSet {
  std::vector<Patch> patches;
  VolumeHeader source;  ///< header of the volume the patches came from
};

/// Patch origins along one axis: 0, stride, ... up to n - size, plus a final
/// patch flush with the end when the stride does not land on it.
std::vector<int> patch_origins(int n, int size, int stride);

PatchSet extract_patches(const VolumeD& volume, int size, int stride);
PatchSet extract_patches(const VolumeD& volume, std::array<int, 3> size, std::array<int, 3> stride);

/// Averages overlapping patches back onto the source grid.
VolumeD reassemble(const PatchSet& set);

/// Affine rescale of a scalar volume to [0, 1].
VolumeD minmax_normalize(const VolumeD& volume);

/// Per-kind failure counts. `invalid` counts voxels off their manifold
/// (non-finite, asymmetric, non-SPD, off the unit sphere or outside the
/// positive orthant). Negative psi on the grid is reported separately and is
/// not part of `invalid`: p = psi^2 is still a density for any unit c.
struct AuditReport {
  std::size_t voxels = 0;
  std::size_t invalid = 0;
  std::size_t non_finite = 0;
  std::size_t asymmetric = 0;
  std::size_t non_spd = 0;
  std::size_t off_sphere = 0;
  std::size_t outside_orthant = 0;
  std::size_t negative_on_grid = 0;
};

/// Audits a tensor (6/9 channels) or ODF (K channels) volume in its manifold
/// domain. Tangent volumes are audited after mapping with exp_id / exp_u.
AuditReport audit_validity(const VolumeD& volume, const ShBasis& basis = default_basis());

/// Tensor volume from its log-domain counterpart and back.
VolumeD exp_tensor_volume(const VolumeD& log_volume);
VolumeD log_tensor_volume(const VolumeD& tensor_volume, SpdPolicy policy = SpdPolicy::strict);
VolumeD exp_odf_volume(const VolumeD& log_volume);
VolumeD log_odf_volume(const VolumeD& odf_volume);

}  // namespace mdwi
