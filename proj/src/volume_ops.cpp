#include "mdwi/volume_ops.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>

#include "mdwi/parallel.hpp"
#include "mdwi/spd.hpp"

namespace mdwi {

namespace {

void require_interpolable(const VolumeD& v, const char* op) {
  if (v.domain() == Domain::tensor || v.domain() == Domain::odf)
    fail(ErrorKind::invalid_argument,
         std::string(op) + ": input must be in the log domain (raw " + to_string(v.domain()) + " rejected)");
}

double axis_ratio(int n_in, int n_out) {
  if (n_out <= 1 || n_in <= 1) return static_cast<double>(n_in) / n_out;
  return static_cast<double>(n_in - 1) / (n_out - 1);
}

}  // namespace

VolumeD upsample_log_trilinear(const VolumeD& volume, std::array<int, 3> target) {
  require_interpolable(volume, "upsample_log_trilinear");
  const auto& in = volume.dims();
  for (int a = 0; a < 3; ++a)
    if (target[a] < in[a]) fail(ErrorKind::invalid_argument, "upsample_log_trilinear: factor < 1");

  VolumeHeader h = volume.header();
  h.dims = target;
  Eigen::Vector3d ratio;
  for (int a = 0; a < 3; ++a) ratio(a) = axis_ratio(in[a], target[a]);
  for (int a = 0; a < 3; ++a) {
    h.spacing(a) *= ratio(a);
    h.affine.col(a) *= ratio(a);
  }
  VolumeD out(h);

  // Per-axis source index pairs and weights.
  std::array<std::vector<int>, 3> lo, hi;
  std::array<std::vector<double>, 3> w;
  for (int a = 0; a < 3; ++a) {
    lo[a].resize(target[a]);
    hi[a].resize(target[a]);
    w[a].resize(target[a]);
    for (int o = 0; o < target[a]; ++o) {
      const double pos = in[a] == 1 ? 0.0 : o * axis_ratio(in[a], target[a]);
      const int i0 = std::clamp(static_cast<int>(std::floor(pos)), 0, in[a] - 1);
      const int i1 = std::min(i0 + 1, in[a] - 1);
      lo[a][o] = i0;
      hi[a][o] = i1;
      w[a][o] = std::clamp(pos - i0, 0.0, 1.0);
    }
  }
  const int channels = volume.channels();
  parallel_for(static_cast<std::size_t>(target[2]), [&](std::size_t zi) {
    const int z = static_cast<int>(zi);
    for (int y = 0; y < target[1]; ++y) {
      for (int x = 0; x < target[0]; ++x) {
        const double wx = w[0][x], wy = w[1][y], wz = w[2][z];
        for (int c = 0; c < channels; ++c) {
          auto s = [&](int ix, int iy, int iz) { return volume.at(ix, iy, iz, c); };
          const double c00 = s(lo[0][x], lo[1][y], lo[2][z]) * (1 - wx) + s(hi[0][x], lo[1][y], lo[2][z]) * wx;
          const double c10 = s(lo[0][x], hi[1][y], lo[2][z]) * (1 - wx) + s(hi[0][x], hi[1][y], lo[2][z]) * wx;
          const double c01 = s(lo[0][x], lo[1][y], hi[2][z]) * (1 - wx) + s(hi[0][x], lo[1][y], hi[2][z]) * wx;
          const double c11 = s(lo[0][x], hi[1][y], hi[2][z]) * (1 - wx) + s(hi[0][x], hi[1][y], hi[2][z]) * wx;
          const double c0 = c00 * (1 - wy) + c10 * wy;
          const double c1 = c01 * (1 - wy) + c11 * wy;
          out.at(x, y, z, c) = c0 * (1 - wz) + c1 * wz;
        }
      }
    }
  });
  return out;
}

VolumeD upsample_log_trilinear(const VolumeD& volume, double factor) {
  if (!(factor >= 1.0)) fail(ErrorKind::invalid_argument, "upsample_log_trilinear: factor < 1");
  std::array<int, 3> target{};
  for (int a = 0; a < 3; ++a) target[a] = static_cast<int>(std::lround(volume.dims()[a] * factor));
  return upsample_log_trilinear(volume, target);
}

VolumeD downsample_avg(const VolumeD& volume, int factor) {
  require_interpolable(volume, "downsample_avg");
  if (factor < 1) fail(ErrorKind::invalid_argument, "downsample_avg: factor must be >= 1");
  const auto& in = volume.dims();
  for (int a = 0; a < 3; ++a)
    if (in[a] % factor != 0) fail(ErrorKind::invalid_argument, "downsample_avg: dims not divisible by factor");

  VolumeHeader h = volume.header();
  for (int a = 0; a < 3; ++a) h.dims[a] = in[a] / factor;
  const Eigen::Vector4d center(0.5 * (factor - 1), 0.5 * (factor - 1), 0.5 * (factor - 1), 1.0);
  const Eigen::Vector4d origin = volume.header().affine * center;
  h.affine.topLeftCorner<3, 3>() *= factor;
  h.affine.col(3) = origin;
  h.spacing *= factor;
  VolumeD out(h);
  const double inv = 1.0 / (static_cast<double>(factor) * factor * factor);
  for (int c = 0; c < volume.channels(); ++c) {
    for (int z = 0; z < h.dims[2]; ++z)
      for (int y = 0; y < h.dims[1]; ++y)
        for (int x = 0; x < h.dims[0]; ++x) {
          double sum = 0.0;
          for (int dz = 0; dz < factor; ++dz)
            for (int dy = 0; dy < factor; ++dy)
              for (int dx = 0; dx < factor; ++dx)
                sum += volume.at(x * factor + dx, y * factor + dy, z * factor + dz, c);
          out.at(x, y, z, c) = sum * inv;
        }
  }
  return out;
}

std::vector<int> patch_origins(int n, int size, int stride) {
  if (size > n) fail(ErrorKind::invalid_argument, "extract_patches: patch size exceeds volume dims");
  if (size < 1 || stride < 1) fail(ErrorKind::invalid_argument, "extract_patches: size and stride must be >= 1");
  std::vector<int> origins;
  for (int o = 0; o + size <= n; o += stride) origins.push_back(o);
  if (origins.back() + size < n) origins.push_back(n - size);
  return origins;
}

PatchSet extract_patches(const VolumeD& volume, int size, int stride) {
  return extract_patches(volume, {size, size, size}, {stride, stride, stride});
}

PatchSet extract_patches(const VolumeD& volume, std::array<int, 3> size, std::array<int, 3> stride) {
  std::array<std::vector<int>, 3> origins;
  for (int a = 0; a < 3; ++a) origins[a] = patch_origins(volume.dims()[a], size[a], stride[a]);
  PatchSet set;
  set.source = volume.header();
  for (int oz : origins[2])
    for (int oy : origins[1])
      for (int ox : origins[0]) {
        VolumeHeader h = volume.header();
        h.dims = size;
        h.affine.col(3) = volume.header().affine * Eigen::Vector4d(ox, oy, oz, 1.0);
        Patch p{{ox, oy, oz}, VolumeD(h)};
        for (int c = 0; c < volume.channels(); ++c)
          for (int z = 0; z < size[2]; ++z)
            for (int y = 0; y < size[1]; ++y)
              for (int x = 0; x < size[0]; ++x) p.data.at(x, y, z, c) = volume.at(ox + x, oy + y, oz + z, c);
        set.patches.push_back(std::move(p));
      }
  return set;
}

VolumeD reassemble(const PatchSet& set) {
  VolumeD out(set.source);
  std::vector<std::uint32_t> hits(out.voxels(), 0);
  for (const auto& p : set.patches) {
    const auto& d = p.data.dims();
    if (p.data.channels() != out.channels()) fail(ErrorKind::shape_mismatch, "reassemble: channel mismatch");
    for (int z = 0; z < d[2]; ++z)
      for (int y = 0; y < d[1]; ++y)
        for (int x = 0; x < d[0]; ++x) {
          const std::size_t v = out.index(p.origin[0] + x, p.origin[1] + y, p.origin[2] + z);
          ++hits[v];
          for (int c = 0; c < out.channels(); ++c) out.at(v, c) += p.data.at(x, y, z, c);
        }
  }
  for (std::size_t v = 0; v < out.voxels(); ++v) {
    if (hits[v] == 0) fail(ErrorKind::invalid_argument, "reassemble: patches do not cover the volume");
    for (int c = 0; c < out.channels(); ++c) out.at(v, c) /= hits[v];
  }
  return out;
}

VolumeD minmax_normalize(const VolumeD& volume) {
  if (volume.channels() != 1) fail(ErrorKind::invalid_argument, "minmax_normalize: scalar volume required");
  const auto& d = volume.data();
  for (double v : d)
    if (!std::isfinite(v)) fail(ErrorKind::invalid_argument, "minmax_normalize: non-finite value");
  const auto [lo, hi] = std::minmax_element(d.begin(), d.end());
  const double range = *hi - *lo;
  if (!(range > 0.0)) fail(ErrorKind::degenerate, "minmax_normalize: degenerate range (constant volume)");
  VolumeD out(volume.header());
  const double low = *lo;
  for (std::size_t i = 0; i < d.size(); ++i) out.data()[i] = (d[i] - low) / range;
  return out;
}

namespace {

enum Flag : std::uint8_t {
  kNonFinite = 1,
  kAsymmetric = 2,
  kNonSpd = 4,
  kOffSphere = 8,
  kOutsideOrthant = 16,
  kNegative = 32,
};

std::uint8_t audit_tensor_voxel(const VolumeD& v, std::size_t voxel) {
  std::uint8_t flags = 0;
  for (int c = 0; c < v.channels(); ++c)
    if (!std::isfinite(v.at(voxel, c))) return kNonFinite;
  if (v.channels() == 9) {
    Mat3d full;
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < 3; ++c) full(r, c) = v.at(voxel, 3 * r + c);
    if ((full - full.transpose()).cwiseAbs().maxCoeff() > 1e-6) flags |= kAsymmetric;
  }
  const Mat3d m = v.matrix(voxel);
  if (!(eig_sym3(m).values(2) > kSpdFloor)) flags |= kNonSpd;
  return flags;
}

std::uint8_t audit_odf_voxel(const Eigen::VectorXd& c, const ShBasis& basis) {
  if (!c.allFinite()) return kNonFinite;
  std::uint8_t flags = 0;
  if (std::abs(c.norm() - 1.0) > 1e-6) flags |= kOffSphere;
  if (!(c(0) > 0.0)) flags |= kOutsideOrthant;
  if (min_on_grid(c, basis) < -1e-6) flags |= kNegative;
  return flags;
}

}  // namespace

AuditReport audit_validity(const VolumeD& volume, const ShBasis& basis) {
  if (volume.domain() == Domain::tensor_log) return audit_validity(exp_tensor_volume(volume), basis);
  if (volume.domain() == Domain::odf_log) return audit_validity(exp_odf_volume(volume), basis);

  const int ch = volume.channels();
  const bool tensor = volume.domain() == Domain::tensor || ((ch == 6 || ch == 9) && volume.domain() != Domain::odf);
  if (tensor && ch != 6 && ch != 9) fail(ErrorKind::invalid_argument, "audit_validity: tensor volume needs 6 or 9 channels");
  if (!tensor && ch != basis.size())
    fail(ErrorKind::invalid_argument, "audit_validity: unrecognized channel count " + std::to_string(ch));

  std::vector<std::uint8_t> flags(volume.voxels(), 0);
  parallel_for(volume.voxels(), [&](std::size_t v) {
    flags[v] = tensor ? audit_tensor_voxel(volume, v) : audit_odf_voxel(volume.vector(v), basis);
  });

  AuditReport r;
  r.voxels = volume.voxels();
  for (std::uint8_t f : flags) {
    if (f & kNonFinite) ++r.non_finite;
    if (f & kAsymmetric) ++r.asymmetric;
    if (f & kNonSpd) ++r.non_spd;
    if (f & kOffSphere) ++r.off_sphere;
    if (f & kOutsideOrthant) ++r.outside_orthant;
    if (f & kNegative) ++r.negative_on_grid;
    if (f & ~kNegative) ++r.invalid;
  }
  return r;
}

VolumeD exp_tensor_volume(const VolumeD& log_volume) {
  if (log_volume.channels() != 6) fail(ErrorKind::shape_mismatch, "exp_tensor_volume: expected 6 channels");
  VolumeHeader h = log_volume.header();
  h.domain = Domain::tensor;
  VolumeD out(h);
  parallel_for(out.voxels(), [&](std::size_t v) { out.set_matrix(v, exp_id(log_volume.matrix(v))); });
  return out;
}

VolumeD log_tensor_volume(const VolumeD& tensor_volume, SpdPolicy policy) {
  VolumeHeader h = tensor_volume.header();
  h.domain = Domain::tensor_log;
  h.channels = 6;
  VolumeD out(h);
  parallel_for(out.voxels(), [&](std::size_t v) { out.set_matrix(v, log_id(tensor_volume.matrix(v), policy)); });
  return out;
}

VolumeD exp_odf_volume(const VolumeD& log_volume) {
  VolumeHeader h = log_volume.header();
  h.domain = Domain::odf;
  VolumeD out(h);
  parallel_for(out.voxels(), [&](std::size_t v) { out.set_vector(v, exp_u(log_volume.vector(v))); });
  return out;
}

VolumeD log_odf_volume(const VolumeD& odf_volume) {
  VolumeHeader h = odf_volume.header();
  h.domain = Domain::odf_log;
  VolumeD out(h);
  parallel_for(out.voxels(), [&](std::size_t v) { out.set_vector(v, log_u(odf_volume.vector(v))); });
  return out;
}

}  // namespace mdwi
