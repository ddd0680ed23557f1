#pragma once

#include <Eigen/Dense>

#include <array>
#include <cstddef>
#include <string>
#include <vector>

#include "mdwi/common.hpp"
#include "mdwi/spd.hpp"

namespace mdwi {

/// What the channels of a volume hold. Diffusion data is either on its
/// manifold (SPD tensors, unit SH coefficients) or in the tangent plane.
enum class Domain {
  scalar,
  tensor,      ///< 6 packed (or 9 full) SPD tensor components
  tensor_log,  ///< 6 packed components of log_id(tensor)
  odf,         ///< K unit-norm square-root ODF SH coefficients
  odf_log,     ///< K components of log_u(coefficients)
};

const char* to_string(Domain d);
Domain domain_from_string(const std::string& s);
bool is_tangent(Domain d);

struct VolumeHeader {
  std::array<int, 3> dims = {1, 1, 1};
  int channels = 1;
  Eigen::Vector3d spacing = Eigen::Vector3d::Ones();
  /// Voxel index (x, y, z, 1) to world millimetres.
  Eigen::Matrix4d affine = Eigen::Matrix4d::Identity();
  Domain domain = Domain::scalar;

  std::size_t voxel_count() const {
    return static_cast<std::size_t>(dims[0]) * static_cast<std::size_t>(dims[1]) * static_cast<std::size_t>(dims[2]);
  }

  /// Grid geometry equality (dims, spacing, affine), ignoring channels.
  bool same_grid(const VolumeHeader& other) const;

  /// Throws on non-positive dims/spacing or a singular affine.
  void validate() const;

  /// Header with an axis-aligned affine built from spacing.
  static VolumeHeader make(std::array<int, 3> dims, int channels, Domain domain,
                           Eigen::Vector3d spacing = Eigen::Vector3d::Ones());
};

/// Dense 3D grid of `channels` values per voxel. Storage is channel-planar
/// with x fastest, the NIfTI on-disk order: data[c * voxels + x + nx*(y + ny*z)].
template <typename Scalar>
class Volume {
 public:
  Volume() = default;
  explicit Volume(const VolumeHeader& header)
      : header_(header), data_(header.voxel_count() * static_cast<std::size_t>(header.channels), Scalar(0)) {}
  Volume(const VolumeHeader& header, std::vector<Scalar> data) : header_(header), data_(std::move(data)) {
    if (data_.size() != header_.voxel_count() * static_cast<std::size_t>(header_.channels))
      fail(ErrorKind::shape_mismatch, "Volume: payload length does not match header");
  }

  const VolumeHeader& header() const { return header_; }
  VolumeHeader& header() { return header_; }
  const std::array<int, 3>& dims() const { return header_.dims; }
  int channels() const { return header_.channels; }
  Domain domain() const { return header_.domain; }
  std::size_t voxels() const { return header_.voxel_count(); }

  std::vector<Scalar>& data() { return data_; }
  const std::vector<Scalar>& data() const { return data_; }

  std::size_t index(int x, int y, int z) const {
    return static_cast<std::size_t>(x) +
           static_cast<std::size_t>(header_.dims[0]) *
               (static_cast<std::size_t>(y) + static_cast<std::size_t>(header_.dims[1]) * static_cast<std::size_t>(z));
  }
  bool contains(int x, int y, int z) const {
    return x >= 0 && y >= 0 && z >= 0 && x < header_.dims[0] && y < header_.dims[1] && z < header_.dims[2];
  }

  Scalar& at(std::size_t voxel, int c) { return data_[static_cast<std::size_t>(c) * voxels() + voxel]; }
  Scalar at(std::size_t voxel, int c) const { return data_[static_cast<std::size_t>(c) * voxels() + voxel]; }
  Scalar& at(int x, int y, int z, int c = 0) { return at(index(x, y, z), c); }
  Scalar at(int x, int y, int z, int c = 0) const { return at(index(x, y, z), c); }

  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> vector(std::size_t voxel) const {
    Eigen::Matrix<Scalar, Eigen::Dynamic, 1> v(channels());
    for (int c = 0; c < channels(); ++c) v(c) = at(voxel, c);
    return v;
  }
  template <typename Derived>
  void set_vector(std::size_t voxel, const Eigen::MatrixBase<Derived>& v) {
    for (int c = 0; c < channels(); ++c) at(voxel, c) = static_cast<Scalar>(v(c));
  }

  /// Symmetric matrix at a voxel from 6 packed or 9 full channels; the full
  /// layout is symmetrized as (A + A^T) / 2.
  Mat3<Scalar> matrix(std::size_t voxel) const {
    if (channels() == 6) {
      Sym6<Scalar> v;
      for (int c = 0; c < 6; ++c) v(c) = at(voxel, c);
      return unpack_sym(v);
    }
    if (channels() == 9) {
      Mat3<Scalar> m;
      for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c) m(r, c) = at(voxel, 3 * r + c);
      return sym(m);
    }
    fail(ErrorKind::shape_mismatch, "Volume::matrix: expected 6 or 9 channels");
  }
  template <typename Derived>
  void set_matrix(std::size_t voxel, const Eigen::MatrixBase<Derived>& m) {
    if (channels() != 6) fail(ErrorKind::shape_mismatch, "Volume::set_matrix: expected 6 channels");
    const auto v = pack_sym(m);
    for (int c = 0; c < 6; ++c) at(voxel, c) = static_cast<Scalar>(v(c));
  }

  template <typename To>
  Volume<To> cast() const {
    std::vector<To> out(data_.size());
    for (std::size_t i = 0; i < data_.size(); ++i) out[i] = static_cast<To>(data_[i]);
    return Volume<To>(header_, std::move(out));
  }

 private:
  VolumeHeader header_;
  std::vector<Scalar> data_;
};

using VolumeD = Volume<double>;
using VolumeF = Volume<float>;

}  // namespace mdwi
