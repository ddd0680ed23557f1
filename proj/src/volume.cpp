#include "mdwi/volume.hpp"

#include <cmath>

namespace mdwi {

const char* to_string(Domain d) {
  switch (d) {
    case Domain::scalar: return "scalar";
    case Domain::tensor: return "tensor";
    case Domain::tensor_log: return "tensor-log";
    case Domain::odf: return "odf";
    case Domain::odf_log: return "odf-log";
  }
  return "scalar";
}

Domain domain_from_string(const std::string& s) {
  if (s == "scalar") return Domain::scalar;
  if (s == "tensor") return Domain::tensor;
  if (s == "tensor-log") return Domain::tensor_log;
  if (s == "odf") return Domain::odf;
  if (s == "odf-log") return Domain::odf_log;
  fail(ErrorKind::invalid_argument, "unknown domain '" + s + "'");
}

bool is_tangent(Domain d) { return d == Domain::tensor_log || d == Domain::odf_log; }

bool VolumeHeader::same_grid(const VolumeHeader& other) const {
  return dims == other.dims && spacing.isApprox(other.spacing, 1e-6) &&
         (affine - other.affine).cwiseAbs().maxCoeff() <= 1e-6 * (1.0 + affine.cwiseAbs().maxCoeff());
}

void VolumeHeader::validate() const {
  for (int d : dims)
    if (d < 1) fail(ErrorKind::invalid_argument, "volume header: dims must be >= 1");
  if (channels < 1) fail(ErrorKind::invalid_argument, "volume header: channels must be >= 1");
  for (int i = 0; i < 3; ++i)
    if (!(spacing(i) > 0.0) || !std::isfinite(spacing(i)))
      fail(ErrorKind::invalid_argument, "volume header: spacing must be positive");
  if (!affine.allFinite() || std::abs(affine.topLeftCorner<3, 3>().determinant()) < 1e-12)
    fail(ErrorKind::invalid_argument, "volume header: affine is not invertible");
}

VolumeHeader VolumeHeader::make(std::array<int, 3> dims, int channels, Domain domain, Eigen::Vector3d spacing) {
  VolumeHeader h;
  h.dims = dims;
  h.channels = channels;
  h.domain = domain;
  h.spacing = spacing;
  h.affine = Eigen::Matrix4d::Identity();
  for (int i = 0; i < 3; ++i) h.affine(i, i) = spacing(i);
  h.validate();
  return h;
}

}  // namespace mdwi
