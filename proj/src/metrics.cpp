#include "mdwi/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "mdwi/parallel.hpp"
#include "mdwi/spd.hpp"

namespace mdwi {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

bool is_tensor(Domain d) { return d == Domain::tensor || d == Domain::tensor_log; }
bool is_odf(Domain d) { return d == Domain::odf || d == Domain::odf_log; }

void require_diffusion(const VolumeD& v, const char* what) {
  if (!is_tensor(v.domain()) && !is_odf(v.domain()))
    fail(ErrorKind::invalid_argument, std::string(what) + ": expected a tensor or ODF volume");
}

void require_pair(const VolumeD& gen, const VolumeD& ref, const char* what) {
  require_diffusion(gen, what);
  require_diffusion(ref, what);
  if (gen.dims() != ref.dims()) fail(ErrorKind::shape_mismatch, std::string(what) + ": grid mismatch");
  if (is_tensor(gen.domain()) != is_tensor(ref.domain()))
    fail(ErrorKind::shape_mismatch, std::string(what) + ": cannot compare tensors with ODFs");
}

// Spectrum of the SPD tensor at a voxel, or nullopt-like failure flag.
bool tensor_eig(const VolumeD& v, std::size_t voxel, EigenDecomp3<double>& out) {
  const Mat3d m = v.matrix(voxel);
  if (!m.allFinite()) return false;
  out = eig_sym3(m);
  if (v.domain() == Domain::tensor_log) {
    out.values = out.values.array().exp().matrix();
    return std::isfinite(out.values(0)) && out.values(2) > 0.0;
  }
  return out.values(2) > kSpdFloor;
}

bool odf_coeffs(const VolumeD& v, std::size_t voxel, Eigen::VectorXd& c) {
  const Eigen::VectorXd raw = v.vector(voxel);
  if (!raw.allFinite()) return false;
  if (v.domain() == Domain::odf_log) {
    if (std::abs(raw(0)) > kUnitNormTol || raw.norm() >= std::numbers::pi) return false;
    c = exp_u(raw);
    return c(0) > 0.0;
  }
  c = raw;
  return std::abs(c.norm() - 1.0) <= 1e-6 && c(0) > 0.0;
}

bool log_point(const VolumeD& v, std::size_t voxel, Eigen::VectorXd& out) {
  if (is_tensor(v.domain())) {
    if (v.domain() == Domain::tensor_log) {
      const Mat3d s = v.matrix(voxel);
      if (!s.allFinite()) return false;
      out = Eigen::Map<const Eigen::VectorXd>(s.data(), 9);
      return true;
    }
    EigenDecomp3<double> e;
    if (!tensor_eig(v, voxel, e)) return false;
    const Mat3d l = log_id(e);
    out = Eigen::Map<const Eigen::VectorXd>(l.data(), 9);
    return true;
  }
  if (v.domain() == Domain::odf_log) {
    Eigen::VectorXd c;
    if (!odf_coeffs(v, voxel, c)) return false;
    out = v.vector(voxel);
    return true;
  }
  Eigen::VectorXd c;
  if (!odf_coeffs(v, voxel, c)) return false;
  out = log_u(c);
  return true;
}

struct Selection {
  std::vector<std::size_t> voxels;
};

Selection threshold_mask(const VolumeD& ref_aniso, double threshold) {
  Selection s;
  for (std::size_t v = 0; v < ref_aniso.voxels(); ++v) {
    const double a = ref_aniso.at(v, 0);
    if (std::isfinite(a) && a >= threshold) s.voxels.push_back(v);
  }
  if (s.voxels.empty()) fail(ErrorKind::invalid_argument, "empty evaluation mask");
  return s;
}

}  // namespace

double cosine_similarity(const Eigen::Vector3d& a, const Eigen::Vector3d& b) {
  const double na = a.norm(), nb = b.norm();
  if (!(na > 0.0) || !(nb > 0.0)) fail(ErrorKind::invalid_argument, "cosine_similarity: zero vector");
  return std::min(1.0, std::abs(a.dot(b)) / (na * nb));
}

VolumeD anisotropy_map(const VolumeD& diffusion) {
  require_diffusion(diffusion, "anisotropy_map");
  VolumeHeader h = diffusion.header();
  h.channels = 1;
  h.domain = Domain::scalar;
  VolumeD out(h);
  const bool tensor = is_tensor(diffusion.domain());
  parallel_for(out.voxels(), [&](std::size_t v) {
    if (tensor) {
      EigenDecomp3<double> e;
      out.at(v, 0) = tensor_eig(diffusion, v, e) ? fa(e.values) : kNaN;
    } else {
      Eigen::VectorXd c;
      out.at(v, 0) = odf_coeffs(diffusion, v, c) ? gfa(c) : kNaN;
    }
  });
  return out;
}

DirectionMap principal_directions(const VolumeD& diffusion, const ShBasis& basis) {
  require_diffusion(diffusion, "principal_directions");
  DirectionMap m;
  m.directions.assign(diffusion.voxels(), Eigen::Vector3d::Zero());
  m.valid.assign(diffusion.voxels(), 0);
  const bool tensor = is_tensor(diffusion.domain());
  parallel_for(diffusion.voxels(), [&](std::size_t v) {
    if (tensor) {
      EigenDecomp3<double> e;
      if (!tensor_eig(diffusion, v, e)) return;
      if (!(e.values(0) - e.values(1) > kDirectionTie * e.values(0))) return;
      m.directions[v] = e.vectors.col(0);
      m.valid[v] = 1;
    } else {
      Eigen::VectorXd c;
      if (!odf_coeffs(diffusion, v, c)) return;
      const auto peaks = odf_maxima(c, basis);
      if (peaks.empty()) return;
      m.directions[v] = peaks.front();
      m.valid[v] = 1;
    }
  });
  return m;
}

FieldSimilarity field_similarity(const VolumeD& gen, const VolumeD& ref, double fa_threshold, const ShBasis& basis) {
  require_pair(gen, ref, "field_similarity");
  const Selection sel = threshold_mask(anisotropy_map(ref), fa_threshold);
  const DirectionMap dg = principal_directions(gen, basis);
  const DirectionMap dr = principal_directions(ref, basis);
  FieldSimilarity out;
  VolumeHeader h = ref.header();
  h.channels = 1;
  h.domain = Domain::scalar;
  out.map = VolumeD(h);
  double sum = 0.0;
  for (std::size_t v : sel.voxels) {
    if (!dg.valid[v] || !dr.valid[v]) {
      ++out.excluded;
      continue;
    }
    const double c = cosine_similarity(dg.directions[v], dr.directions[v]);
    out.map.at(v, 0) = c;
    sum += c;
    ++out.evaluated;
  }
  if (out.evaluated == 0) fail(ErrorKind::invalid_argument, "empty evaluation mask");
  out.mean = sum / static_cast<double>(out.evaluated);
  return out;
}

double fa_mse(const VolumeD& gen, const VolumeD& ref, double threshold) {
  require_pair(gen, ref, "fa_mse");
  const VolumeD ar = anisotropy_map(ref), ag = anisotropy_map(gen);
  const Selection sel = threshold_mask(ar, threshold);
  double sum = 0.0;
  std::size_t n = 0;
  for (std::size_t v : sel.voxels) {
    const double g = ag.at(v, 0);
    if (!std::isfinite(g)) continue;
    const double d = g - ar.at(v, 0);
    sum += d * d;
    ++n;
  }
  if (n == 0) fail(ErrorKind::invalid_argument, "empty evaluation mask");
  return sum / static_cast<double>(n);
}

double mean_geodesic(const VolumeD& gen, const VolumeD& ref, double threshold) {
  require_pair(gen, ref, "mean_geodesic");
  const Selection sel = threshold_mask(anisotropy_map(ref), threshold);
  std::vector<double> dist(sel.voxels.size(), kNaN);
  parallel_for(sel.voxels.size(), [&](std::size_t i) {
    Eigen::VectorXd a, b;
    if (log_point(gen, sel.voxels[i], a) && log_point(ref, sel.voxels[i], b)) dist[i] = (a - b).norm();
  });
  double sum = 0.0;
  std::size_t n = 0;
  for (double d : dist)
    if (std::isfinite(d)) {
      sum += d;
      ++n;
    }
  if (n == 0) fail(ErrorKind::invalid_argument, "empty evaluation mask");
  return sum / static_cast<double>(n);
}

namespace {

struct Counts {
  std::size_t a = 0, b = 0, both = 0;
};

Counts count(const Mask& a, const Mask& b) {
  if (a.dims() != b.dims()) fail(ErrorKind::shape_mismatch, "mask comparison: grid mismatch");
  Counts c;
  for (std::size_t v = 0; v < a.voxels(); ++v) {
    const bool ia = a.at(v, 0) != 0, ib = b.at(v, 0) != 0;
    c.a += ia;
    c.b += ib;
    c.both += ia && ib;
  }
  return c;
}

}  // namespace

double dice(const Mask& a, const Mask& b) {
  const Counts c = count(a, b);
  if (c.a + c.b == 0) fail(ErrorKind::invalid_argument, "dice: both masks empty");
  return 2.0 * static_cast<double>(c.both) / static_cast<double>(c.a + c.b);
}

double overlap(const Mask& a_ref, const Mask& b) {
  const Counts c = count(a_ref, b);
  if (c.a == 0) fail(ErrorKind::invalid_argument, "overlap: empty reference mask");
  return static_cast<double>(c.both) / static_cast<double>(c.a);
}

double overreach(const Mask& a_ref, const Mask& b, OverreachVariant variant) {
  const Counts c = count(a_ref, b);
  if (c.a == 0) fail(ErrorKind::invalid_argument, "overreach: empty reference mask");
  const std::size_t uni = c.a + c.b - c.both;
  const std::size_t num = variant == OverreachVariant::as_written ? uni - c.both : c.b - c.both;
  return static_cast<double>(num) / static_cast<double>(c.a);
}

namespace {

// Visits every voxel whose box [i-0.5, i+0.5)^3 the segment p -> q crosses.
// Points are in voxel index coordinates.
template <typename Visit>
void traverse(const Eigen::Vector3d& p_in, const Eigen::Vector3d& q_in, const std::array<int, 3>& dims, Visit visit) {
  const Eigen::Vector3d a = p_in.array() + 0.5, b = q_in.array() + 0.5;
  const Eigen::Vector3d d = b - a;
  double t0 = 0.0, t1 = 1.0;
  for (int k = 0; k < 3; ++k) {
    if (d(k) == 0.0) {
      if (a(k) < 0.0 || a(k) >= dims[k]) return;
      continue;
    }
    double ta = (0.0 - a(k)) / d(k), tb = (dims[k] - a(k)) / d(k);
    if (ta > tb) std::swap(ta, tb);
    t0 = std::max(t0, ta);
    t1 = std::min(t1, tb);
  }
  if (t0 > t1) return;
  const Eigen::Vector3d p = a + t0 * d, q = a + t1 * d;
  std::array<int, 3> cell, last, step;
  Eigen::Vector3d t_max, t_delta;
  const Eigen::Vector3d seg = q - p;
  for (int k = 0; k < 3; ++k) {
    cell[k] = std::clamp(static_cast<int>(std::floor(p(k))), 0, dims[k] - 1);
    last[k] = std::clamp(static_cast<int>(std::floor(q(k))), 0, dims[k] - 1);
    if (seg(k) > 0.0) {
      step[k] = 1;
      t_max(k) = (cell[k] + 1 - p(k)) / seg(k);
      t_delta(k) = 1.0 / seg(k);
    } else if (seg(k) < 0.0) {
      step[k] = -1;
      t_max(k) = (cell[k] - p(k)) / seg(k);
      t_delta(k) = -1.0 / seg(k);
    } else {
      step[k] = 0;
      t_max(k) = std::numeric_limits<double>::infinity();
      t_delta(k) = std::numeric_limits<double>::infinity();
    }
  }
  visit(cell);
  while (cell != last) {
    int k = 0;
    if (t_max(1) < t_max(k)) k = 1;
    if (t_max(2) < t_max(k)) k = 2;
    if (t_max(k) > 1.0) break;
    cell[k] += step[k];
    if (cell[k] < 0 || cell[k] >= dims[k]) break;
    t_max(k) += t_delta(k);
    visit(cell);
  }
}

Eigen::Vector3d to_voxel(const Eigen::Matrix4d& inv, const Eigen::Vector3d& world) {
  return (inv * world.homogeneous()).head<3>();
}

}  // namespace

double streamline_length(const Streamline& line) {
  double len = 0.0;
  for (std::size_t i = 1; i < line.size(); ++i) len += (line[i] - line[i - 1]).norm();
  return len;
}

namespace {

// Sorted, unique voxel indices crossed by one streamline.
std::vector<std::size_t> line_voxels(const Streamline& line, const Eigen::Matrix4d& inv, const std::array<int, 3>& dims) {
  std::vector<std::size_t> out;
  auto visit = [&](const std::array<int, 3>& c) {
    out.push_back(static_cast<std::size_t>(c[0]) +
                  static_cast<std::size_t>(dims[0]) * (static_cast<std::size_t>(c[1]) +
                                                       static_cast<std::size_t>(dims[1]) * static_cast<std::size_t>(c[2])));
  };
  for (std::size_t i = 0; i + 1 < line.size(); ++i) traverse(to_voxel(inv, line[i]), to_voxel(inv, line[i + 1]), dims, visit);
  if (line.size() == 1) traverse(to_voxel(inv, line[0]), to_voxel(inv, line[0]), dims, visit);
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

}  // namespace

Mask rasterize(const std::vector<Streamline>& lines, const VolumeHeader& grid) {
  VolumeHeader h = grid;
  h.channels = 1;
  h.domain = Domain::scalar;
  Mask m(h);
  const Eigen::Matrix4d inv = grid.affine.inverse();
  for (const auto& line : lines)
    for (std::size_t v : line_voxels(line, inv, h.dims)) m.at(v, 0) = 1;
  return m;
}

TractogramStats tractogram_stats(const std::vector<Streamline>& lines, const VolumeHeader& grid) {
  if (lines.empty()) fail(ErrorKind::invalid_argument, "empty tractogram");
  TractogramStats s;
  s.count = lines.size();
  std::vector<double> len(lines.size());
  for (std::size_t i = 0; i < lines.size(); ++i) len[i] = streamline_length(lines[i]);
  for (double l : len) s.mean_length += l;
  s.mean_length /= static_cast<double>(len.size());
  for (double l : len) s.std_length += (l - s.mean_length) * (l - s.mean_length);
  s.std_length = len.size() > 1 ? std::sqrt(s.std_length / static_cast<double>(len.size() - 1)) : 0.0;

  VolumeHeader h = grid;
  h.channels = 1;
  h.domain = Domain::scalar;
  s.density = VolumeD(h);
  const Eigen::Matrix4d inv = grid.affine.inverse();
  for (const auto& line : lines)
    for (std::size_t v : line_voxels(line, inv, h.dims)) s.density.at(v, 0) += 1.0;
  for (std::size_t v = 0; v < s.density.voxels(); ++v) s.volume += s.density.at(v, 0) > 0.0;
  return s;
}

Mask mask_from(const VolumeD& v) {
  if (v.channels() != 1) fail(ErrorKind::invalid_argument, "mask_from: scalar volume required");
  Mask m(v.header());
  for (std::size_t i = 0; i < v.voxels(); ++i) m.at(i, 0) = v.at(i, 0) > 0.5 ? 1 : 0;
  return m;
}

VolumeD mask_volume(const Mask& m) { return m.cast<double>(); }

}  // namespace mdwi
