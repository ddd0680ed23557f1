#include "mdwi/tracking.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "mdwi/parallel.hpp"
#include "mdwi/volume_ops.hpp"

namespace mdwi {

void TrackingParams::validate() const {
  if (!(step > 0.0)) fail(ErrorKind::invalid_argument, "tracking: step must be positive");
  if (!(max_angle > 0.0 && max_angle < 90.0)) fail(ErrorKind::invalid_argument, "tracking: angle must be in (0, 90)");
  if (seeds_per_voxel < 1) fail(ErrorKind::invalid_argument, "tracking: seeds per voxel must be >= 1");
  if (!(min_length >= 0.0 && min_length < max_length))
    fail(ErrorKind::invalid_argument, "tracking: need 0 <= min length < max length");
}

std::vector<Eigen::Vector3d> seed_mask(const Mask& mask, int seeds_per_voxel, std::uint64_t rng_seed) {
  if (seeds_per_voxel < 1) fail(ErrorKind::invalid_argument, "seed_mask: seeds per voxel must be >= 1");
  std::mt19937_64 rng(rng_seed);
  std::uniform_real_distribution<double> jitter(-0.5, 0.5);
  const Eigen::Matrix4d& a = mask.header().affine;
  std::vector<Eigen::Vector3d> seeds;
  const auto& d = mask.dims();
  for (int z = 0; z < d[2]; ++z)
    for (int y = 0; y < d[1]; ++y)
      for (int x = 0; x < d[0]; ++x) {
        if (!mask.at(x, y, z)) continue;
        for (int s = 0; s < seeds_per_voxel; ++s) {
          const Eigen::Vector4d v(x + jitter(rng), y + jitter(rng), z + jitter(rng), 1.0);
          seeds.push_back((a * v).head<3>());
        }
      }
  return seeds;
}

DirectionField::DirectionField(const VolumeD& field, const Mask& mask, const ShBasis& basis)
    : header_(field.header()), mask_(&mask), basis_(&basis) {
  if (field.dims() != mask.dims() || !field.header().same_grid(mask.header()))
    fail(ErrorKind::shape_mismatch, "track: field and mask grids differ");
  switch (field.domain()) {
    case Domain::tensor:
      values_ = log_tensor_volume(field.channels() == 6 ? field : [&] {
        VolumeD packed(VolumeHeader::make(field.dims(), 6, Domain::tensor));
        packed.header().affine = field.header().affine;
        packed.header().spacing = field.header().spacing;
        for (std::size_t v = 0; v < field.voxels(); ++v) packed.set_matrix(v, field.matrix(v));
        return packed;
      }());
      break;
    case Domain::tensor_log: values_ = field; break;
    case Domain::odf: values_ = field; odf_ = true; break;
    case Domain::odf_log: values_ = exp_odf_volume(field); odf_ = true; break;
    default: fail(ErrorKind::invalid_argument, "track: expected a tensor or ODF field");
  }
  if (odf_ && values_.channels() != basis.size()) fail(ErrorKind::shape_mismatch, "track: ODF order mismatch");
  linear_ = header_.affine.topLeftCorner<3, 3>();
  inv_linear_ = linear_.inverse();
  origin_ = header_.affine.topRightCorner<3, 1>();
}

Eigen::Vector3d DirectionField::to_voxel(const Eigen::Vector3d& world) const { return inv_linear_ * (world - origin_); }
Eigen::Vector3d DirectionField::to_world(const Eigen::Vector3d& voxel) const { return linear_ * voxel + origin_; }

bool DirectionField::inside(const Eigen::Vector3d& world) const {
  const Eigen::Vector3d v = to_voxel(world);
  const int x = static_cast<int>(std::lround(v.x()));
  const int y = static_cast<int>(std::lround(v.y()));
  const int z = static_cast<int>(std::lround(v.z()));
  return mask_->contains(x, y, z) && mask_->at(x, y, z) != 0;
}

std::vector<Eigen::Vector3d> DirectionField::candidates(const Eigen::Vector3d& voxel,
                                                        std::vector<double>* amplitude) const {
  // Trilinear weights, clamped to the grid.
  const auto& d = header_.dims;
  std::array<int, 3> lo{};
  std::array<double, 3> t{};
  for (int a = 0; a < 3; ++a) {
    const double c = std::clamp(voxel(a), 0.0, static_cast<double>(d[a] - 1));
    lo[a] = std::min(static_cast<int>(std::floor(c)), std::max(d[a] - 2, 0));
    t[a] = c - lo[a];
  }
  Eigen::VectorXd mixed = Eigen::VectorXd::Zero(values_.channels());
  for (int corner = 0; corner < 8; ++corner) {
    double w = 1.0;
    std::array<int, 3> idx{};
    for (int a = 0; a < 3; ++a) {
      const int bit = (corner >> a) & 1;
      w *= bit ? t[a] : 1.0 - t[a];
      idx[a] = std::min(lo[a] + bit, d[a] - 1);
    }
    if (w == 0.0) continue;
    mixed += w * values_.vector(values_.index(idx[0], idx[1], idx[2]));
  }

  std::vector<Eigen::Vector3d> out;
  if (!odf_) {
    const auto e = eig_sym3(exp_id(unpack_sym(Sym6d(mixed))));
    try {
      out.push_back(linear_ * principal_direction(e));
    } catch (const Error&) {
      return {};
    }
    if (amplitude) amplitude->assign(1, e.values(0));
  } else {
    const double n = mixed.norm();
    if (!(n > 0.0)) return {};
    mixed /= n;
    for (const auto& p : odf_maxima(mixed, *basis_)) {
      out.push_back(linear_ * p);
      if (amplitude) {
        const double psi = basis_->evaluate(p).dot(mixed);
        amplitude->push_back(psi * psi);
      }
    }
  }
  for (auto& v : out) v.normalize();
  return out;
}

std::optional<Eigen::Vector3d> DirectionField::direction_at(const Eigen::Vector3d& world, const Eigen::Vector3d& prev,
                                                            const TrackingParams& params) const {
  if (!inside(world)) return std::nullopt;
  std::vector<double> amp;
  const auto cands = candidates(to_voxel(world), &amp);
  if (cands.empty()) return std::nullopt;
  const double pn = prev.norm();
  if (!(pn > 0.0)) return cands.front();

  const Eigen::Vector3d u = prev / pn;
  std::size_t best = 0;
  double best_cos = -1.0;
  for (std::size_t i = 0; i < cands.size(); ++i) {
    const double c = std::abs(cands[i].dot(u));
    // Equal angles go to the stronger peak; candidates arrive strongest first.
    if (c > best_cos + 1e-12 || (std::abs(c - best_cos) <= 1e-12 && amp[i] > amp[best])) {
      best = i;
      best_cos = c;
    }
  }
  const double limit = std::cos(params.max_angle * std::numbers::pi / 180.0);
  if (best_cos < limit) return std::nullopt;
  const Eigen::Vector3d& d = cands[best];
  return d.dot(u) < 0.0 ? Eigen::Vector3d(-d) : d;
}

namespace {

std::vector<Eigen::Vector3d> half_track(const DirectionField& f, const Eigen::Vector3d& seed, Eigen::Vector3d dir,
                                        const TrackingParams& p) {
  std::vector<Eigen::Vector3d> pts;
  Eigen::Vector3d pos = seed;
  const auto max_steps = static_cast<long>(std::ceil(p.max_length / p.step)) + 1;
  for (long i = 0; i < max_steps; ++i) {
    const Eigen::Vector3d next = pos + p.step * dir;
    if (!f.inside(next)) break;
    pts.push_back(next);
    const auto d = f.direction_at(next, dir, p);
    if (!d) break;
    pos = next;
    dir = *d;
  }
  return pts;
}

}  // namespace

std::vector<Streamline> track(const VolumeD& field, const Mask& mask, const TrackingParams& params,
                              std::uint64_t rng_seed, const ShBasis& basis) {
  params.validate();
  const DirectionField f(field, mask, basis);
  const auto seeds = seed_mask(mask, params.seeds_per_voxel, rng_seed);
  std::vector<Streamline> per_seed(seeds.size());
  parallel_for(seeds.size(), [&](std::size_t i) {
    const Eigen::Vector3d& s = seeds[i];
    const auto d0 = f.direction_at(s, Eigen::Vector3d::Zero(), params);
    if (!d0) return;
    auto fwd = half_track(f, s, *d0, params);
    auto bwd = half_track(f, s, -*d0, params);
    Streamline line;
    line.reserve(fwd.size() + bwd.size() + 1);
    line.insert(line.end(), bwd.rbegin(), bwd.rend());
    line.push_back(s);
    line.insert(line.end(), fwd.begin(), fwd.end());
    if (line.size() < 2) return;
    const double len = streamline_length(line);
    if (len < params.min_length || len > params.max_length) return;
    per_seed[i] = std::move(line);
  });
  std::vector<Streamline> out;
  for (auto& l : per_seed)
    if (!l.empty()) out.push_back(std::move(l));
  return out;
}

}  // namespace mdwi
