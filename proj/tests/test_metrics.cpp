#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "mdwi/metrics.hpp"
#include "test_support.hpp"

using namespace mdwi;
using mdwi::testing::random_rotation;

namespace {

VolumeD tensor_field(std::array<int, 3> dims, const Mat3d& t) {
  VolumeD v(VolumeHeader::make(dims, 6, Domain::tensor));
  for (std::size_t i = 0; i < v.voxels(); ++i) v.set_matrix(i, t);
  return v;
}

Mask mask_of(std::array<int, 3> dims, const std::vector<std::size_t>& on) {
  Mask m(VolumeHeader::make(dims, 1, Domain::scalar));
  for (auto i : on) m.at(i, 0) = 1;
  return m;
}

// Exact segment versus closed box test (slab method), voxel coordinates.
bool segment_hits_box(const Eigen::Vector3d& a, const Eigen::Vector3d& b, const Eigen::Vector3d& lo,
                      const Eigen::Vector3d& hi) {
  double t0 = 0.0, t1 = 1.0;
  const Eigen::Vector3d d = b - a;
  for (int k = 0; k < 3; ++k) {
    if (std::abs(d(k)) < 1e-300) {
      if (a(k) < lo(k) || a(k) > hi(k)) return false;
      continue;
    }
    double ta = (lo(k) - a(k)) / d(k), tb = (hi(k) - a(k)) / d(k);
    if (ta > tb) std::swap(ta, tb);
    t0 = std::max(t0, ta);
    t1 = std::min(t1, tb);
    if (t0 > t1) return false;
  }
  return true;
}

}  // namespace

TEST_CASE("cosine similarity") {
  CHECK(cosine_similarity({1, 2, 3}, {2, 4, 6}) == doctest::Approx(1.0));
  CHECK(cosine_similarity({1, 2, 3}, {-1, -2, -3}) == doctest::Approx(1.0));
  CHECK(cosine_similarity({1, 0, 0}, {0, 5, 0}) == 0.0);
  CHECK_THROWS_AS(cosine_similarity({0, 0, 0}, {1, 0, 0}), Error);
}

TEST_CASE("field similarity") {
  const Mat3d tx = Vec3d(1.7, 0.3, 0.3).asDiagonal();
  const Mat3d ty = Vec3d(0.3, 1.7, 0.3).asDiagonal();
  const VolumeD a = tensor_field({4, 4, 4}, tx), b = tensor_field({4, 4, 4}, ty);
  const auto same = field_similarity(a, a, 0.2);
  CHECK(same.mean == doctest::Approx(1.0));
  CHECK(same.evaluated == 64);
  CHECK(field_similarity(b, a, 0.5).mean == doctest::Approx(0.0).epsilon(1e-12));
  try {
    field_similarity(a, a, 1.1);
    CHECK(false);
  } catch (const Error& e) {
    CHECK(std::string(e.what()) == "empty evaluation mask");
  }
  // sign-flipped directions and log-domain inputs compare equal
  std::mt19937_64 rng(71);
  const Mat3d r = random_rotation(rng);
  const VolumeD rot = tensor_field({2, 2, 2}, Mat3d(r * tx * r.transpose()));
  VolumeD rot_log(VolumeHeader::make({2, 2, 2}, 6, Domain::tensor_log));
  for (std::size_t i = 0; i < rot_log.voxels(); ++i) rot_log.set_matrix(i, log_id(rot.matrix(i)));
  CHECK(field_similarity(rot_log, rot, 0.2).mean == doctest::Approx(1.0));

  // isotropic reference voxels are excluded, not scored
  VolumeD mixed = tensor_field({2, 1, 1}, tx);
  mixed.set_matrix(1, Mat3d::Identity());
  const auto fs = field_similarity(mixed, mixed, 0.0);
  CHECK(fs.evaluated == 1);
  CHECK(fs.excluded == 1);
}

TEST_CASE("FA MSE, GFA MSE and mean geodesic") {
  const Mat3d tx = Vec3d(1.7, 0.3, 0.3).asDiagonal();
  const VolumeD a = tensor_field({3, 3, 3}, tx);
  CHECK(fa_mse(a, a) == 0.0);

  auto odf_with_gfa = [](double g) {
    VolumeD v(VolumeHeader::make({2, 2, 2}, 15, Domain::odf));
    Eigen::VectorXd c = Eigen::VectorXd::Zero(15);
    c(0) = std::sqrt(1.0 - g * g);
    c(3) = g;
    for (std::size_t i = 0; i < v.voxels(); ++i) v.set_vector(i, c);
    return v;
  };
  CHECK(fa_mse(odf_with_gfa(0.6), odf_with_gfa(0.5)) == doctest::Approx(0.01).epsilon(1e-12));

  const VolumeD id = tensor_field({2, 2, 2}, Mat3d::Identity());
  const VolumeD e = tensor_field({2, 2, 2}, Mat3d(std::numbers::e * Mat3d::Identity()));
  CHECK(mean_geodesic(id, e) == doctest::Approx(std::sqrt(3.0)).epsilon(1e-14));
  CHECK(mean_geodesic(e, id) == doctest::Approx(mean_geodesic(id, e)).epsilon(1e-15));
  CHECK(mean_geodesic(a, a) == 0.0);

  // generated voxels off the manifold are skipped
  VolumeD broken = a;
  broken.set_matrix(0, Mat3d(-Mat3d::Identity()));
  CHECK(fa_mse(broken, a) == 0.0);
  CHECK_THROWS_AS(fa_mse(a, tensor_field({2, 2, 2}, tx)), Error);
}

TEST_CASE("mask overlap measures") {
  const std::array<int, 3> d{4, 4, 4};
  std::vector<std::size_t> a_idx, b_idx, far_idx;
  for (std::size_t i = 0; i < 8; ++i) a_idx.push_back(i);
  b_idx = a_idx;
  for (std::size_t i = 8; i < 12; ++i) b_idx.push_back(i);
  for (std::size_t i = 20; i < 28; ++i) far_idx.push_back(i);
  const Mask a = mask_of(d, a_idx), b = mask_of(d, b_idx), far = mask_of(d, far_idx);
  CHECK(dice(a, a) == 1.0);
  CHECK(dice(a, far) == 0.0);
  CHECK(std::abs(dice(a, b) - 0.8) < 1e-12);
  CHECK(overlap(a, a) == 1.0);
  CHECK(overlap(a, b) == 1.0);
  CHECK(overlap(a, mask_of(d, {0, 1, 2, 3})) == 0.5);
  CHECK(overreach(a, a) == 0.0);
  CHECK(std::abs(overreach(a, b) - 0.5) < 1e-12);
  CHECK(overreach(a, far) == 2.0);
  CHECK(overreach(a, far, OverreachVariant::common) == 1.0);
  CHECK(overreach(far, a) == 2.0);
  CHECK_THROWS_AS(overreach(mask_of(d, {}), a), Error);
}

TEST_CASE("tractogram statistics") {
  VolumeHeader grid = VolumeHeader::make({20, 20, 60}, 1, Domain::scalar);
  const Streamline straight{Eigen::Vector3d(10, 10, 5), Eigen::Vector3d(10, 10, 45)};
  const auto s = tractogram_stats({straight}, grid);
  CHECK(s.mean_length == doctest::Approx(40.0));
  CHECK(s.volume == 41);
  CHECK_THROWS_AS(tractogram_stats({}, grid), Error);
}

TEST_CASE("rasterization agrees with a brute-force segment-box oracle") {
  VolumeHeader grid = VolumeHeader::make({12, 10, 14}, 1, Domain::scalar, Eigen::Vector3d(1.5, 2.0, 1.0));
  grid.affine(0, 3) = -3.0;
  grid.affine(2, 3) = 4.0;
  std::mt19937_64 rng(72);
  std::uniform_real_distribution<double> ux(-5.0, 16.0), uy(-2.0, 20.0), uz(2.0, 20.0);
  std::uniform_int_distribution<int> len(2, 6);
  std::vector<Streamline> lines(100);
  for (auto& l : lines) {
    l.resize(len(rng));
    for (auto& p : l) p = Eigen::Vector3d(ux(rng), uy(rng), uz(rng));
  }
  const Mask m = rasterize(lines, grid);
  const Eigen::Matrix4d inv = grid.affine.inverse();
  Mask oracle(grid);
  for (const auto& l : lines)
    for (std::size_t i = 0; i + 1 < l.size(); ++i) {
      const Eigen::Vector3d a = (inv * l[i].homogeneous()).head<3>(), b = (inv * l[i + 1].homogeneous()).head<3>();
      for (int z = 0; z < 14; ++z)
        for (int y = 0; y < 10; ++y)
          for (int x = 0; x < 12; ++x) {
            const Eigen::Vector3d c(x, y, z);
            if (segment_hits_box(a, b, c.array() - 0.5, c.array() + 0.5)) oracle.at(x, y, z) = 1;
          }
    }
  std::size_t mismatch = 0, occupied = 0;
  for (std::size_t v = 0; v < m.voxels(); ++v) {
    mismatch += m.at(v, 0) != oracle.at(v, 0);
    occupied += oracle.at(v, 0);
  }
  CHECK(mismatch == 0);
  CHECK(occupied > 100);
  CHECK(tractogram_stats(lines, grid).volume == occupied);
}
