#include <doctest.h>

#include <cmath>
#include <random>

#include "mdwi/losses.hpp"
#include "mdwi/volume_ops.hpp"
#include "test_support.hpp"

using namespace mdwi;
using mdwi::testing::random_rotation;

namespace {

VolumeD constant(std::array<int, 3> dims, int channels, Domain d, double value) {
  VolumeD v(VolumeHeader::make(dims, channels, d));
  for (double& x : v.data()) x = value;
  return v;
}

VolumeD ones_map(std::array<int, 3> dims) { return constant(dims, 1, Domain::scalar, 1.0); }

Eigen::VectorXd scores(std::initializer_list<double> s) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(s.size()));
  int i = 0;
  for (double x : s) v(i++) = x;
  return v;
}

}  // namespace

TEST_CASE("least-squares adversarial losses") {
  CHECK(lsgan_d_loss(scores({1.0}), scores({0.0})) == 0.0);
  CHECK(lsgan_d_loss(scores({0.0}), scores({1.0})) == 1.0);
  CHECK(lsgan_d_loss(scores({0.5, 0.5}), scores({0.5})) == 0.25);
  CHECK(lsgan_g_loss(scores({1.0})) == 0.0);
  CHECK(lsgan_g_loss(scores({0.0})) == 0.5);
  CHECK(lsgan_g_loss(scores({0.5})) == 0.125);
  CHECK_THROWS_AS(lsgan_d_loss(Eigen::VectorXd(), scores({0.0})), Error);
  CHECK_THROWS_AS(lsgan_g_loss(scores({std::nan("")})), Error);

  Eigen::VectorXd dr, df;
  const Eigen::VectorXd r = scores({0.3, 1.4}), f = scores({-0.2, 0.9, 0.1});
  lsgan_d_loss(r, f, &dr, &df);
  const double h = 1e-6;
  for (int i = 0; i < 2; ++i) {
    Eigen::VectorXd rp = r, rm = r;
    rp(i) += h;
    rm(i) -= h;
    CHECK(dr(i) == doctest::Approx((lsgan_d_loss(rp, f) - lsgan_d_loss(rm, f)) / (2 * h)).epsilon(1e-8));
  }
  Eigen::VectorXd dg;
  lsgan_g_loss(f, &dg);
  for (int i = 0; i < 3; ++i) {
    Eigen::VectorXd fp = f, fm = f;
    fp(i) += h;
    fm(i) -= h;
    CHECK(df(i) == doctest::Approx((lsgan_d_loss(r, fp) - lsgan_d_loss(r, fm)) / (2 * h)).epsilon(1e-8));
    CHECK(dg(i) == doctest::Approx((lsgan_g_loss(fp) - lsgan_g_loss(fm)) / (2 * h)).epsilon(1e-8));
  }
}

TEST_CASE("cycle loss on hand-summed toys") {
  const LossWeights w;
  const std::array<int, 3> hr{2, 2, 2}, lr{1, 1, 1};
  const VolumeD x = constant(hr, 1, Domain::scalar, 0.5);
  const VolumeD yu = constant(hr, 6, Domain::tensor_log, 0.1);
  const VolumeD y = constant(lr, 6, Domain::tensor_log, 0.1);
  CHECK(cycle_loss(x, x, yu, yu, y, y, w, ones_map(hr), ones_map(lr)) == 0.0);

  const VolumeD x1 = constant(hr, 1, Domain::scalar, 1.5);
  const VolumeD yu1 = constant(hr, 6, Domain::tensor_log, -0.9);
  const VolumeD y1 = constant(lr, 6, Domain::tensor_log, 1.1);
  CHECK(cycle_loss(x, x1, yu, yu1, y, y1, w, ones_map(hr), ones_map(lr)) == doctest::Approx(w.cyc_x + w.cyc_y));

  const VolumeD zero_hr = constant(hr, 1, Domain::scalar, 0.0), zero_lr = constant(lr, 1, Domain::scalar, 0.0);
  CHECK(cycle_loss(x, x1, yu, yu1, y, y1, w, zero_hr, zero_lr) == doctest::Approx(w.cyc_x));

  const VolumeD raw = constant(hr, 6, Domain::tensor, 1.0);
  CHECK_THROWS_AS(cycle_loss(x, x1, raw, yu1, y, y1, w, ones_map(hr), ones_map(lr)), Error);
  CHECK_THROWS_AS(cycle_loss(x, x1, yu, yu1, y, yu1, w, ones_map(hr), ones_map(lr)), Error);
}

TEST_CASE("prior loss and anisotropy linearity") {
  const LossWeights w;
  const std::array<int, 3> d{2, 2, 2};
  const VolumeD gy = constant(d, 6, Domain::tensor_log, 0.0), ty = constant(d, 6, Domain::tensor_log, 1.0);
  const VolumeD gx = constant(d, 1, Domain::scalar, 0.0), tx = constant(d, 1, Domain::scalar, -1.0);
  CHECK(prior_loss(gy, gy, gx, gx, w, ones_map(d)) == 0.0);
  CHECK(prior_loss(gy, ty, gx, tx, w, ones_map(d)) == doctest::Approx(w.prior_x + w.prior_y));

  VolumeD half = ones_map(d);
  for (int z = 0; z < 2; ++z)
    for (int y = 0; y < 2; ++y) half.at(0, y, z) = 0.0;
  CHECK(prior_loss(gy, ty, gx, tx, w, half) == doctest::Approx(0.5 * w.prior_x + w.prior_y));

  std::mt19937_64 rng(51);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  VolumeD a = ones_map(d), g1 = gy, t1 = ty;
  for (double& v : a.data()) v = u(rng);
  for (double& v : g1.data()) v = u(rng);
  VolumeD a2 = a;
  for (double& v : a2.data()) v *= 2.0;
  const double base = prior_loss(g1, t1, gx, tx, w, a);
  const double doubled = prior_loss(g1, t1, gx, tx, w, a2);
  const double unweighted = w.prior_y * 1.0;
  CHECK(doubled - unweighted == doctest::Approx(2.0 * (base - unweighted)).epsilon(1e-12));
}

TEST_CASE("L1 gradients") {
  std::mt19937_64 rng(52);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  VolumeD p(VolumeHeader::make({3, 2, 2}, 6, Domain::tensor_log)), t = p, w(VolumeHeader::make({3, 2, 2}, 1, Domain::scalar));
  for (double& v : p.data()) v = u(rng);
  for (double& v : t.data()) v = u(rng);
  for (double& v : w.data()) v = 0.5 + 0.5 * u(rng);
  VolumeD g;
  l1_loss(p, t, &w, &g);
  const double h = 1e-7;
  for (std::size_t i = 0; i < p.data().size(); i += 5) {
    VolumeD pp = p, pm = p;
    pp.data()[i] += h;
    pm.data()[i] -= h;
    CHECK(g.data()[i] == doctest::Approx((l1_loss(pp, t, &w) - l1_loss(pm, t, &w)) / (2 * h)).epsilon(1e-6));
  }
}

TEST_CASE("anisotropy weight equals FA of the exponentiated target") {
  VolumeD iso = constant({2, 2, 2}, 6, Domain::tensor_log, 0.0);
  for (std::size_t v = 0; v < iso.voxels(); ++v) iso.set_matrix(v, Mat3d(0.3 * Mat3d::Identity()));
  const VolumeD flat = anisotropy_weight(iso);
  for (double x : flat.data()) CHECK(x == doctest::Approx(0.0).epsilon(1e-12));

  VolumeD stick = iso;
  stick.set_matrix(0, Mat3d(Vec3d(0.0, -30.0, -30.0).asDiagonal()));
  CHECK(anisotropy_weight(stick).at(0, 0) == doctest::Approx(1.0).epsilon(1e-12));

  std::mt19937_64 rng(53);
  std::uniform_real_distribution<double> lam(0.2, 2.0);
  VolumeD mixed(VolumeHeader::make({4, 4, 4}, 6, Domain::tensor_log));
  std::vector<double> expect(mixed.voxels());
  for (std::size_t v = 0; v < mixed.voxels(); ++v) {
    const Vec3d l(lam(rng), lam(rng), lam(rng));
    const Mat3d r = random_rotation(rng);
    mixed.set_matrix(v, Mat3d(r * l.array().log().matrix().asDiagonal() * r.transpose()));
    const double m = l.mean();
    expect[v] = std::sqrt(1.5 * (l.array() - m).square().sum() / l.squaredNorm());
  }
  const VolumeD a = anisotropy_weight(mixed);
  for (std::size_t v = 0; v < mixed.voxels(); ++v) CHECK(a.at(v, 0) == doctest::Approx(expect[v]).epsilon(1e-10));

  CHECK_THROWS_AS(anisotropy_weight(exp_tensor_volume(mixed)), Error);

  VolumeD odf(VolumeHeader::make({1, 1, 1}, 15, Domain::odf_log));
  odf.at(0, 3) = std::acos(0.6);
  CHECK(anisotropy_weight(odf).at(0, 0) == doctest::Approx(0.8).epsilon(1e-12));
}

TEST_CASE("full objective composition") {
  ObjectiveParts zero;
  const auto z = full_objective(zero);
  CHECK(z.generator == 0.0);
  CHECK(z.signed_total == 0.0);

  ObjectiveParts one;
  one.cycle = 0.7;
  CHECK(full_objective(one).generator == 0.7);

  std::mt19937_64 rng(54);
  std::uniform_real_distribution<double> u(0.0, 3.0);
  for (int t = 0; t < 100; ++t) {
    ObjectiveParts p{u(rng), u(rng), u(rng), u(rng), u(rng), u(rng)};
    const auto b = full_objective(p);
    double resum = 0.0;
    for (const auto& term : b.terms) resum += term.second;
    CHECK(std::abs(resum - b.generator) < 1e-12);
    CHECK(std::abs(b.generator - (p.g_adv_x + p.g_adv_y + p.cycle + p.prior)) < 1e-12);
    CHECK(std::abs(b.signed_total - (-p.d_x - p.d_y + p.cycle + p.prior)) < 1e-12);
    CHECK(b.discriminator == doctest::Approx(p.d_x + p.d_y));
  }
}
