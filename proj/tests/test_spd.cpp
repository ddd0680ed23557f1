#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "mdwi/spd.hpp"
#include "test_support.hpp"

using namespace mdwi;
using mdwi::testing::random_rotation;
using mdwi::testing::random_spd;
using mdwi::testing::random_sym;

namespace {

// Independent reference: Eigen's iterative solver, sorted descending.
Eigen::Vector3d reference_eigenvalues(const Mat3d& m) {
  Eigen::SelfAdjointEigenSolver<Mat3d> es(m);
  return es.eigenvalues().reverse();
}

}  // namespace

TEST_CASE("eig_sym3 on identity and diagonal matrices") {
  const auto e = eig_sym3(Mat3d::Identity());
  CHECK((e.values - Vec3d::Ones()).norm() < 1e-15);
  CHECK((e.vectors.transpose() * e.vectors - Mat3d::Identity()).norm() < 1e-14);

  const auto d = eig_sym3(Vec3d(1, 3, 2).asDiagonal().toDenseMatrix());
  CHECK((d.values - Vec3d(3, 2, 1)).norm() < 1e-14);
  CHECK(std::abs(d.vectors(1, 0)) == doctest::Approx(1.0));
  CHECK(std::abs(d.vectors(2, 1)) == doctest::Approx(1.0));
  CHECK(std::abs(d.vectors(0, 2)) == doctest::Approx(1.0));
  // sign convention: first significant component nonnegative
  for (int k = 0; k < 3; ++k) CHECK(d.vectors.col(k).maxCoeff() > 0.0);
}

TEST_CASE("eig_sym3 recovers constructed spectra") {
  std::mt19937_64 rng(11);
  for (int t = 0; t < 2000; ++t) {
    const Mat3d r = random_rotation(rng);
    const Mat3d m = r * Vec3d(2, 1, 0.5).asDiagonal() * r.transpose();
    const auto e = eig_sym3(m);
    CHECK((e.values - Vec3d(2, 1, 0.5)).norm() < 1e-12);
    CHECK((e.reconstruct() - m).norm() < 1e-10);
    CHECK(std::abs(std::abs(e.vectors.col(0).dot(r.col(0))) - 1.0) < 1e-12);
  }
}

TEST_CASE("eig_sym3 agrees with an iterative solver on ill-conditioned input") {
  std::mt19937_64 rng(12);
  double worst_orth = 0.0, worst_rec = 0.0, worst_val = 0.0;
  for (int t = 0; t < 20000; ++t) {
    const Mat3d m = random_spd(rng, 1e6);
    const auto e = eig_sym3(m);
    worst_orth = std::max(worst_orth, (e.vectors.transpose() * e.vectors - Mat3d::Identity()).norm());
    worst_rec = std::max(worst_rec, (e.reconstruct() - m).norm() / m.norm());
    worst_val = std::max(worst_val, (e.values - reference_eigenvalues(m)).norm() / m.norm());
  }
  CHECK(worst_orth < 1e-13);
  CHECK(worst_rec < 1e-13);
  CHECK(worst_val < 1e-13);
}

TEST_CASE("eig_sym3 handles repeated eigenvalues and rejects non-finite input") {
  std::mt19937_64 rng(13);
  for (int t = 0; t < 500; ++t) {
    const Mat3d r = random_rotation(rng);
    const Mat3d m = r * Vec3d(1.7, 0.3, 0.3).asDiagonal() * r.transpose();
    const auto e = eig_sym3(m);
    CHECK((e.reconstruct() - m).norm() < 1e-12);
    CHECK((e.vectors.transpose() * e.vectors - Mat3d::Identity()).norm() < 1e-12);
  }
  Mat3d bad = Mat3d::Identity();
  bad(0, 1) = bad(1, 0) = std::nan("");
  CHECK_THROWS_AS(eig_sym3(bad), Error);
}

TEST_CASE("log_id and exp_id closed forms") {
  const double e1 = std::numbers::e;
  CHECK(log_id(Mat3d::Identity()).norm() < 1e-15);
  CHECK((log_id(Mat3d(e1 * Mat3d::Identity())) - Mat3d::Identity()).norm() < 1e-14);
  CHECK((exp_id(Mat3d::Zero()) - Mat3d::Identity()).norm() < 1e-15);
  CHECK((exp_id(Mat3d::Identity()) - e1 * Mat3d::Identity()).norm() < 1e-14);

  std::mt19937_64 rng(14);
  for (int t = 0; t < 200; ++t) {
    const Mat3d r = random_rotation(rng);
    const Mat3d p = r * Vec3d(2, 1, 1).asDiagonal() * r.transpose();
    const Mat3d expect = r * Vec3d(std::log(2.0), 0, 0).asDiagonal() * r.transpose();
    CHECK((log_id(p) - expect).cwiseAbs().maxCoeff() < 1e-10);
  }
}

TEST_CASE("log_id rejects non-SPD input unless lenient") {
  const Mat3d singular = Vec3d(1, 1, 0).asDiagonal();
  CHECK_THROWS_AS(log_id(singular), Error);
  try {
    log_id(Mat3d(-Mat3d::Identity()));
  } catch (const Error& err) {
    CHECK(err.kind() == ErrorKind::not_on_manifold);
  }
  CHECK_THROWS_AS(log_id(singular, SpdPolicy::lenient), Error);
  const Mat3d tiny = Vec3d(1, 1, 1e-14).asDiagonal();
  CHECK_THROWS_AS(log_id(tiny), Error);
  const Mat3d clamped = log_id(tiny, SpdPolicy::lenient);
  CHECK(clamped.allFinite());
  CHECK(clamped(2, 2) == doctest::Approx(std::log(kSpdFloor)));
}

TEST_CASE("exp_id output is SPD for bounded random symmetric input") {
  std::mt19937_64 rng(15);
  int non_spd = 0;
  for (int t = 0; t < 100000; ++t)
    if (!is_spd(exp_id(random_sym(rng, -5.0, 5.0)))) ++non_spd;
  CHECK(non_spd == 0);
}

TEST_CASE("log/exp round trips") {
  std::mt19937_64 rng(16);
  double worst_le = 0.0, worst_el = 0.0;
  for (int t = 0; t < 10000; ++t) {
    const Mat3d p = random_spd(rng, 1e6);
    worst_le = std::max(worst_le, (exp_id(log_id(p)) - p).norm() / p.norm());
    const Mat3d s = random_sym(rng, -3.0, 3.0);
    worst_el = std::max(worst_el, (log_id(exp_id(s)) - s).norm() / std::max(1.0, s.norm()));
  }
  CHECK(worst_le < 1e-10);
  CHECK(worst_el < 1e-10);
}

TEST_CASE("geodesic_spd") {
  std::mt19937_64 rng(17);
  const Mat3d p = random_spd(rng, 100);
  CHECK(geodesic_spd(p, p) == doctest::Approx(0.0));
  CHECK(geodesic_spd(Mat3d::Identity(), Mat3d(std::numbers::e * Mat3d::Identity())) ==
        doctest::Approx(std::sqrt(3.0)).epsilon(1e-14));
  for (int t = 0; t < 1000; ++t) {
    const Mat3d a = random_spd(rng, 1e3), b = random_spd(rng, 1e3), c = random_spd(rng, 1e3);
    CHECK(geodesic_spd(a, b) == doctest::Approx(geodesic_spd(b, a)).epsilon(1e-12));
    CHECK(geodesic_spd(a, c) <= geodesic_spd(a, b) + geodesic_spd(b, c) + 1e-12);
  }
}

TEST_CASE("fractional anisotropy") {
  CHECK(fa(Vec3d(1, 1, 1)) == 0.0);
  CHECK(fa(Vec3d(1, 0, 0)) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(std::abs(fa(Vec3d(2, 1, 1)) - 1.0 / std::sqrt(6.0)) < 1e-15);
  CHECK(fa(Vec3d(6, 3, 3)) == doctest::Approx(fa(Vec3d(2, 1, 1))).epsilon(1e-15));
  CHECK_THROWS_AS(fa(Vec3d(0, 0, 0)), Error);
  CHECK_THROWS_AS(fa(Vec3d(1, 0.5, -0.1)), Error);
}

TEST_CASE("principal direction") {
  const auto d = eig_sym3(Vec3d(3, 2, 1).asDiagonal().toDenseMatrix());
  CHECK((principal_direction(d) - Vec3d(1, 0, 0)).norm() < 1e-15);
  CHECK_THROWS_AS(principal_direction(eig_sym3(Mat3d::Identity())), Error);

  std::mt19937_64 rng(18);
  for (int t = 0; t < 200; ++t) {
    const Mat3d r = random_rotation(rng);
    const auto e = eig_sym3(Mat3d(r * Vec3d(2, 1, 0.5).asDiagonal() * r.transpose()));
    CHECK(std::abs(principal_direction(e).dot(r.col(0))) == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("log-domain interpolation follows the geometric determinant law") {
  std::mt19937_64 rng(19);
  std::uniform_real_distribution<double> ut(0.0, 1.0);
  double worst = 0.0;
  for (int t = 0; t < 10000; ++t) {
    const Mat3d a = random_spd(rng, 1e3), b = random_spd(rng, 1e3);
    const double s = ut(rng);
    const Mat3d mid = exp_id(Mat3d((1 - s) * log_id(a) + s * log_id(b)));
    const double expect = std::pow(a.determinant(), 1 - s) * std::pow(b.determinant(), s);
    worst = std::max(worst, std::abs(mid.determinant() - expect) / expect);
  }
  CHECK(worst < 1e-8);
}

TEST_CASE("packed symmetric layout") {
  Mat3d m;
  m << 1, 2, 3, 2, 4, 5, 3, 5, 6;
  const Sym6d v = pack_sym(m);
  CHECK(v(0) == 1);
  CHECK(v(1) == 2);
  CHECK(v(2) == 3);
  CHECK(v(3) == 4);
  CHECK(v(4) == 5);
  CHECK(v(5) == 6);
  CHECK(unpack_sym(v) == m);
}
