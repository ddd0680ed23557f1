// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any
// failure. `acceptance N ...` runs only the listed criteria.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <random>
#include <set>
#include <sstream>
#include <string>

#include "mdwi/metrics.hpp"
#include "mdwi/parallel.hpp"
#include "mdwi/spectral_grad.hpp"
#include "mdwi/synth.hpp"
#include "mdwi/tracking.hpp"
#include "mdwi/volume_ops.hpp"
#include "test_support.hpp"

using namespace mdwi;
using mdwi::testing::random_rotation;
using mdwi::testing::random_spd;
using mdwi::testing::random_sym;
using mdwi::testing::random_tangent;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double a) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

Outcome manifold_validity() {
  std::mt19937_64 rng(101);
  std::uniform_real_distribution<double> u(-5.0, 5.0);
  std::size_t tensors = 0, odfs = 0, bad = 0;
  // Tensor tangents span the generator's hardtanh range.
  for (int chunk = 0; chunk < 8; ++chunk) {
    VolumeD v(VolumeHeader::make({50, 50, 50}, 6, Domain::tensor_log));
    for (auto& x : v.data()) x = u(rng);
    bad += audit_validity(exp_tensor_volume(v)).invalid;
    tensors += v.voxels();
  }
  // ODF tangents span the tanh head range (|v_k| < 0.4, |v| < pi/2).
  const int k = default_basis().size();
  std::uniform_real_distribution<double> t(-0.4, 0.4);
  for (int chunk = 0; chunk < 8; ++chunk) {
    VolumeD v(VolumeHeader::make({50, 50, 50}, k, Domain::odf_log));
    for (std::size_t i = 0; i < v.voxels(); ++i)
      for (int c = 1; c < k; ++c) v.at(i, c) = t(rng);
    bad += audit_validity(exp_odf_volume(v)).invalid;
    odfs += v.voxels();
  }

  PhantomSpec ps;
  ps.dims = {32, 32, 32};
  TrainConfig cfg;
  cfg.euclidean_bypass = true;
  const TrainResult init = init_models({phantom_gen(ps)}, cfg);
  const std::size_t bypass_bad = audit_validity(synthesize(Synthesizer{init.g_y, cfg}, phantom_gen(ps).t1)).invalid;

  std::ostringstream d;
  d << tensors << " tensors + " << odfs << " ODFs through exp: " << bad << " invalid; bypass ablation: " << bypass_bad
    << " invalid";
  return {bad == 0 && tensors + odfs >= 1000000 && bypass_bad > 0, d.str()};
}

Outcome round_trips() {
  std::mt19937_64 rng(202);
  double spd_err = 0.0, sym_err = 0.0, sphere_err = 0.0, sphere_back = 0.0;
  for (int i = 0; i < 10000; ++i) {
    const Mat3d p = random_spd(rng, 1e6);
    spd_err = std::max(spd_err, (exp_id(log_id(p)) - p).norm() / p.norm());
    const Mat3d s = random_sym(rng, -3.0, 3.0);
    sym_err = std::max(sym_err, (log_id(exp_id(s)) - s).norm() / std::max(1.0, s.norm()));
  }
  const int k = default_basis().size();
  for (int i = 0; i < 10000; ++i) {
    const Eigen::VectorXd v = random_tangent(rng, k, std::numbers::pi - 1e-6);
    const Eigen::VectorXd c = exp_u(v);
    sphere_err = std::max(sphere_err, (log_u(c, OrthantPolicy::whole_sphere) - v).norm());
    sphere_back = std::max(sphere_back, (exp_u(log_u(c, OrthantPolicy::whole_sphere)) - c).norm());
  }
  std::ostringstream d;
  d << "SPD exp(log) rel " << spd_err << ", log(exp) rel " << sym_err << "; sphere log(exp) " << sphere_err
    << ", exp(log) " << sphere_back;
  return {spd_err < 1e-10 && sym_err < 1e-10 && sphere_err < 1e-10 && sphere_back < 1e-10, d.str()};
}

Outcome gradients() {
  std::mt19937_64 rng(303);
  double worst = 0.0;
  int evaluated = 0, skipped = 0;
  for (MapTag map : {MapTag::log, MapTag::exp}) {
    int done = 0;
    while (done < 100) {
      const Mat3d m = map == MapTag::log ? random_spd(rng, 1e2, 2.0) : random_sym(rng, -2.0, 2.0);
      const auto r = fd_gradcheck(map, m, random_sym(rng));
      if (r.status == GradcheckStatus::skipped_degenerate) {
        ++skipped;
        continue;
      }
      ++done;
      worst = std::max(worst, r.max_rel_error);
    }
    evaluated += done;
  }
  std::ostringstream d;
  d << evaluated << " draws (" << skipped << " skipped with gap <= 1e-3), max rel error " << worst;
  return {worst < 1e-5, d.str()};
}

Outcome determinant_law() {
  std::mt19937_64 rng(404);
  std::uniform_real_distribution<double> tt(0.0, 1.0);
  double worst = 0.0;
  for (int i = 0; i < 10000; ++i) {
    const Mat3d a = random_spd(rng, 1e3), b = random_spd(rng, 1e3);
    const double t = tt(rng);
    const Mat3d m = exp_id(Mat3d((1.0 - t) * log_id(a) + t * log_id(b)));
    const double expected = std::pow(a.determinant(), 1.0 - t) * std::pow(b.determinant(), t);
    worst = std::max(worst, std::abs(m.determinant() - expected) / expected);
  }
  return {worst < 1e-8, "10000 pairs, max rel det error " + fmt("%.3g", worst)};
}

Outcome closed_forms() {
  const double fa_v = fa(Vec3d(2, 1, 1));
  Eigen::VectorXd c = Eigen::VectorXd::Zero(15);
  c(0) = 0.6;
  c(3) = 0.8;
  const double gfa_v = gfa(c);
  const double geo = geodesic_spd(Mat3d::Identity(), Mat3d(std::exp(1.0) * Mat3d::Identity()));
  Mask a(VolumeHeader::make({4, 4, 1}, 1, Domain::scalar)), b = a;
  for (int i = 0; i < 8; ++i) a.at(static_cast<std::size_t>(i), 0) = b.at(static_cast<std::size_t>(i), 0) = 1;
  for (int i = 8; i < 12; ++i) b.at(static_cast<std::size_t>(i), 0) = 1;
  const double orr = overreach(a, b), dc = dice(a, b);
  const double err = std::max({std::abs(fa_v - 1.0 / std::sqrt(6.0)), std::abs(gfa_v - 0.8),
                               std::abs(geo - std::sqrt(3.0)), std::abs(orr - 0.5), std::abs(dc - 0.8)});
  std::ostringstream d;
  d.precision(15);
  d << "FA " << fa_v << ", GFA " << gfa_v << ", geodesic " << geo << ", OR " << orr << ", Dice " << dc
    << "; max error " << err;
  return {err <= 1e-12, d.str()};
}

Outcome toy_synthesis() {
  const Phantom ph = phantom_gen(PhantomSpec{});
  const TrainConfig cfg;
  const TrainResult r = train_toy({ph}, cfg);
  bool clean = r.total_step_invalid == 0;
  for (const auto& row : r.trace) clean = clean && row.metrics.invalid == 0 && row.step_invalid == 0;
  const EvalMetrics& m = r.trace.back().metrics;
  std::ostringstream d;
  d << cfg.epochs << "x" << cfg.steps_per_epoch << " steps, cosine@FA>=0.5 " << m.cosine_05 << ", FA MSE "
    << m.fa_mse << ", audit failures at logged steps " << r.total_step_invalid;
  return {clean && m.cosine_05 >= 0.9 && m.fa_mse <= 0.02, d.str()};
}

Outcome tractography() {
  PhantomSpec s;
  s.length = 40.0;
  const Phantom ph = phantom_gen(s);
  const auto lines = track(ph.tensor, ph.wm_mask, TrackingParams{}, 7);
  if (lines.empty()) return {false, "no streamlines"};
  std::size_t outside = 0;
  for (const auto& l : lines) {
    const double len = streamline_length(l);
    if (len < 10.0 || len > 300.0) ++outside;
  }
  const TractogramStats st = tractogram_stats(lines, ph.wm_mask.header());
  const double d = dice(rasterize(lines, ph.wm_mask.header()), ph.wm_mask);
  std::ostringstream o;
  o << st.count << " streamlines, mean length " << st.mean_length << " mm (corridor 40), " << outside
    << " outside [10, 300] mm, Dice " << d;
  return {std::abs(st.mean_length - 40.0) <= 1.0 && outside == 0 && d >= 0.9, o.str()};
}

std::string run_csv(int threads) {
  set_default_threads(threads);
  PhantomSpec ps;
  ps.dims = {32, 32, 32};
  TrainConfig cfg;
  cfg.epochs = 2;
  cfg.steps_per_epoch = 3;
  cfg.batch_size = 1;
  std::ostringstream out;
  write_trace_csv(out, train_toy({phantom_gen(ps)}, cfg).trace);

  PhantomSpec cs;
  cs.dims = {32, 32, 32};
  cs.length = 20.0;
  const Phantom ph = phantom_gen(cs);
  const auto lines = track(ph.tensor, ph.wm_mask, TrackingParams{}, 3);
  const TractogramStats st = tractogram_stats(lines, ph.wm_mask.header());
  out.precision(17);
  out << "count,mean_length,std_length,volume\n"
      << st.count << ',' << st.mean_length << ',' << st.std_length << ',' << st.volume << '\n';
  return out.str();
}

Outcome reproducibility() {
  const std::string a = run_csv(1), b = run_csv(1), c = run_csv(4);
  set_default_threads(resolve_threads());
  std::ostringstream d;
  d << "training trace + tractogram CSV (" << a.size() << " bytes): runs " << (a == b ? "identical" : "DIFFER")
    << ", threads 1 vs 4 " << (a == c ? "identical" : "DIFFER");
  return {a == b && a == c, d.str()};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria = {
      {"manifold validity", manifold_validity}, {"round trips", round_trips},
      {"spectral gradients", gradients},        {"determinant interpolation", determinant_law},
      {"closed-form metrics", closed_forms},    {"toy synthesis", toy_synthesis},
      {"tractography", tractography},           {"reproducibility", reproducibility},
  };
  std::set<int> only;
  for (int i = 1; i < argc; ++i) only.insert(std::atoi(argv[i]));

  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i) + 1;
    if (!only.empty() && !only.count(id)) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (!o.pass) ++failed;
    std::printf("criterion %d %-26s %s  %s  [%.1f s]\n", id, criteria[i].first, o.pass ? "PASS" : "FAIL",
                o.detail.c_str(), secs);
    std::fflush(stdout);
  }
  return failed ? 1 : 0;
}
