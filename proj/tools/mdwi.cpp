// mdwi: command-line front end for phantoms, auditing, maps, resampling,
// gradient checks, toy synthesis training, tracking and bundle comparison.
// Tables go to stdout as CSV, summaries to stderr.

#include <CLI11.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>
#include <sstream>
#include <string>

#include "mdwi/io.hpp"
#include "mdwi/metrics.hpp"
#include "mdwi/parallel.hpp"
#include "mdwi/spectral_grad.hpp"
#include "mdwi/synth.hpp"
#include "mdwi/tracking.hpp"
#include "mdwi/volume_ops.hpp"

namespace fs = std::filesystem;
using namespace mdwi;

namespace {

std::array<int, 3> parse_dims(const std::string& s) {
  std::array<int, 3> d{};
  std::stringstream in(s);
  std::string part;
  int n = 0;
  while (std::getline(in, part, ',')) {
    if (n == 3) fail(ErrorKind::invalid_argument, "dims: expected N or X,Y,Z");
    try {
      d[static_cast<std::size_t>(n++)] = std::stoi(part);
    } catch (const std::exception&) {
      fail(ErrorKind::invalid_argument, "dims: not an integer: '" + part + "'");
    }
  }
  if (n == 1) d[1] = d[2] = d[0];
  else if (n != 3) fail(ErrorKind::invalid_argument, "dims: expected N or X,Y,Z");
  return d;
}

VolumeD load(const std::string& path) { return read_volume(path).cast<double>(); }

Mask load_mask(const std::string& path) {
  const VolumeD v = load(path);
  return mask_from(v);
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) fail(ErrorKind::io, "cannot create directory " + dir.string() + ": " + ec.message());
}

std::ofstream open_out(const fs::path& p) {
  std::ofstream out(p);
  if (!out) fail(ErrorKind::io, "cannot open " + p.string() + " for writing");
  return out;
}

/// Tangent-domain copy of a diffusion volume (tensor / ODF input is mapped with log).
VolumeD to_tangent(const VolumeD& v) {
  switch (v.domain()) {
    case Domain::tensor: return log_tensor_volume(v);
    case Domain::odf: return log_odf_volume(v);
    default: return v;
  }
}

/// 8-bit RGB slice (binary PPM) of FA-weighted principal directions.
void write_color_fa(const VolumeD& diffusion, int axis, int index, const fs::path& path) {
  const VolumeD a = anisotropy_map(diffusion);
  const DirectionMap dirs = principal_directions(diffusion);
  const auto& d = diffusion.dims();
  if (axis < 0 || axis > 2 || index < 0 || index >= d[static_cast<std::size_t>(axis)])
    fail(ErrorKind::invalid_argument, "color-fa: slice out of range");
  const int u = axis == 0 ? 1 : 0;
  const int w = axis == 2 ? 1 : 2;
  const int cols = d[static_cast<std::size_t>(u)], rows = d[static_cast<std::size_t>(w)];
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorKind::io, "cannot open " + path.string() + " for writing");
  out << "P6\n" << cols << " " << rows << "\n255\n";
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      std::array<int, 3> p{};
      p[static_cast<std::size_t>(axis)] = index;
      p[static_cast<std::size_t>(u)] = c;
      p[static_cast<std::size_t>(w)] = r;
      const std::size_t v = diffusion.index(p[0], p[1], p[2]);
      const double f = std::isfinite(a.at(v, 0)) ? std::clamp(a.at(v, 0), 0.0, 1.0) : 0.0;
      for (int k = 0; k < 3; ++k) {
        const double val = dirs.valid[v] ? f * std::abs(dirs.directions[v](k)) : 0.0;
        out.put(static_cast<char>(static_cast<unsigned char>(std::lround(255.0 * val))));
      }
    }
  }
  if (!out) fail(ErrorKind::io, "write failed: " + path.string());
}

Mat3d random_rotation(std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  Eigen::Quaterniond q(n(rng), n(rng), n(rng), n(rng));
  return q.normalized().toRotationMatrix();
}

bool is_streamline_file(const std::string& p) { return fs::path(p).extension() != ".nii"; }

/// Applies key=value lines from `path` to options of `app` that were not
/// given on the command line. Keys are long option names without dashes.
void apply_config(CLI::App* app, const std::string& path) {
  if (path.empty()) return;
  std::ifstream in(path);
  if (!in) fail(ErrorKind::io, "cannot open config " + path);
  const auto trim = [](std::string t) {
    const auto b = t.find_first_not_of(" \t\r");
    const auto e = t.find_last_not_of(" \t\r");
    return b == std::string::npos ? std::string() : t.substr(b, e - b + 1);
  };
  std::string line;
  int n = 0;
  while (std::getline(in, line)) {
    ++n;
    line = trim(line.substr(0, line.find('#')));
    if (line.empty() || line.front() == '[') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      fail(ErrorKind::invalid_argument, path + ":" + std::to_string(n) + ": expected key=value");
    std::string key = trim(line.substr(0, eq)), value = trim(line.substr(eq + 1));
    std::replace(key.begin(), key.end(), '_', '-');
    if (value.size() >= 2 && value.front() == '"' && value.back() == '"') value = value.substr(1, value.size() - 2);
    CLI::Option* opt = app->get_option_no_throw("--" + key);
    if (!opt || key == "config") fail(ErrorKind::invalid_argument, path + ": unknown key '" + key + "'");
    if (opt->count() > 0) continue;
    opt->add_result(value);
    opt->run_callback();
  }
}

// Subcommand option storage.
struct PhantomOpts {
  std::string geometry = "straight", dims = "64", out = ".";
  std::uint64_t seed = 1;
  double noise = 0.02, radius = 8.0, arc_radius = 24.0, length = 0.0;
  bool odf = false;
};

struct MapOpts {
  std::string kind, in, ref, out, pgm;
  int axis = 2, slice = -1;
  double threshold = 0.2;
};

struct TrainOpts {
  TrainConfig cfg;
  PhantomOpts phantom;
  std::string out_dir = "train_out";
};

struct TrackOpts {
  std::string field, mask, out;
  TrackingParams params;
  std::uint64_t seed = 1;
};

struct CompareOpts {
  std::string a, b, grid;
  bool common = false;
};

PhantomSpec to_spec(const PhantomOpts& o) {
  PhantomSpec s;
  s.geometry = geometry_from_string(o.geometry);
  s.dims = parse_dims(o.dims);
  s.seed = o.seed;
  s.noise = o.noise;
  s.bundle_radius = o.radius;
  s.arc_radius = o.arc_radius;
  s.length = o.length;
  s.with_odf = o.odf;
  return s;
}

void add_phantom_options(CLI::App* app, PhantomOpts& o) {
  app->add_option("--geometry", o.geometry, "straight | arc | crossing")->capture_default_str();
  app->add_option("--dims", o.dims, "N or X,Y,Z")->capture_default_str();
  app->add_option("--phantom-seed,--seed", o.seed, "noise seed")->capture_default_str();
  app->add_option("--noise", o.noise, "T1 noise standard deviation")->capture_default_str();
  app->add_option("--radius", o.radius, "bundle radius (mm)")->capture_default_str();
  app->add_option("--arc-radius", o.arc_radius, "arc radius (mm)")->capture_default_str();
  app->add_option("--length", o.length, "straight bundle length (mm), 0 = full")->capture_default_str();
  app->add_flag("--odf", o.odf, "also write the square-root ODF field");
}

int run_phantom(const PhantomOpts& o) {
  const Phantom ph = phantom_gen(to_spec(o));
  const fs::path dir(o.out);
  ensure_dir(dir);
  write_volume(dir / "t1.nii", ph.t1);
  write_volume(dir / "tensor.nii", ph.tensor);
  write_volume(dir / "wm_mask.nii", mask_volume(ph.wm_mask));
  if (o.odf) write_volume(dir / "odf.nii", ph.odf);
  std::size_t mask_voxels = 0;
  for (auto b : ph.wm_mask.data()) mask_voxels += b;
  std::cout << "file,channels,domain\n"
            << (dir / "t1.nii").string() << ",1,scalar\n"
            << (dir / "tensor.nii").string() << ",6,tensor\n"
            << (dir / "wm_mask.nii").string() << ",1,scalar\n";
  if (o.odf) std::cout << (dir / "odf.nii").string() << "," << ph.odf.channels() << ",odf\n";
  std::cerr << "phantom: " << ph.description << ", " << mask_voxels << " mask voxels\n";
  return 0;
}

int run_audit(const std::string& in) {
  const AuditReport r = audit_validity(load(in));
  std::cout << "voxels,invalid,non_finite,asymmetric,non_spd,off_sphere,outside_orthant,negative_on_grid\n"
            << r.voxels << ',' << r.invalid << ',' << r.non_finite << ',' << r.asymmetric << ',' << r.non_spd << ','
            << r.off_sphere << ',' << r.outside_orthant << ',' << r.negative_on_grid << '\n';
  std::cerr << "audit: " << r.invalid << " of " << r.voxels << " voxels invalid\n";
  return 0;
}

int run_map(const MapOpts& o) {
  const VolumeD in = load(o.in);
  const int slice = o.slice >= 0 ? o.slice : in.dims()[static_cast<std::size_t>(std::clamp(o.axis, 0, 2))] / 2;
  if (o.kind == "color-fa") {
    write_color_fa(in, o.axis, slice, o.out);
    std::cerr << "color-fa: wrote " << o.out << "\n";
    return 0;
  }

  VolumeD map;
  std::string summary;
  if (o.kind == "fa" || o.kind == "gfa") {
    const bool odf = in.domain() == Domain::odf || in.domain() == Domain::odf_log;
    if ((o.kind == "gfa") != odf)
      fail(ErrorKind::invalid_argument, o.kind + " map needs " + (odf ? "a tensor" : "an ODF") + " volume");
    map = anisotropy_map(in);
  } else {
    if (o.ref.empty()) fail(ErrorKind::invalid_argument, o.kind + " map needs --ref");
    const VolumeD ref = load(o.ref);
    if (o.kind == "geodesic") {
      const VolumeD a = to_tangent(in), b = to_tangent(ref);
      if (a.dims() != b.dims() || a.channels() != b.channels())
        fail(ErrorKind::shape_mismatch, "geodesic: inputs differ in shape");
      map = VolumeD(VolumeHeader::make(a.dims(), 1, Domain::scalar));
      map.header().affine = a.header().affine;
      map.header().spacing = a.header().spacing;
      for (std::size_t v = 0; v < a.voxels(); ++v) {
        if (a.channels() == 6) {
          map.at(v, 0) = (unpack_sym(Sym6d(a.vector(v))) - unpack_sym(Sym6d(b.vector(v)))).norm();
        } else {
          map.at(v, 0) = (a.vector(v) - b.vector(v)).norm();
        }
      }
      std::ostringstream s;
      s << "mean_geodesic," << mean_geodesic(in, ref, 0.0);
      summary = s.str();
    } else {
      const FieldSimilarity fs = field_similarity(in, ref, o.threshold);
      map = fs.map;
      std::ostringstream s;
      s << "mean_cosine," << fs.mean << "\nevaluated," << fs.evaluated << "\nexcluded," << fs.excluded;
      summary = s.str();
    }
  }
  write_volume(o.out, map);
  if (!o.pgm.empty()) {
    VolumeD shown = map;
    for (auto& x : shown.data())
      if (!std::isfinite(x)) x = 0.0;
    export_slice_pgm(shown, o.axis, slice, o.pgm);
  }
  std::cout << "metric,value\n";
  if (!summary.empty()) std::cout << summary << '\n';
  std::cerr << o.kind << ": wrote " << o.out << (o.pgm.empty() ? "" : " and " + o.pgm) << "\n";
  return 0;
}

int run_upsample(const std::string& in_path, double factor, const std::string& out) {
  const VolumeD in = load(in_path);
  VolumeD up = upsample_log_trilinear(to_tangent(in), factor);
  if (in.domain() == Domain::tensor) up = exp_tensor_volume(up);
  if (in.domain() == Domain::odf) up = exp_odf_volume(up);
  write_volume(out, up);
  const auto& d = up.dims();
  std::cerr << "upsample: " << d[0] << "x" << d[1] << "x" << d[2] << " " << to_string(up.domain()) << " -> " << out
            << "\n";
  return 0;
}

int run_gradcheck(int trials, std::uint64_t seed) {
  if (trials < 1) fail(ErrorKind::invalid_argument, "gradcheck: trials must be >= 1");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  std::cout << "map,trials,skipped,max_rel_error\n";
  double worst = 0.0;
  for (MapTag map : {MapTag::log, MapTag::exp}) {
    int done = 0, skipped = 0;
    double max_err = 0.0;
    while (done < trials) {
      Eigen::Vector3d l(u(rng), u(rng), u(rng));
      if (map == MapTag::log) l = l.array().exp();
      const Mat3d r = random_rotation(rng);
      const Mat3d m = r * l.asDiagonal() * r.transpose();
      Mat3d w;
      for (int i = 0; i < 3; ++i)
        for (int j = i; j < 3; ++j) w(i, j) = w(j, i) = u(rng);
      const GradcheckResult res = fd_gradcheck(map, sym(m), w);
      if (res.status == GradcheckStatus::skipped_degenerate) {
        ++skipped;
        continue;
      }
      ++done;
      max_err = std::max(max_err, res.max_rel_error);
    }
    worst = std::max(worst, max_err);
    std::cout << to_string(map) << ',' << trials << ',' << skipped << ',' << max_err << '\n';
  }
  std::cerr << "gradcheck: max relative error " << worst << (worst < 1e-5 ? " (pass)" : " (FAIL)") << "\n";
  return worst < 1e-5 ? 0 : 1;
}

void add_train_options(CLI::App* app, TrainOpts& o) {
  TrainConfig& c = o.cfg;
  app->add_option("--lr", c.learning_rate, "Adam learning rate")->capture_default_str();
  app->add_option("--beta1", c.beta1)->capture_default_str();
  app->add_option("--beta2", c.beta2)->capture_default_str();
  app->add_option("--batch-size", c.batch_size)->capture_default_str();
  app->add_option("--epochs", c.epochs)->capture_default_str();
  app->add_option("--steps-per-epoch", c.steps_per_epoch)->capture_default_str();
  app->add_option("--train-seed", c.seed, "weight init and sampling seed")->capture_default_str();
  app->add_option("--cyc-x", c.weights.cyc_x)->capture_default_str();
  app->add_option("--cyc-y", c.weights.cyc_y)->capture_default_str();
  app->add_option("--prior-x", c.weights.prior_x)->capture_default_str();
  app->add_option("--prior-y", c.weights.prior_y)->capture_default_str();
  app->add_option("--patch", c.patch, "HR patch edge")->capture_default_str();
  app->add_option("--width", c.width, "generator base width")->capture_default_str();
  app->add_option("--tangent-bound", c.tangent_bound, "hardtanh bound of the tensor head")->capture_default_str();
  app->add_flag("--odf-mode", c.odf, "synthesize square-root ODFs");
  app->add_flag("--euclidean-bypass", c.euclidean_bypass, "ablation: skip the exp map");
  app->add_option("--out-dir", o.out_dir, "output directory")->capture_default_str();
  add_phantom_options(app, o.phantom);
}

int run_train(TrainOpts o) {
  o.phantom.odf = o.phantom.odf || o.cfg.odf;
  const Phantom ph = phantom_gen(to_spec(o.phantom));
  const TrainResult r = train_toy({ph}, o.cfg);
  const fs::path dir(o.out_dir);
  ensure_dir(dir);
  {
    auto f = open_out(dir / "trace.csv");
    write_trace_csv(f, r.trace);
  }
  write_trace_csv(std::cout, r.trace);
  {
    auto f = open_out(dir / "generator_y.txt");
    f.precision(17);
    for (Eigen::Index i = 0; i < r.g_y.params().size(); ++i) f << r.g_y.params()(i) << '\n';
  }
  const VolumeD tangent = synthesize(Synthesizer{r.g_y, o.cfg}, ph.t1);
  VolumeD out = tangent;
  if (tangent.domain() == Domain::tensor_log) out = exp_tensor_volume(tangent);
  if (tangent.domain() == Domain::odf_log) out = exp_odf_volume(tangent);
  write_volume(dir / "synth.nii", out);
  const auto& last = r.trace.back().metrics;
  std::cerr << "train-toy: " << r.trace.size() - 1 << " epochs, cosine@0.5 " << last.cosine_05 << ", FA MSE "
            << last.fa_mse << ", audit failures during training " << r.total_step_invalid << ", final "
            << last.invalid << "; outputs in " << dir.string() << "\n";
  return 0;
}

int run_track(const TrackOpts& o) {
  const VolumeD field = load(o.field);
  const Mask mask = load_mask(o.mask);
  const auto lines = track(field, mask, o.params, o.seed);
  write_streamlines(o.out, lines);
  std::cout << "count,mean_length,std_length,volume\n";
  if (lines.empty()) {
    std::cout << "0,0,0,0\n";
  } else {
    const TractogramStats s = tractogram_stats(lines, mask.header());
    std::cout << s.count << ',' << s.mean_length << ',' << s.std_length << ',' << s.volume << '\n';
  }
  std::cerr << "track: " << lines.size() << " streamlines -> " << o.out << "\n";
  return 0;
}

int run_compare(const CompareOpts& o) {
  VolumeHeader grid;
  bool have_grid = false;
  if (!o.grid.empty()) {
    grid = read_volume(o.grid).header();
    grid.channels = 1;
    grid.domain = Domain::scalar;
    have_grid = true;
  }
  for (const auto* p : {&o.a, &o.b}) {
    if (!have_grid && !is_streamline_file(*p)) {
      grid = read_volume(*p).header();
      have_grid = true;
    }
  }
  if (!have_grid) fail(ErrorKind::invalid_argument, "bundle-compare: --grid is required for two tractograms");

  std::cout << "bundle,count,mean_length,std_length,volume\n";
  const auto as_mask = [&](const std::string& p, const char* name) {
    if (!is_streamline_file(p)) {
      const Mask m = load_mask(p);
      std::size_t n = 0;
      for (auto b : m.data()) n += b;
      std::cout << name << ",,,," << n << '\n';
      return m;
    }
    const auto lines = read_streamlines(p);
    const TractogramStats s = tractogram_stats(lines, grid);
    std::cout << name << ',' << s.count << ',' << s.mean_length << ',' << s.std_length << ',' << s.volume << '\n';
    return rasterize(lines, grid);
  };
  const Mask a = as_mask(o.a, "a");
  const Mask b = as_mask(o.b, "b");
  const double d = dice(a, b), ol = overlap(a, b);
  const double orr = overreach(a, b, o.common ? OverreachVariant::common : OverreachVariant::as_written);
  std::cout << "metric,value\ndice," << d << "\noverlap," << ol << "\noverreach," << orr << '\n';
  std::cerr << "bundle-compare: Dice " << d << ", OL " << ol << ", OR " << orr << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Manifold-aware diffusion MRI synthesis and tractography toolkit"};
  app.require_subcommand(1);
  int threads = 0;
  app.add_option("--threads", threads, "worker threads (default: MANIFOLD_DWI_THREADS or all cores)");

  // phantom gen
  PhantomOpts phantom;
  auto* ph_cmd = app.add_subcommand("phantom", "synthetic phantoms");
  ph_cmd->require_subcommand(1);
  auto* ph_gen = ph_cmd->add_subcommand("gen", "generate a phantom (T1, tensor, WM mask, optional ODF)");
  std::string ph_config;
  ph_gen->add_option("--config", ph_config, "key=value configuration file (flags win)");
  add_phantom_options(ph_gen, phantom);
  ph_gen->add_option("--out", phantom.out, "output directory")->capture_default_str();

  std::string audit_in;
  auto* audit = app.add_subcommand("audit", "count voxels off the SPD / ODF manifold");
  audit->add_option("--in", audit_in, "volume (.nii)")->required();

  MapOpts map;
  auto* map_cmd = app.add_subcommand("map", "scalar maps and slices");
  map_cmd->add_option("kind", map.kind, "fa | gfa | color-fa | geodesic | cosine")
      ->required()
      ->check(CLI::IsMember({"fa", "gfa", "color-fa", "geodesic", "cosine"}));
  map_cmd->add_option("--in", map.in, "diffusion volume")->required();
  map_cmd->add_option("--ref", map.ref, "reference volume (geodesic, cosine)");
  map_cmd->add_option("--out", map.out, "output .nii (.ppm for color-fa)")->required();
  map_cmd->add_option("--pgm", map.pgm, "also write a PGM slice");
  map_cmd->add_option("--axis", map.axis, "slice axis 0/1/2")->capture_default_str();
  map_cmd->add_option("--slice", map.slice, "slice index (default: middle)");
  map_cmd->add_option("--threshold", map.threshold, "reference FA/GFA threshold (cosine)")->capture_default_str();

  std::string up_in, up_out;
  double factor = 2.0;
  auto* up = app.add_subcommand("upsample", "log-domain trilinear upsampling");
  up->add_option("--in", up_in)->required();
  up->add_option("--factor", factor)->capture_default_str();
  up->add_option("--out", up_out)->required();

  int trials = 100;
  std::uint64_t gc_seed = 1;
  auto* gc = app.add_subcommand("gradcheck", "finite-difference check of the log/exp backward passes");
  gc->add_option("--trials", trials)->capture_default_str();
  gc->add_option("--seed", gc_seed)->capture_default_str();

  TrainOpts train;
  auto* tr = app.add_subcommand("train-toy", "train the toy synthesis networks on a phantom");
  std::string tr_config;
  tr->add_option("--config", tr_config, "key=value configuration file (flags win)");
  add_train_options(tr, train);

  TrackOpts trk;
  auto* tk = app.add_subcommand("track", "deterministic streamline tractography");
  std::string tk_config;
  tk->add_option("--config", tk_config, "key=value configuration file (flags win)");
  tk->add_option("--field", trk.field, "tensor or ODF volume")->required();
  tk->add_option("--mask", trk.mask, "stopping / seeding mask")->required();
  tk->add_option("--step", trk.params.step, "step (mm)")->capture_default_str();
  tk->add_option("--angle", trk.params.max_angle, "max angle (degrees)")->capture_default_str();
  tk->add_option("--seeds-per-voxel", trk.params.seeds_per_voxel)->capture_default_str();
  tk->add_option("--min-len", trk.params.min_length)->capture_default_str();
  tk->add_option("--max-len", trk.params.max_length)->capture_default_str();
  tk->add_option("--seed", trk.seed)->capture_default_str();
  tk->add_option("--out", trk.out, "streamline file")->required();

  CompareOpts cmp;
  auto* bc = app.add_subcommand("bundle-compare", "Dice / overlap / overreach between bundles");
  bc->add_option("--a", cmp.a, "reference bundle: mask (.nii) or streamlines")->required();
  bc->add_option("--b", cmp.b, "compared bundle: mask (.nii) or streamlines")->required();
  bc->add_option("--grid", cmp.grid, "volume defining the voxel grid");
  bc->add_flag("--common-overreach", cmp.common, "use (|B| - |B n A|) / |A|");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::string msg = e.what();
    std::replace(msg.begin(), msg.end(), '\n', ' ');
    std::cerr << "error: invalid_argument: " << msg << "\n";
    return 2;
  }

  try {
    set_default_threads(resolve_threads(threads));
    if (*ph_gen) apply_config(ph_gen, ph_config);
    if (*tr) apply_config(tr, tr_config);
    if (*tk) apply_config(tk, tk_config);
    if (*ph_gen) return run_phantom(phantom);
    if (*audit) return run_audit(audit_in);
    if (*map_cmd) return run_map(map);
    if (*up) return run_upsample(up_in, factor, up_out);
    if (*gc) return run_gradcheck(trials, gc_seed);
    if (*tr) return run_train(train);
    if (*tk) return run_track(trk);
    if (*bc) return run_compare(cmp);
  } catch (const Error& e) {
    std::string msg = e.what();
    std::replace(msg.begin(), msg.end(), '\n', ' ');
    std::cerr << "error: " << to_string(e.kind()) << ": " << msg << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: internal: " << e.what() << "\n";
    return 3;
  }
  return 0;
}
