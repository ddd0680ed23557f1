#include "mdwi/synth.hpp"

#include <cmath>
#include <limits>
#include <ostream>
#include <random>
#include <sstream>

#include "mdwi/parallel.hpp"
#include "mdwi/spectral_grad.hpp"
#include "mdwi/volume_ops.hpp"

namespace mdwi {

const char* to_string(Geometry g) {
  switch (g) {
    case Geometry::straight: return "straight";
    case Geometry::arc: return "arc";
    case Geometry::crossing: return "crossing";
  }
  return "unknown";
}

Geometry geometry_from_string(const std::string& s) {
  if (s == "straight") return Geometry::straight;
  if (s == "arc") return Geometry::arc;
  if (s == "crossing") return Geometry::crossing;
  fail(ErrorKind::invalid_argument, "unknown geometry '" + s + "'");
}

namespace {

constexpr double kEdge = 0.75;  // membership ramp width, mm

double membership(double signed_depth) { return 1.0 / (1.0 + std::exp(-signed_depth / kEdge)); }

Mat3d oriented(const Eigen::Vector3d& eigenvalues, const Eigen::Vector3d& axis) {
  const Eigen::Vector3d a = axis.normalized();
  const Mat3d aat = a * a.transpose();
  return eigenvalues(1) * (Mat3d::Identity() - aat) + eigenvalues(0) * aat;
}

Mat3d log_of(const Eigen::Vector3d& eigenvalues, const Eigen::Vector3d& axis) {
  Eigen::Vector3d l;
  for (int i = 0; i < 3; ++i) l(i) = std::log(eigenvalues(i));
  return oriented(l, axis);
}

struct Fibre {
  double weight = 0.0;
  Eigen::Vector3d axis = Eigen::Vector3d::UnitZ();
  bool in_mask = false;
};

// Up to two fibre populations at voxel centre p.
std::array<Fibre, 2> fibres_at(const PhantomSpec& s, const Eigen::Vector3d& p) {
  std::array<Fibre, 2> f{};
  const Eigen::Vector3d c((s.dims[0] - 1) / 2.0, (s.dims[1] - 1) / 2.0, (s.dims[2] - 1) / 2.0);
  const double r0 = s.bundle_radius;
  switch (s.geometry) {
    case Geometry::straight: {
      const double r = std::hypot(p.x() - c.x(), p.y() - c.y());
      double w = membership(r0 - r);
      bool in = r < r0;
      if (s.length > 0.0) {
        const double half = s.length / 2.0;
        const double dz = std::abs(p.z() - c.z());
        w *= membership(half - dz);
        in = in && dz < half;
      }
      f[0] = {w, Eigen::Vector3d::UnitZ(), in};
      break;
    }
    case Geometry::arc: {
      const double zc = std::min(8.0, c.z());
      const double dx = p.x() - c.x();
      const double dz = p.z() - zc;
      const double rho = std::hypot(dx, dz);
      const double d = std::hypot(rho - s.arc_radius, p.y() - c.y());
      const double w = membership(r0 - d) * membership(dz + 0.5);
      Eigen::Vector3d t = rho > 0 ? Eigen::Vector3d(-dz / rho, 0.0, dx / rho) : Eigen::Vector3d::UnitZ();
      f[0] = {w, t, d < r0 && dz >= 0.0};
      break;
    }
    case Geometry::crossing: {
      const double rx = std::hypot(p.y() - c.y(), p.z() - c.z());
      const double rz = std::hypot(p.x() - c.x(), p.y() - c.y());
      f[0] = {membership(r0 - rx), Eigen::Vector3d::UnitX(), rx < r0};
      f[1] = {membership(r0 - rz), Eigen::Vector3d::UnitZ(), rz < r0};
      const double sum = f[0].weight + f[1].weight;
      if (sum > 1.0) {
        f[0].weight /= sum;
        f[1].weight /= sum;
      }
      break;
    }
  }
  for (auto& fi : f)
    if (fi.weight < 1e-6) fi.weight = 0.0;
  return f;
}

}  // namespace

Phantom phantom_gen(const PhantomSpec& spec) {
  for (int d : spec.dims)
    if (d < 4) fail(ErrorKind::invalid_argument, "phantom_gen: dims must be >= 4");
  if (!(spec.bundle_radius > 0.0) || !(spec.noise >= 0.0) || !(spec.length >= 0.0) || !(spec.arc_radius > 0.0))
    fail(ErrorKind::invalid_argument, "phantom_gen: invalid spec");

  Phantom ph;
  ph.spec = spec;
  ph.t1 = VolumeD(VolumeHeader::make(spec.dims, 1, Domain::scalar));
  ph.tensor = VolumeD(VolumeHeader::make(spec.dims, 6, Domain::tensor));
  ph.wm_mask = Mask(VolumeHeader::make(spec.dims, 1, Domain::scalar));
  const ShBasis& basis = default_basis();
  if (spec.with_odf) ph.odf = VolumeD(VolumeHeader::make(spec.dims, basis.size(), Domain::odf));

  const Mat3d background = oriented(kBackgroundEigenvalues, Eigen::Vector3d::UnitX());
  const Mat3d log_background = log_of(kBackgroundEigenvalues, Eigen::Vector3d::UnitX());
  Eigen::VectorXd p_background, c_background;
  if (spec.with_odf) {
    const Eigen::VectorXd psi = tensor_odf_sqrt(background, basis.grid());
    p_background = psi.cwiseAbs2();
    c_background = fit_sh(psi, basis);
  }

  const auto& dims = spec.dims;
  const std::size_t n = ph.t1.voxels();
  parallel_for(static_cast<std::size_t>(dims[2]), [&](std::size_t zi) {
    const int z = static_cast<int>(zi);
    for (int y = 0; y < dims[1]; ++y) {
      for (int x = 0; x < dims[0]; ++x) {
        const std::size_t v = ph.t1.index(x, y, z);
        const auto f = fibres_at(spec, Eigen::Vector3d(x, y, z));
        const double wb = 1.0 - f[0].weight - f[1].weight;
        Mat3d log_d = wb * log_background;
        for (const auto& fi : f)
          if (fi.weight > 0.0) log_d += fi.weight * log_of(kFibreEigenvalues, fi.axis);
        ph.tensor.set_matrix(v, exp_id(log_d));
        ph.wm_mask.at(v, 0) = (f[0].in_mask || f[1].in_mask) ? 1 : 0;
        ph.t1.at(v, 0) = 0.4 + 0.4 * std::min(1.0, f[0].weight + f[1].weight);
        if (!spec.with_odf) continue;
        if (f[0].weight == 0.0 && f[1].weight == 0.0) {
          ph.odf.set_vector(v, c_background);
        } else if (spec.geometry == Geometry::crossing) {
          // Population mixture of the diffusion ODFs.
          Eigen::VectorXd p = wb * p_background;
          for (const auto& fi : f)
            if (fi.weight > 0.0)
              p += fi.weight * tensor_odf_sqrt(oriented(kFibreEigenvalues, fi.axis), basis.grid()).cwiseAbs2();
          ph.odf.set_vector(v, fit_sh(p.cwiseSqrt(), basis));
        } else {
          ph.odf.set_vector(v, fit_sh(tensor_odf_sqrt(exp_id(log_d), basis.grid()), basis));
        }
      }
    }
  });

  std::mt19937_64 rng(spec.seed);
  std::normal_distribution<double> noise(0.0, 1.0);
  for (std::size_t v = 0; v < n; ++v) ph.t1.at(v, 0) += spec.noise * noise(rng);

  std::ostringstream desc;
  desc << to_string(spec.geometry) << " " << dims[0] << "x" << dims[1] << "x" << dims[2] << " radius "
       << spec.bundle_radius;
  if (spec.geometry == Geometry::arc) desc << " arc_radius " << spec.arc_radius;
  if (spec.geometry == Geometry::straight && spec.length > 0.0) desc << " length " << spec.length;
  desc << " seed " << spec.seed;
  ph.description = desc.str();
  return ph;
}

void TrainConfig::validate() const {
  weights.validate();
  if (!(learning_rate > 0.0) || !(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0))
    fail(ErrorKind::invalid_argument, "TrainConfig: invalid optimizer settings");
  if (batch_size < 1 || epochs < 0 || steps_per_epoch < 1 || width < 1)
    fail(ErrorKind::invalid_argument, "TrainConfig: invalid loop settings");
  if (patch < 8 || patch % 8) fail(ErrorKind::invalid_argument, "TrainConfig: patch must be a multiple of 8");
  if (!(tangent_bound > 0.0)) fail(ErrorKind::invalid_argument, "TrainConfig: tangent_bound must be positive");
  if (odf && euclidean_bypass) fail(ErrorKind::invalid_argument, "TrainConfig: the bypass ablation is tensor-only");
}

namespace {

using nn::Tensor;

constexpr double kOdfTangentBound = 0.4;

nn::GeneratorSpec g_y_spec(const TrainConfig& cfg, int channels) {
  nn::GeneratorSpec s;
  s.in_channels = 1;
  s.out_channels = channels;
  s.width = cfg.width;
  s.head = cfg.odf ? nn::Head::tanh_tangent : nn::Head::hardtanh;
  s.bound = cfg.odf ? kOdfTangentBound : cfg.tangent_bound;
  return s;
}

nn::GeneratorSpec g_x_spec(const TrainConfig& cfg, int channels) {
  nn::GeneratorSpec s;
  s.in_channels = channels;
  s.out_channels = 1;
  s.width = cfg.width;
  s.head = nn::Head::sigmoid;
  return s;
}

Domain log_domain(const TrainConfig& cfg) { return cfg.odf ? Domain::odf_log : Domain::tensor_log; }

/// Per-voxel manifold round trip of generator output: exp onto the manifold
/// (where it is audited), then log back to the tangent plane.
struct ManifoldWrap {
  bool odf = false;
  bool bypass = false;
  std::vector<SpectralContext<double>> exp_ctx, log_ctx;
  Tensor raw;
  std::vector<Eigen::VectorXd> on_manifold;

  /// Returns the tangent-domain tensor and adds audit failures to `invalid`.
  Tensor forward(const Tensor& s, std::size_t& invalid) {
    raw = s;
    if (bypass) {
      // The raw output is taken as the tensor itself.
      std::size_t bad = 0;
      for (Eigen::Index v = 0; v < s.voxels(); ++v) {
        const Sym6d c = s.data.col(v);
        if (!c.allFinite() || !is_spd(unpack_sym(c))) ++bad;
      }
      invalid += bad;
      return s;
    }
    const auto n = static_cast<std::size_t>(s.voxels());
    Tensor out(s.channels(), s.dims);
    std::vector<std::uint8_t> bad(n, 0);
    if (odf) {
      on_manifold.assign(n, Eigen::VectorXd());
      parallel_for(n, [&](std::size_t v) {
        const auto i = static_cast<Eigen::Index>(v);
        const Eigen::VectorXd c = exp_u(Eigen::VectorXd(s.data.col(i)));
        on_manifold[v] = c;
        if (!c.allFinite() || std::abs(c.norm() - 1.0) > 1e-6 || !(c(0) > 0.0)) {
          bad[v] = 1;
          out.data.col(i) = s.data.col(i);
          return;
        }
        out.data.col(i) = log_u(c);
      });
    } else {
      exp_ctx.assign(n, {});
      log_ctx.assign(n, {});
      parallel_for(n, [&](std::size_t v) {
        const auto i = static_cast<Eigen::Index>(v);
        const Mat3d m = unpack_sym(Sym6d(s.data.col(i)));
        Mat3d spd, back;
        exp_ctx[v] = spectral_forward(MapTag::exp, m, spd);
        if (!spd.allFinite() || !is_spd(spd)) {
          bad[v] = 1;
          out.data.col(i) = s.data.col(i);
          return;
        }
        log_ctx[v] = spectral_forward(MapTag::log, spd, back);
        out.data.col(i) = pack_sym(back);
      });
    }
    for (auto b : bad) invalid += b;
    return out;
  }

  Tensor backward(const Tensor& grad) const {
    if (bypass) return grad;
    const auto n = static_cast<std::size_t>(grad.voxels());
    Tensor out(grad.channels(), grad.dims);
    if (odf) {
      parallel_for(n, [&](std::size_t v) {
        const auto i = static_cast<Eigen::Index>(v);
        const Eigen::VectorXd g_c = log_u_backward<double>(on_manifold[v], grad.data.col(i));
        out.data.col(i) = exp_u_backward<double>(raw.data.col(i), g_c);
      });
    } else {
      parallel_for(n, [&](std::size_t v) {
        const auto i = static_cast<Eigen::Index>(v);
        const Mat3d g_l = unpack_sym_gradient(Sym6d(grad.data.col(i)));
        const Mat3d g_spd = log_id_backward(log_ctx[v], g_l);
        out.data.col(i) = pack_sym_gradient(exp_id_backward(exp_ctx[v], g_spd));
      });
    }
    return out;
  }
};

VolumeD as_volume(const Tensor& t, Domain d) {
  return nn::to_volume(t, VolumeHeader::make(t.dims, t.channels(), d), d);
}

VolumeD crop(const VolumeD& v, std::array<int, 3> origin, int size) {
  VolumeD out(VolumeHeader::make({size, size, size}, v.channels(), v.domain()));
  for (int c = 0; c < v.channels(); ++c)
    for (int z = 0; z < size; ++z)
      for (int y = 0; y < size; ++y)
        for (int x = 0; x < size; ++x) out.at(x, y, z, c) = v.at(origin[0] + x, origin[1] + y, origin[2] + z, c);
  return out;
}

struct Subject {
  VolumeD t1;
  VolumeD y_log;  // HR tangent-domain diffusion
  VolumeD y_lr;   // pooled by 2
};

Subject prepare(const Phantom& ph, const TrainConfig& cfg) {
  if (cfg.odf && ph.odf.voxels() == 0) fail(ErrorKind::invalid_argument, "train_toy: phantom has no ODF field");
  for (int d : ph.t1.dims())
    if (d % 2 || d < cfg.patch) fail(ErrorKind::shape_mismatch, "train_toy: phantom dims must be even and >= patch");
  Subject s;
  s.t1 = ph.t1;
  s.y_log = cfg.odf ? log_odf_volume(ph.odf) : log_tensor_volume(ph.tensor);
  s.y_lr = downsample_avg(s.y_log, 2);
  return s;
}

struct Sample {
  VolumeD x;     // HR T1 patch
  VolumeD y;     // LR tangent patch
  VolumeD y_up;  // y upsampled to the HR patch grid
};

Sample draw(const Subject& s, const TrainConfig& cfg, std::mt19937_64& rng) {
  std::array<int, 3> o{};
  for (int a = 0; a < 3; ++a) {
    std::uniform_int_distribution<int> pick(0, (s.t1.dims()[a] - cfg.patch) / 2);
    o[a] = 2 * pick(rng);
  }
  Sample out;
  out.x = crop(s.t1, o, cfg.patch);
  out.y = crop(s.y_lr, {o[0] / 2, o[1] / 2, o[2] / 2}, cfg.patch / 2);
  out.y_up = upsample_log_trilinear(out.y, {cfg.patch, cfg.patch, cfg.patch});
  return out;
}

}  // namespace

VolumeD synthesize(const Synthesizer& s, const VolumeD& t1) {
  if (t1.channels() != 1) fail(ErrorKind::invalid_argument, "synthesize: scalar T1 volume required");
  const int p = s.cfg.patch;
  PatchSet set = extract_patches(t1, p, p / 2);
  const Domain d = s.cfg.euclidean_bypass ? Domain::tensor : log_domain(s.cfg);
  const int channels = s.g_y.spec().out_channels;
  for (auto& patch : set.patches) {
    ManifoldWrap wrap{s.cfg.odf, s.cfg.euclidean_bypass, {}, {}, {}, {}};
    std::size_t ignored = 0;
    const Tensor out = wrap.forward(s.g_y.forward(nn::from_volume(patch.data)), ignored);
    patch.data = nn::to_volume(out, VolumeHeader::make(out.dims, channels, d), d);
  }
  set.source.channels = channels;
  set.source.domain = d;
  VolumeD merged = reassemble(set);
  merged.header() = t1.header();
  merged.header().channels = channels;
  merged.header().domain = d;
  return merged;
}

EvalMetrics evaluate_field(const VolumeD& generated, const Phantom& phantom) {
  const bool odf = generated.domain() == Domain::odf || generated.domain() == Domain::odf_log;
  const VolumeD& ref = odf ? phantom.odf : phantom.tensor;
  if (generated.dims() != ref.dims())
    fail(ErrorKind::shape_mismatch, "evaluate: grid mismatch");
  const auto guarded = [](auto&& f) {
    try {
      return f();
    } catch (const Error& e) {
      if (e.kind() == ErrorKind::invalid_argument) return std::numeric_limits<double>::quiet_NaN();
      throw;
    }
  };
  EvalMetrics m;
  m.fa_mse = guarded([&] { return fa_mse(generated, ref, 0.0); });
  m.fa_mse_05 = guarded([&] { return fa_mse(generated, ref, 0.5); });
  m.cosine_02 = guarded([&] { return field_similarity(generated, ref, 0.2).mean; });
  m.cosine_05 = guarded([&] { return field_similarity(generated, ref, 0.5).mean; });
  m.geodesic = guarded([&] { return mean_geodesic(generated, ref, 0.0); });
  m.invalid = audit_validity(generated).invalid;
  return m;
}

EvalMetrics evaluate(const Synthesizer& s, const Phantom& phantom) {
  return evaluate_field(synthesize(s, phantom.t1), phantom);
}

TrainResult init_models(const std::vector<Phantom>& phantoms, const TrainConfig& cfg) {
  cfg.validate();
  if (phantoms.empty()) fail(ErrorKind::invalid_argument, "train_toy: no phantoms");
  const int channels = cfg.odf ? default_basis().size() : 6;
  TrainResult r{nn::Generator(g_y_spec(cfg, channels), cfg.seed * 4 + 1),
                nn::Generator(g_x_spec(cfg, channels), cfg.seed * 4 + 2), {}, 0};

  // Start both generators at the data mean.
  Eigen::VectorXd mean_y = Eigen::VectorXd::Zero(channels);
  double mean_x = 0.0;
  for (const auto& ph : phantoms) {
    const VolumeD y = cfg.odf ? log_odf_volume(ph.odf) : log_tensor_volume(ph.tensor);
    for (int c = 0; c < channels; ++c) {
      double sum = 0.0;
      for (std::size_t v = 0; v < y.voxels(); ++v) sum += y.at(v, c);
      mean_y(c) += sum / static_cast<double>(y.voxels() * phantoms.size());
    }
    double sum = 0.0;
    for (double t : ph.t1.data()) sum += t;
    mean_x += sum / static_cast<double>(ph.t1.voxels() * phantoms.size());
  }
  Eigen::VectorXd bias_y = mean_y;
  if (cfg.odf) {
    bias_y(0) = 0.0;
    for (int c = 1; c < channels; ++c)
      bias_y(c) = std::atanh(std::clamp(mean_y(c) / kOdfTangentBound, -0.99, 0.99));
  } else if (!cfg.euclidean_bypass) {
    bias_y = mean_y.cwiseMax(-cfg.tangent_bound).cwiseMin(cfg.tangent_bound);
  }
  r.g_y.set_head_bias(bias_y);
  const double px = std::clamp(mean_x, 0.01, 0.99);
  r.g_x.set_head_bias(Eigen::VectorXd::Constant(1, std::log(px / (1.0 - px))));
  return r;
}

namespace {

void check_finite(const Eigen::VectorXd& g, const char* what) {
  if (!g.allFinite()) fail(ErrorKind::divergence, std::string("train_toy: non-finite ") + what);
}

}  // namespace

TrainResult train_toy(const std::vector<Phantom>& phantoms, const TrainConfig& cfg) {
  TrainResult r = init_models(phantoms, cfg);
  const int channels = r.g_y.spec().out_channels;
  const Domain ld = log_domain(cfg);

  std::vector<Subject> subjects;
  for (const auto& ph : phantoms) subjects.push_back(prepare(ph, cfg));

  nn::Critic d_x(1, cfg.width, cfg.seed * 4 + 3);
  nn::Critic d_y(channels, cfg.width, cfg.seed * 4 + 4);
  auto make_adam = [&] { return nn::Adam{cfg.learning_rate, cfg.beta1, cfg.beta2, 1e-8, {}, {}, 0}; };
  nn::Adam opt_gy = make_adam(), opt_gx = make_adam(), opt_dx = make_adam(), opt_dy = make_adam();

  const Synthesizer syn{r.g_y, cfg};
  TraceRow row0;
  row0.metrics = evaluate(syn, phantoms.front());
  r.trace.push_back(row0);

  std::mt19937_64 rng(cfg.seed);
  std::uniform_int_distribution<std::size_t> pick_subject(0, subjects.size() - 1);
  const auto b = static_cast<std::size_t>(cfg.batch_size);
  const double inv_b = 1.0 / static_cast<double>(b);
  long step = 0;

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    ObjectiveParts sum_parts;
    std::size_t epoch_invalid = 0;
    for (int it = 0; it < cfg.steps_per_epoch; ++it, ++step) {
      Eigen::VectorXd g_gy = Eigen::VectorXd::Zero(r.g_y.params().size());
      Eigen::VectorXd g_gx = Eigen::VectorXd::Zero(r.g_x.params().size());
      Eigen::VectorXd g_dx = Eigen::VectorXd::Zero(d_x.params().size());
      Eigen::VectorXd g_dy = Eigen::VectorXd::Zero(d_y.params().size());
      Eigen::VectorXd scratch_dx = g_dx, scratch_dy = g_dy;

      struct Element {
        Sample paired, unpaired;
        nn::GeneratorTape t_s, t_xrec, t_xfake, t_yrec, t_prior;
        ManifoldWrap w_s, w_yrec;
        Tensor s_log, y_rec_hr, x_fake, f_s;
        nn::CriticTape c_dy, c_dx;
      };
      std::vector<Element> el(b);
      Eigen::VectorXd fake_y(static_cast<Eigen::Index>(b)), fake_x(static_cast<Eigen::Index>(b));
      ObjectiveParts parts;

      for (std::size_t k = 0; k < b; ++k) {
        Element& e = el[k];
        const Subject& subj = subjects[pick_subject(rng)];
        e.paired = draw(subj, cfg, rng);
        e.unpaired = draw(subjects[pick_subject(rng)], cfg, rng);
        e.w_s = {cfg.odf, cfg.euclidean_bypass, {}, {}, {}, {}};
        e.w_yrec = e.w_s;

        const Tensor x = nn::from_volume(e.paired.x);
        e.s_log = e.w_s.forward(r.g_y.forward(x, &e.t_s), epoch_invalid);
        e.f_s = nn::avg_pool2(e.s_log);
        fake_y(static_cast<Eigen::Index>(k)) = d_y.forward(e.f_s, &e.c_dy);

        e.x_fake = r.g_x.forward(nn::from_volume(e.unpaired.y_up), &e.t_xfake);
        fake_x(static_cast<Eigen::Index>(k)) = d_x.forward(e.x_fake, &e.c_dx);
        e.y_rec_hr = e.w_yrec.forward(r.g_y.forward(e.x_fake, &e.t_yrec), epoch_invalid);
      }

      // Generator step.
      Eigen::VectorXd d_fake_y, d_fake_x;
      parts.g_adv_y = lsgan_g_loss(fake_y, &d_fake_y);
      parts.g_adv_x = lsgan_g_loss(fake_x, &d_fake_x);
      for (std::size_t k = 0; k < b; ++k) {
        Element& e = el[k];
        const auto ki = static_cast<Eigen::Index>(k);
        const VolumeD s_vol = as_volume(e.s_log, ld);
        const Tensor x_rec = r.g_x.forward(e.s_log, &e.t_xrec);
        const VolumeD y_rec_hr = as_volume(e.y_rec_hr, ld);
        const Tensor y_rec_lr_t = nn::avg_pool2(e.y_rec_hr);
        const VolumeD y_rec_lr = as_volume(y_rec_lr_t, ld);

        CycleGradients cg;
        parts.cycle += inv_b * cycle_loss(e.paired.x, as_volume(x_rec, Domain::scalar), e.unpaired.y_up, y_rec_hr,
                                          e.unpaired.y, y_rec_lr, cfg.weights, anisotropy_weight(e.unpaired.y_up),
                                          anisotropy_weight(e.unpaired.y), &cg);
        const Tensor gen_x = r.g_x.forward(nn::from_volume(e.paired.y_up), &e.t_prior);
        PriorGradients pg;
        parts.prior += inv_b * prior_loss(s_vol, e.paired.y_up, as_volume(gen_x, Domain::scalar), e.paired.x,
                                          cfg.weights, anisotropy_weight(e.paired.y_up), &pg);

        // d/d s_log: prior, adversarial through D_Y(F(.)), cycle through G_X.
        Tensor g_s = nn::from_volume(pg.gen_y);
        g_s.data *= inv_b;
        const Tensor g_fs = d_y.backward(e.c_dy, d_fake_y(ki), scratch_dy);
        g_s.data += nn::avg_pool2_backward(g_fs, e.s_log.dims).data;
        Tensor g_xrec = nn::from_volume(cg.x_rec);
        g_xrec.data *= inv_b;
        g_s.data += r.g_x.backward(e.t_xrec, g_xrec, g_gx).data;
        r.g_y.backward(e.t_s, e.w_s.backward(g_s), g_gy);

        Tensor g_genx = nn::from_volume(pg.gen_x);
        g_genx.data *= inv_b;
        r.g_x.backward(e.t_prior, g_genx, g_gx);

        // Backward cycle: y_rec -> G_Y -> x_fake -> G_X.
        Tensor g_yrec = nn::from_volume(cg.y_rec_hr);
        Tensor g_yrec_lr = nn::from_volume(cg.y_rec_lr);
        g_yrec.data += nn::avg_pool2_backward(g_yrec_lr, e.y_rec_hr.dims).data;
        g_yrec.data *= inv_b;
        Tensor g_xfake = r.g_y.backward(e.t_yrec, e.w_yrec.backward(g_yrec), g_gy);
        g_xfake.data += d_x.backward(e.c_dx, d_fake_x(ki), scratch_dx).data;
        r.g_x.backward(e.t_xfake, g_xfake, g_gx);
      }

      // Critic step on detached fakes.
      Eigen::VectorXd real_y(static_cast<Eigen::Index>(b)), real_x(static_cast<Eigen::Index>(b));
      std::vector<nn::CriticTape> c_ry(b), c_rx(b);
      for (std::size_t k = 0; k < b; ++k) {
        const auto ki = static_cast<Eigen::Index>(k);
        real_y(ki) = d_y.forward(nn::from_volume(el[k].unpaired.y), &c_ry[k]);
        real_x(ki) = d_x.forward(nn::from_volume(el[k].paired.x), &c_rx[k]);
      }
      Eigen::VectorXd dr, df;
      parts.d_y = lsgan_d_loss(real_y, fake_y, &dr, &df);
      for (std::size_t k = 0; k < b; ++k) {
        const auto ki = static_cast<Eigen::Index>(k);
        d_y.backward(c_ry[k], dr(ki), g_dy);
        d_y.backward(el[k].c_dy, df(ki), g_dy);
      }
      parts.d_x = lsgan_d_loss(real_x, fake_x, &dr, &df);
      for (std::size_t k = 0; k < b; ++k) {
        const auto ki = static_cast<Eigen::Index>(k);
        d_x.backward(c_rx[k], dr(ki), g_dx);
        d_x.backward(el[k].c_dx, df(ki), g_dx);
      }

      const ObjectiveBreakdown ob = full_objective(parts);
      if (!std::isfinite(ob.generator) || !std::isfinite(ob.discriminator))
        fail(ErrorKind::divergence, "train_toy: non-finite loss at step " + std::to_string(step));
      check_finite(g_gy, "G_Y gradient");
      check_finite(g_gx, "G_X gradient");
      opt_gy.step(r.g_y.params(), g_gy);
      opt_gx.step(r.g_x.params(), g_gx);
      opt_dy.step(d_y.params(), g_dy);
      opt_dx.step(d_x.params(), g_dx);

      sum_parts.g_adv_x += parts.g_adv_x;
      sum_parts.g_adv_y += parts.g_adv_y;
      sum_parts.cycle += parts.cycle;
      sum_parts.prior += parts.prior;
      sum_parts.d_x += parts.d_x;
      sum_parts.d_y += parts.d_y;
    }

    const double n = cfg.steps_per_epoch;
    TraceRow row;
    row.epoch = epoch;
    row.step = step;
    row.parts = {sum_parts.g_adv_x / n, sum_parts.g_adv_y / n, sum_parts.cycle / n,
                 sum_parts.prior / n,   sum_parts.d_x / n,     sum_parts.d_y / n};
    const ObjectiveBreakdown ob = full_objective(row.parts);
    row.generator = ob.generator;
    row.signed_total = ob.signed_total;
    row.metrics = evaluate(syn, phantoms.front());
    row.step_invalid = epoch_invalid;
    r.total_step_invalid += epoch_invalid;
    r.trace.push_back(row);
  }
  return r;
}

void write_trace_csv(std::ostream& out, const std::vector<TraceRow>& trace) {
  out << "epoch,step,g_adv_x,g_adv_y,cycle,prior,d_x,d_y,generator,signed_total,fa_mse,fa_mse_fa05,"
         "cosine_fa02,cosine_fa05,geodesic,eval_invalid,step_invalid\n";
  const auto old = out.precision(17);
  for (const auto& r : trace) {
    out << r.epoch << ',' << r.step << ',' << r.parts.g_adv_x << ',' << r.parts.g_adv_y << ',' << r.parts.cycle << ','
        << r.parts.prior << ',' << r.parts.d_x << ',' << r.parts.d_y << ',' << r.generator << ',' << r.signed_total
        << ',' << r.metrics.fa_mse << ',' << r.metrics.fa_mse_05 << ',' << r.metrics.cosine_02 << ','
        << r.metrics.cosine_05 << ',' << r.metrics.geodesic << ',' << r.metrics.invalid << ',' << r.step_invalid
        << '\n';
  }
  out.precision(old);
}

}  // namespace mdwi
