#pragma once

// Phantom construction and the desk-scale synthesis trainer: G_Y maps a T1
// patch to log-domain diffusion, G_X maps log-domain diffusion back to T1,
// with LSGAN critics on each side and the cycle / prior losses.

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "mdwi/losses.hpp"
#include "mdwi/metrics.hpp"
#include "mdwi/nn.hpp"
#include "mdwi/volume.hpp"

namespace mdwi {

enum class Geometry { straight, arc, crossing };

const char* to_string(Geometry g);
Geometry geometry_from_string(const std::string& s);

struct PhantomSpec {
  Geometry geometry = Geometry::straight;
  std::array<int, 3> dims{64, 64, 64};
  double noise = 0.02;        ///< T1 noise standard deviation
  std::uint64_t seed = 1;
  double bundle_radius = 8.0;  ///< mm
  double arc_radius = 24.0;    ///< mm, arc geometry only
  double length = 0.0;         ///< straight bundle extent along z in mm; 0 spans the volume
  bool with_odf = false;       ///< also sample the square-root ODF field
};

struct Phantom {
  PhantomSpec spec;
  VolumeD t1;      ///< scalar, ~0.4 background, ~0.8 bundle
  VolumeD tensor;  ///< SPD, 6 channels, um^2/ms
  VolumeD odf;     ///< unit SH coefficients (empty unless with_odf)
  Mask wm_mask;    ///< bundle voxels
  std::string description;
};

/// Fibre and background eigenvalues (um^2/ms).
inline const Eigen::Vector3d kFibreEigenvalues{1.7, 0.3, 0.3};
inline const Eigen::Vector3d kBackgroundEigenvalues{0.9, 0.7, 0.7};

Phantom phantom_gen(const PhantomSpec& spec);

struct TrainConfig {
  double learning_rate = 1e-4;
  double beta1 = 0.5;
  double beta2 = 0.999;
  int batch_size = 1;
  int epochs = 10;
  int steps_per_epoch = 300;
  std::uint64_t seed = 1;
  LossWeights weights;
  int patch = 16;  ///< HR patch edge, divisible by 8
  int width = 8;   ///< generator base channel count
  double tangent_bound = 5.0;
  bool odf = false;               ///< synthesize ODFs instead of tensors
  bool euclidean_bypass = false;  ///< use raw generator output as the tensor (ablation)

  void validate() const;
};

struct EvalMetrics {
  double fa_mse = 0.0;     ///< FA/GFA MSE over all valid voxels
  double fa_mse_05 = 0.0;  ///< FA/GFA MSE where reference FA >= 0.5
  double cosine_02 = 0.0;
  double cosine_05 = 0.0;
  double geodesic = 0.0;
  std::size_t invalid = 0;  ///< generated voxels failing the validity audit
};

struct TraceRow {
  int epoch = 0;
  long step = 0;
  ObjectiveParts parts;
  double generator = 0.0;
  double signed_total = 0.0;
  EvalMetrics metrics;
  std::size_t step_invalid = 0;  ///< audit failures among generated training outputs since the last row
};

struct TrainResult {
  nn::Generator g_y;
  nn::Generator g_x;
  std::vector<TraceRow> trace;
  std::size_t total_step_invalid = 0;
};

/// The pair of generators with their configuration, as used for inference.
struct Synthesizer {
  const nn::Generator& g_y;
  const TrainConfig& cfg;
};

/// G_Y over the whole T1 volume via overlapping patches averaged in the
/// tangent plane. Returns tensor-log / odf-log values (raw tensors when the
/// bypass ablation is active).
VolumeD synthesize(const Synthesizer& s, const VolumeD& t1);

/// Metrics of the synthesized field against the phantom ground truth.
EvalMetrics evaluate(const Synthesizer& s, const Phantom& phantom);
EvalMetrics evaluate_field(const VolumeD& generated, const Phantom& phantom);

/// Freshly initialized generators for `cfg` (data-dependent head bias set
/// from the phantoms).
TrainResult init_models(const std::vector<Phantom>& phantoms, const TrainConfig& cfg);

/// Alternating 1:1 generator / critic training. Row 0 of the trace holds the
/// metrics of the initial generator; one row follows every epoch.
TrainResult train_toy(const std::vector<Phantom>& phantoms, const TrainConfig& cfg);

void write_trace_csv(std::ostream& out, const std::vector<TraceRow>& trace);

}  // namespace mdwi
