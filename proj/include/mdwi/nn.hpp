#pragma once

// Minimal 3D convolutional networks with hand-written backward passes:
// a three-level encoder-decoder generator, a patch critic and Adam.
// Activations are channels x voxels matrices (voxel index x fastest).

#include <Eigen/Dense>
#include <array>
#include <cstdint>
#include <random>
#include <vector>

#include "mdwi/volume.hpp"

namespace mdwi::nn {

struct Tensor {
  std::array<int, 3> dims{0, 0, 0};
  Eigen::MatrixXd data;  ///< channels x voxels

  Tensor() = default;
  Tensor(int channels, std::array<int, 3> d);
  int channels() const { return static_cast<int>(data.rows()); }
  Eigen::Index voxels() const { return data.cols(); }
};

Tensor from_volume(const VolumeD& v);
/// Copies `t` into a volume on `header`'s grid (channels and domain given).
VolumeD to_volume(const Tensor& t, const VolumeHeader& header, Domain domain);

/// 3x3x3 (zero padded) or 1x1x1 convolution whose weights live at `offset`
/// in a flat parameter vector: cout x (k^3 * cin) weights then cout biases.
struct Conv3d {
  int cin = 0;
  int cout = 0;
  int kernel = 3;
  std::size_t offset = 0;

  std::size_t parameter_count() const;
  Tensor forward(const Eigen::VectorXd& params, const Tensor& in, Eigen::MatrixXd* cols) const;
  /// Accumulates parameter gradients into `grad` and returns d/d input.
  Tensor backward(const Eigen::VectorXd& params, const Eigen::MatrixXd& cols, const std::array<int, 3>& dims,
                  const Tensor& grad_out, Eigen::VectorXd& grad) const;
  void init(Eigen::VectorXd& params, std::mt19937_64& rng, double gain) const;
};

inline constexpr double kLeakySlope = 0.2;

Tensor leaky_relu(const Tensor& x);
Tensor leaky_relu_backward(const Tensor& pre, const Tensor& grad_out);
/// 2x2x2 block mean; dims must be even.
Tensor avg_pool2(const Tensor& x);
Tensor avg_pool2_backward(const Tensor& grad_out, const std::array<int, 3>& in_dims);
/// Nearest-neighbour doubling.
Tensor upsample2(const Tensor& x);
Tensor upsample2_backward(const Tensor& grad_out);

enum class Head {
  hardtanh,     ///< clamp to [-bound, bound]
  tanh_tangent, ///< bound * tanh, channel 0 fixed at 0 (tangent plane at u)
  sigmoid,
};

struct GeneratorSpec {
  int in_channels = 1;
  int out_channels = 6;
  int width = 8;
  Head head = Head::hardtanh;
  double bound = 5.0;
};

/// Activations kept for one backward pass.
struct GeneratorTape {
  std::array<int, 3> dims{};
  Tensor in;
  Eigen::MatrixXd cols[6];
  Tensor pre[5];
  Tensor act[5];
  Tensor head_pre;
};

/// Encoder-decoder: conv(w) / pool / conv(2w) / pool / conv(2w) / up + skip /
/// conv(w) / up + skip / conv(w) / 1x1 head. Spatial dims must be divisible by 4.
class Generator {
 public:
  Generator() = default;
  Generator(const GeneratorSpec& spec, std::uint64_t seed);

  const GeneratorSpec& spec() const { return spec_; }
  Eigen::VectorXd& params() { return params_; }
  const Eigen::VectorXd& params() const { return params_; }
  std::size_t parameter_count() const { return static_cast<std::size_t>(params_.size()); }

  Tensor forward(const Tensor& x, GeneratorTape* tape = nullptr) const;
  /// Accumulates into `grad` (same size as params) and returns d/d input.
  Tensor backward(const GeneratorTape& tape, const Tensor& grad_out, Eigen::VectorXd& grad) const;

  /// Sets the head bias so that an all-zero feature map yields `value`
  /// (pre-activation, per output channel).
  void set_head_bias(const Eigen::VectorXd& value);

 private:
  GeneratorSpec spec_;
  Conv3d conv_[6];
  Eigen::VectorXd params_;
};

struct CriticTape {
  Tensor in;
  Eigen::MatrixXd cols[2];
  Tensor pre[2];
  Tensor act[2];
  Tensor pooled;
  Eigen::VectorXd features;
};

/// conv(w) / pool / conv(2w) / global mean / linear score.
class Critic {
 public:
  Critic() = default;
  Critic(int in_channels, int width, std::uint64_t seed);

  Eigen::VectorXd& params() { return params_; }
  const Eigen::VectorXd& params() const { return params_; }
  std::size_t parameter_count() const { return static_cast<std::size_t>(params_.size()); }

  double forward(const Tensor& x, CriticTape* tape = nullptr) const;
  /// d score / d input scaled by `grad_score`; parameter gradients accumulate.
  Tensor backward(const CriticTape& tape, double grad_score, Eigen::VectorXd& grad) const;

 private:
  Conv3d conv_[2];
  std::size_t linear_offset_ = 0;
  int features_ = 0;
  Eigen::VectorXd params_;
};

struct Adam {
  double lr = 1e-4;
  double beta1 = 0.5;
  double beta2 = 0.999;
  double eps = 1e-8;
  Eigen::VectorXd m, v;
  long step_count = 0;

  void step(Eigen::VectorXd& params, const Eigen::VectorXd& grad);
};

}  // namespace mdwi::nn
