#include "mdwi/nn.hpp"

#include <cmath>

#include "mdwi/common.hpp"

namespace mdwi::nn {

Tensor::Tensor(int channels, std::array<int, 3> d)
    : dims(d), data(Eigen::MatrixXd::Zero(channels, static_cast<Eigen::Index>(d[0]) * d[1] * d[2])) {}

Tensor from_volume(const VolumeD& v) {
  Tensor t(v.channels(), v.dims());
  const auto n = static_cast<Eigen::Index>(v.voxels());
  for (int c = 0; c < v.channels(); ++c)
    t.data.row(c) = Eigen::Map<const Eigen::RowVectorXd>(v.data().data() + c * n, n);
  return t;
}

VolumeD to_volume(const Tensor& t, const VolumeHeader& header, Domain domain) {
  VolumeHeader h = header;
  h.dims = t.dims;
  h.channels = t.channels();
  h.domain = domain;
  VolumeD v(h);
  const Eigen::Index n = t.voxels();
  for (int c = 0; c < t.channels(); ++c) Eigen::Map<Eigen::RowVectorXd>(v.data().data() + c * n, n) = t.data.row(c);
  return v;
}

namespace {

inline Eigen::Index voxel_index(const std::array<int, 3>& d, int x, int y, int z) {
  return x + static_cast<Eigen::Index>(d[0]) * (y + static_cast<Eigen::Index>(d[1]) * z);
}

// cols(k * cin + ci, v) = in(ci, v + offset_k), zero outside the volume.
Eigen::MatrixXd im2col3(const Tensor& in) {
  const int cin = in.channels();
  const auto& d = in.dims;
  Eigen::MatrixXd cols = Eigen::MatrixXd::Zero(27 * cin, in.voxels());
  const double* src = in.data.data();
  for (int z = 0; z < d[2]; ++z)
    for (int y = 0; y < d[1]; ++y)
      for (int x = 0; x < d[0]; ++x) {
        double* dst = cols.data() + voxel_index(d, x, y, z) * 27 * cin;
        int k = 0;
        for (int dz = -1; dz <= 1; ++dz)
          for (int dy = -1; dy <= 1; ++dy)
            for (int dx = -1; dx <= 1; ++dx, ++k) {
              const int xx = x + dx, yy = y + dy, zz = z + dz;
              if (xx < 0 || yy < 0 || zz < 0 || xx >= d[0] || yy >= d[1] || zz >= d[2]) continue;
              const double* s = src + voxel_index(d, xx, yy, zz) * cin;
              std::copy(s, s + cin, dst + k * cin);
            }
      }
  return cols;
}

Tensor col2im3(const Eigen::MatrixXd& cols, int cin, const std::array<int, 3>& d) {
  Tensor out(cin, d);
  double* dst = out.data.data();
  for (int z = 0; z < d[2]; ++z)
    for (int y = 0; y < d[1]; ++y)
      for (int x = 0; x < d[0]; ++x) {
        const double* src = cols.data() + voxel_index(d, x, y, z) * 27 * cin;
        int k = 0;
        for (int dz = -1; dz <= 1; ++dz)
          for (int dy = -1; dy <= 1; ++dy)
            for (int dx = -1; dx <= 1; ++dx, ++k) {
              const int xx = x + dx, yy = y + dy, zz = z + dz;
              if (xx < 0 || yy < 0 || zz < 0 || xx >= d[0] || yy >= d[1] || zz >= d[2]) continue;
              double* t = dst + voxel_index(d, xx, yy, zz) * cin;
              const double* s = src + k * cin;
              for (int c = 0; c < cin; ++c) t[c] += s[c];
            }
      }
  return out;
}

}  // namespace

std::size_t Conv3d::parameter_count() const {
  const int taps = kernel * kernel * kernel;
  return static_cast<std::size_t>(cout) * taps * cin + cout;
}

Tensor Conv3d::forward(const Eigen::VectorXd& params, const Tensor& in, Eigen::MatrixXd* cols) const {
  if (in.channels() != cin) fail(ErrorKind::shape_mismatch, "Conv3d: input channel mismatch");
  const int taps = kernel * kernel * kernel;
  Eigen::Map<const Eigen::MatrixXd> w(params.data() + offset, cout, taps * cin);
  Eigen::Map<const Eigen::VectorXd> b(params.data() + offset + static_cast<std::size_t>(cout) * taps * cin, cout);
  Eigen::MatrixXd local;
  Eigen::MatrixXd& c = cols ? *cols : local;
  c = kernel == 3 ? im2col3(in) : in.data;
  Tensor out;
  out.dims = in.dims;
  out.data.noalias() = w * c;
  out.data.colwise() += b;
  return out;
}

Tensor Conv3d::backward(const Eigen::VectorXd& params, const Eigen::MatrixXd& cols, const std::array<int, 3>& dims,
                        const Tensor& grad_out, Eigen::VectorXd& grad) const {
  const int taps = kernel * kernel * kernel;
  Eigen::Map<const Eigen::MatrixXd> w(params.data() + offset, cout, taps * cin);
  Eigen::Map<Eigen::MatrixXd> gw(grad.data() + offset, cout, taps * cin);
  Eigen::Map<Eigen::VectorXd> gb(grad.data() + offset + static_cast<std::size_t>(cout) * taps * cin, cout);
  gw.noalias() += grad_out.data * cols.transpose();
  gb += grad_out.data.rowwise().sum();
  Eigen::MatrixXd gcols = w.transpose() * grad_out.data;
  if (kernel == 3) return col2im3(gcols, cin, dims);
  Tensor g;
  g.dims = dims;
  g.data = std::move(gcols);
  return g;
}

void Conv3d::init(Eigen::VectorXd& params, std::mt19937_64& rng, double gain) const {
  const int taps = kernel * kernel * kernel;
  const double fan_in = static_cast<double>(taps * cin);
  const double a = gain * std::sqrt(6.0 / ((1.0 + kLeakySlope * kLeakySlope) * fan_in));
  std::uniform_real_distribution<double> u(-a, a);
  const std::size_t nw = static_cast<std::size_t>(cout) * taps * cin;
  for (std::size_t i = 0; i < nw; ++i) params(static_cast<Eigen::Index>(offset + i)) = u(rng);
  for (int i = 0; i < cout; ++i) params(static_cast<Eigen::Index>(offset + nw + i)) = 0.0;
}

Tensor leaky_relu(const Tensor& x) {
  Tensor y;
  y.dims = x.dims;
  y.data = x.data.array().max(kLeakySlope * x.data.array());
  return y;
}

Tensor leaky_relu_backward(const Tensor& pre, const Tensor& grad_out) {
  Tensor g;
  g.dims = pre.dims;
  g.data = (pre.data.array() > 0.0).select(grad_out.data.array(), kLeakySlope * grad_out.data.array());
  return g;
}

Tensor avg_pool2(const Tensor& x) {
  const auto& d = x.dims;
  if (d[0] % 2 || d[1] % 2 || d[2] % 2) fail(ErrorKind::shape_mismatch, "avg_pool2: odd dims");
  Tensor y(x.channels(), {d[0] / 2, d[1] / 2, d[2] / 2});
  for (int z = 0; z < d[2]; ++z)
    for (int yy = 0; yy < d[1]; ++yy)
      for (int xx = 0; xx < d[0]; ++xx)
        y.data.col(voxel_index(y.dims, xx / 2, yy / 2, z / 2)) += x.data.col(voxel_index(d, xx, yy, z));
  y.data *= 0.125;
  return y;
}

Tensor avg_pool2_backward(const Tensor& grad_out, const std::array<int, 3>& in_dims) {
  Tensor g(grad_out.channels(), in_dims);
  for (int z = 0; z < in_dims[2]; ++z)
    for (int y = 0; y < in_dims[1]; ++y)
      for (int x = 0; x < in_dims[0]; ++x)
        g.data.col(voxel_index(in_dims, x, y, z)) = 0.125 * grad_out.data.col(voxel_index(grad_out.dims, x / 2, y / 2, z / 2));
  return g;
}

Tensor upsample2(const Tensor& x) {
  const std::array<int, 3> d{2 * x.dims[0], 2 * x.dims[1], 2 * x.dims[2]};
  Tensor y(x.channels(), d);
  for (int z = 0; z < d[2]; ++z)
    for (int yy = 0; yy < d[1]; ++yy)
      for (int xx = 0; xx < d[0]; ++xx)
        y.data.col(voxel_index(d, xx, yy, z)) = x.data.col(voxel_index(x.dims, xx / 2, yy / 2, z / 2));
  return y;
}

Tensor upsample2_backward(const Tensor& grad_out) {
  const auto& d = grad_out.dims;
  Tensor g(grad_out.channels(), {d[0] / 2, d[1] / 2, d[2] / 2});
  for (int z = 0; z < d[2]; ++z)
    for (int y = 0; y < d[1]; ++y)
      for (int x = 0; x < d[0]; ++x)
        g.data.col(voxel_index(g.dims, x / 2, y / 2, z / 2)) += grad_out.data.col(voxel_index(d, x, y, z));
  return g;
}

namespace {

Tensor add(Tensor a, const Tensor& b) {
  a.data += b.data;
  return a;
}

Tensor apply_head(const Tensor& pre, Head head, double bound) {
  Tensor y;
  y.dims = pre.dims;
  switch (head) {
    case Head::hardtanh:
      y.data = pre.data.array().max(-bound).min(bound);
      break;
    case Head::tanh_tangent:
      y.data = bound * pre.data.array().tanh();
      y.data.row(0).setZero();
      break;
    case Head::sigmoid:
      y.data = (1.0 + (-pre.data.array()).exp()).inverse();
      break;
  }
  return y;
}

Tensor head_backward(const Tensor& pre, const Tensor& grad_out, Head head, double bound) {
  Tensor g;
  g.dims = pre.dims;
  switch (head) {
    case Head::hardtanh:
      g.data = (pre.data.array().abs() < bound).select(grad_out.data.array(), 0.0);
      break;
    case Head::tanh_tangent: {
      const Eigen::ArrayXXd t = pre.data.array().tanh();
      g.data = bound * (1.0 - t.square()) * grad_out.data.array();
      g.data.row(0).setZero();
      break;
    }
    case Head::sigmoid: {
      const Eigen::ArrayXXd s = (1.0 + (-pre.data.array()).exp()).inverse();
      g.data = s * (1.0 - s) * grad_out.data.array();
      break;
    }
  }
  return g;
}

}  // namespace

Generator::Generator(const GeneratorSpec& spec, std::uint64_t seed) : spec_(spec) {
  if (spec.in_channels < 1 || spec.out_channels < 1 || spec.width < 1 || !(spec.bound > 0.0))
    fail(ErrorKind::invalid_argument, "Generator: invalid spec");
  const int w = spec.width;
  conv_[0] = {spec.in_channels, w, 3, 0};
  conv_[1] = {w, 2 * w, 3, 0};
  conv_[2] = {2 * w, 2 * w, 3, 0};
  conv_[3] = {2 * w, w, 3, 0};
  conv_[4] = {w, w, 3, 0};
  conv_[5] = {w, spec.out_channels, 1, 0};
  std::size_t offset = 0;
  for (auto& c : conv_) {
    c.offset = offset;
    offset += c.parameter_count();
  }
  params_ = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(offset));
  std::mt19937_64 rng(seed);
  for (int i = 0; i < 5; ++i) conv_[i].init(params_, rng, 1.0);
  conv_[5].init(params_, rng, 0.1);
}

void Generator::set_head_bias(const Eigen::VectorXd& value) {
  if (value.size() != spec_.out_channels) fail(ErrorKind::shape_mismatch, "set_head_bias: channel mismatch");
  const Conv3d& h = conv_[5];
  params_.segment(static_cast<Eigen::Index>(h.offset + static_cast<std::size_t>(h.cout) * h.cin), h.cout) = value;
}

Tensor Generator::forward(const Tensor& x, GeneratorTape* tape) const {
  const auto& d = x.dims;
  if (d[0] % 4 || d[1] % 4 || d[2] % 4) fail(ErrorKind::shape_mismatch, "Generator: dims must be divisible by 4");
  GeneratorTape local;
  GeneratorTape& t = tape ? *tape : local;
  t.dims = d;
  t.in = x;
  t.pre[0] = conv_[0].forward(params_, x, &t.cols[0]);
  t.act[0] = leaky_relu(t.pre[0]);
  t.pre[1] = conv_[1].forward(params_, avg_pool2(t.act[0]), &t.cols[1]);
  t.act[1] = leaky_relu(t.pre[1]);
  t.pre[2] = conv_[2].forward(params_, avg_pool2(t.act[1]), &t.cols[2]);
  t.act[2] = leaky_relu(t.pre[2]);
  t.pre[3] = conv_[3].forward(params_, add(upsample2(t.act[2]), t.act[1]), &t.cols[3]);
  t.act[3] = leaky_relu(t.pre[3]);
  t.pre[4] = conv_[4].forward(params_, add(upsample2(t.act[3]), t.act[0]), &t.cols[4]);
  t.act[4] = leaky_relu(t.pre[4]);
  t.head_pre = conv_[5].forward(params_, t.act[4], &t.cols[5]);
  return apply_head(t.head_pre, spec_.head, spec_.bound);
}

Tensor Generator::backward(const GeneratorTape& t, const Tensor& grad_out, Eigen::VectorXd& grad) const {
  if (grad.size() != params_.size()) fail(ErrorKind::shape_mismatch, "Generator::backward: gradient size");
  const auto& d = t.dims;
  const std::array<int, 3> d2{d[0] / 2, d[1] / 2, d[2] / 2}, d4{d[0] / 4, d[1] / 4, d[2] / 4};
  Tensor g = head_backward(t.head_pre, grad_out, spec_.head, spec_.bound);
  g = conv_[5].backward(params_, t.cols[5], d, g, grad);
  g = conv_[4].backward(params_, t.cols[4], d, leaky_relu_backward(t.pre[4], g), grad);
  Tensor g_e1 = g;
  g = conv_[3].backward(params_, t.cols[3], d2, leaky_relu_backward(t.pre[3], upsample2_backward(g)), grad);
  Tensor g_e2 = g;
  g = conv_[2].backward(params_, t.cols[2], d4, leaky_relu_backward(t.pre[2], upsample2_backward(g)), grad);
  g_e2.data += avg_pool2_backward(g, d2).data;
  g = conv_[1].backward(params_, t.cols[1], d2, leaky_relu_backward(t.pre[1], g_e2), grad);
  g_e1.data += avg_pool2_backward(g, d).data;
  return conv_[0].backward(params_, t.cols[0], d, leaky_relu_backward(t.pre[0], g_e1), grad);
}

Critic::Critic(int in_channels, int width, std::uint64_t seed) {
  if (in_channels < 1 || width < 1) fail(ErrorKind::invalid_argument, "Critic: invalid spec");
  conv_[0] = {in_channels, width, 3, 0};
  conv_[1] = {width, 2 * width, 3, conv_[0].parameter_count()};
  features_ = 2 * width;
  linear_offset_ = conv_[1].offset + conv_[1].parameter_count();
  params_ = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(linear_offset_ + features_ + 1));
  std::mt19937_64 rng(seed);
  conv_[0].init(params_, rng, 1.0);
  conv_[1].init(params_, rng, 1.0);
  const double a = std::sqrt(3.0 / features_);
  std::uniform_real_distribution<double> u(-a, a);
  for (int i = 0; i < features_; ++i) params_(static_cast<Eigen::Index>(linear_offset_) + i) = u(rng);
}

double Critic::forward(const Tensor& x, CriticTape* tape) const {
  CriticTape local;
  CriticTape& t = tape ? *tape : local;
  t.in = x;
  t.pre[0] = conv_[0].forward(params_, x, &t.cols[0]);
  t.act[0] = leaky_relu(t.pre[0]);
  t.pooled = avg_pool2(t.act[0]);
  t.pre[1] = conv_[1].forward(params_, t.pooled, &t.cols[1]);
  t.act[1] = leaky_relu(t.pre[1]);
  t.features = t.act[1].data.rowwise().mean();
  const auto lin = static_cast<Eigen::Index>(linear_offset_);
  return params_.segment(lin, features_).dot(t.features) + params_(lin + features_);
}

Tensor Critic::backward(const CriticTape& t, double grad_score, Eigen::VectorXd& grad) const {
  if (grad.size() != params_.size()) fail(ErrorKind::shape_mismatch, "Critic::backward: gradient size");
  const auto lin = static_cast<Eigen::Index>(linear_offset_);
  grad.segment(lin, features_) += grad_score * t.features;
  grad(lin + features_) += grad_score;
  Tensor g(features_, t.act[1].dims);
  const Eigen::VectorXd gf = grad_score * params_.segment(lin, features_) / static_cast<double>(t.act[1].voxels());
  g.data.colwise() = gf;
  g = conv_[1].backward(params_, t.cols[1], t.pooled.dims, leaky_relu_backward(t.pre[1], g), grad);
  g = avg_pool2_backward(g, t.in.dims);
  return conv_[0].backward(params_, t.cols[0], t.in.dims, leaky_relu_backward(t.pre[0], g), grad);
}

void Adam::step(Eigen::VectorXd& params, const Eigen::VectorXd& grad) {
  if (grad.size() != params.size()) fail(ErrorKind::shape_mismatch, "Adam: gradient size");
  if (!grad.allFinite()) fail(ErrorKind::divergence, "Adam: non-finite gradient");
  if (m.size() != params.size()) {
    m = Eigen::VectorXd::Zero(params.size());
    v = Eigen::VectorXd::Zero(params.size());
    step_count = 0;
  }
  ++step_count;
  m = beta1 * m + (1.0 - beta1) * grad;
  v = beta2 * v + (1.0 - beta2) * grad.cwiseAbs2();
  const double c1 = 1.0 - std::pow(beta1, static_cast<double>(step_count));
  const double c2 = 1.0 - std::pow(beta2, static_cast<double>(step_count));
  params.array() -= lr * (m.array() / c1) / ((v.array() / c2).sqrt() + eps);
}

}  // namespace mdwi::nn
