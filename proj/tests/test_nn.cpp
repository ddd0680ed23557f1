#include <doctest.h>

#include <cmath>
#include <random>

#include "mdwi/nn.hpp"

using namespace mdwi;
using namespace mdwi::nn;

namespace {

Tensor random_tensor(int channels, std::array<int, 3> dims, std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> n(0.0, scale);
  Tensor t(channels, dims);
  for (Eigen::Index i = 0; i < t.data.size(); ++i) t.data.data()[i] = n(rng);
  return t;
}

double dot(const Tensor& a, const Tensor& b) { return (a.data.array() * b.data.array()).sum(); }

template <typename Net>
void check_generator_gradients(Net& g, const Tensor& x, const Tensor& w) {
  GeneratorTape tape;
  g.forward(x, &tape);
  Eigen::VectorXd grad = Eigen::VectorXd::Zero(g.params().size());
  const Tensor gin = g.backward(tape, w, grad);
  const double h = 1e-6;
  std::mt19937_64 pick(7);
  std::uniform_int_distribution<Eigen::Index> pi(0, g.params().size() - 1);
  for (int t = 0; t < 40; ++t) {
    const Eigen::Index i = pi(pick);
    const double keep = g.params()(i);
    g.params()(i) = keep + h;
    const double fp = dot(g.forward(x), w);
    g.params()(i) = keep - h;
    const double fm = dot(g.forward(x), w);
    g.params()(i) = keep;
    const double fd = (fp - fm) / (2 * h);
    CHECK(std::abs(grad(i) - fd) <= 1e-6 * (1.0 + std::abs(fd)));
  }
  std::uniform_int_distribution<Eigen::Index> xi(0, x.data.size() - 1);
  for (int t = 0; t < 20; ++t) {
    const Eigen::Index i = xi(pick);
    Tensor xp = x, xm = x;
    xp.data.data()[i] += h;
    xm.data.data()[i] -= h;
    const double fd = (dot(g.forward(xp), w) - dot(g.forward(xm), w)) / (2 * h);
    CHECK(std::abs(gin.data.data()[i] - fd) <= 1e-6 * (1.0 + std::abs(fd)));
  }
}

}  // namespace

TEST_CASE("volume and tensor layouts agree") {
  VolumeD v(VolumeHeader::make({3, 2, 4}, 6, Domain::tensor_log));
  for (std::size_t i = 0; i < v.data().size(); ++i) v.data()[i] = static_cast<double>(i);
  const Tensor t = from_volume(v);
  CHECK(t.data(2, 5) == v.at(5, 2));
  const VolumeD back = to_volume(t, v.header(), Domain::tensor_log);
  CHECK(back.data() == v.data());
}

TEST_CASE("pooling and upsampling are adjoint to their backward passes") {
  std::mt19937_64 rng(61);
  const Tensor x = random_tensor(3, {4, 6, 2}, rng);
  const Tensor y = random_tensor(3, {2, 3, 1}, rng);
  CHECK(dot(avg_pool2(x), y) == doctest::Approx(dot(x, avg_pool2_backward(y, x.dims))));
  CHECK(dot(upsample2(y), x) == doctest::Approx(dot(y, upsample2_backward(x))));
}

TEST_CASE("convolution matches a direct sum") {
  std::mt19937_64 rng(62);
  Conv3d conv{2, 3, 3, 0};
  Eigen::VectorXd p(static_cast<Eigen::Index>(conv.parameter_count()));
  for (Eigen::Index i = 0; i < p.size(); ++i) p(i) = std::normal_distribution<double>(0, 1)(rng);
  const Tensor x = random_tensor(2, {4, 3, 5}, rng);
  const Tensor y = conv.forward(p, x, nullptr);
  Eigen::Map<const Eigen::MatrixXd> w(p.data(), 3, 54);
  const auto& d = x.dims;
  for (int z = 0; z < d[2]; ++z)
    for (int yy = 0; yy < d[1]; ++yy)
      for (int xx = 0; xx < d[0]; ++xx)
        for (int co = 0; co < 3; ++co) {
          double s = p(3 * 54 + co);
          int k = 0;
          for (int dz = -1; dz <= 1; ++dz)
            for (int dy = -1; dy <= 1; ++dy)
              for (int dx = -1; dx <= 1; ++dx, ++k) {
                const int a = xx + dx, b = yy + dy, c = z + dz;
                if (a < 0 || b < 0 || c < 0 || a >= d[0] || b >= d[1] || c >= d[2]) continue;
                for (int ci = 0; ci < 2; ++ci) s += w(co, k * 2 + ci) * x.data(ci, a + d[0] * (b + d[1] * c));
              }
          CHECK(y.data(co, xx + d[0] * (yy + d[1] * z)) == doctest::Approx(s).epsilon(1e-12));
        }
}

TEST_CASE("generator backward matches finite differences for every head") {
  std::mt19937_64 rng(63);
  for (Head head : {Head::hardtanh, Head::tanh_tangent, Head::sigmoid}) {
    GeneratorSpec spec;
    spec.in_channels = 2;
    spec.out_channels = 4;
    spec.width = 3;
    spec.head = head;
    spec.bound = head == Head::tanh_tangent ? 0.4 : 5.0;
    Generator g(spec, 5);
    const Tensor x = random_tensor(2, {4, 8, 4}, rng);
    const Tensor w = random_tensor(4, {4, 8, 4}, rng);
    check_generator_gradients(g, x, w);
    if (head == Head::tanh_tangent) CHECK(g.forward(x).data.row(0).norm() == 0.0);
  }
}

TEST_CASE("critic backward matches finite differences") {
  std::mt19937_64 rng(64);
  Critic c(3, 4, 9);
  const Tensor x = random_tensor(3, {4, 4, 6}, rng);
  CriticTape tape;
  c.forward(x, &tape);
  Eigen::VectorXd grad = Eigen::VectorXd::Zero(c.params().size());
  const Tensor gin = c.backward(tape, 1.7, grad);
  const double h = 1e-6;
  for (Eigen::Index i = 0; i < c.params().size(); i += 7) {
    const double keep = c.params()(i);
    c.params()(i) = keep + h;
    const double fp = c.forward(x);
    c.params()(i) = keep - h;
    const double fm = c.forward(x);
    c.params()(i) = keep;
    CHECK(std::abs(grad(i) - 1.7 * (fp - fm) / (2 * h)) < 1e-6);
  }
  for (Eigen::Index i = 0; i < x.data.size(); i += 11) {
    Tensor xp = x, xm = x;
    xp.data.data()[i] += h;
    xm.data.data()[i] -= h;
    CHECK(std::abs(gin.data.data()[i] - 1.7 * (c.forward(xp) - c.forward(xm)) / (2 * h)) < 1e-6);
  }
}

TEST_CASE("generator sizes and output bounds") {
  Generator g({1, 6, 8, Head::hardtanh, 5.0}, 1);
  CHECK(g.parameter_count() > 10000);
  CHECK(g.parameter_count() < 100000);
  Eigen::VectorXd bias = Eigen::VectorXd::Constant(6, 9.0);
  g.set_head_bias(bias);
  std::mt19937_64 rng(65);
  const Tensor y = g.forward(random_tensor(1, {8, 8, 8}, rng));
  CHECK(y.data.cwiseAbs().maxCoeff() <= 5.0);
  CHECK_THROWS_AS(g.forward(random_tensor(1, {6, 8, 8}, rng)), Error);
}

TEST_CASE("Adam minimizes a quadratic") {
  Adam opt;
  opt.lr = 0.05;
  Eigen::VectorXd p = Eigen::VectorXd::Constant(3, 2.0);
  for (int i = 0; i < 500; ++i) opt.step(p, Eigen::VectorXd(2.0 * p));
  CHECK(p.norm() < 1e-2);
  Eigen::VectorXd bad = Eigen::VectorXd::Constant(3, std::nan(""));
  CHECK_THROWS_AS(opt.step(p, bad), Error);
}
