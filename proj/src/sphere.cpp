#include "mdwi/sphere.hpp"

#include "mdwi/odf.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <numbers>
#include <set>
#include <utility>

namespace mdwi {

namespace {

using Face = std::array<int, 3>;

double spherical_triangle_area(const Eigen::Vector3d& a, const Eigen::Vector3d& b,
                               const Eigen::Vector3d& c) {
  const double num = std::abs(a.dot(b.cross(c)));
  const double den = 1.0 + a.dot(b) + b.dot(c) + c.dot(a);
  return 2.0 * std::atan2(num, den);
}

}  // namespace

SphereGrid SphereGrid::icosphere(int subdivisions) {
  const double t = (1.0 + std::sqrt(5.0)) / 2.0;
  std::vector<Eigen::Vector3d> v = {
      {-1, t, 0}, {1, t, 0}, {-1, -t, 0}, {1, -t, 0},
      {0, -1, t}, {0, 1, t}, {0, -1, -t}, {0, 1, -t},
      {t, 0, -1}, {t, 0, 1}, {-t, 0, -1}, {-t, 0, 1},
  };
  for (auto& p : v) p.normalize();
  std::vector<Face> faces = {
      {0, 11, 5}, {0, 5, 1}, {0, 1, 7}, {0, 7, 10}, {0, 10, 11},
      {1, 5, 9}, {5, 11, 4}, {11, 10, 2}, {10, 7, 6}, {7, 1, 8},
      {3, 9, 4}, {3, 4, 2}, {3, 2, 6}, {3, 6, 8}, {3, 8, 9},
      {4, 9, 5}, {2, 4, 11}, {6, 2, 10}, {8, 6, 7}, {9, 8, 1},
  };

  for (int level = 0; level < subdivisions; ++level) {
    std::map<std::pair<int, int>, int> midpoint;
    auto mid = [&](int a, int b) {
      const auto key = std::minmax(a, b);
      auto it = midpoint.find(key);
      if (it != midpoint.end()) return it->second;
      v.push_back((v[a] + v[b]).normalized());
      const int idx = static_cast<int>(v.size()) - 1;
      midpoint.emplace(key, idx);
      return idx;
    };
    std::vector<Face> next;
    next.reserve(faces.size() * 4);
    for (const auto& f : faces) {
      const int ab = mid(f[0], f[1]);
      const int bc = mid(f[1], f[2]);
      const int ca = mid(f[2], f[0]);
      next.push_back({f[0], ab, ca});
      next.push_back({f[1], bc, ab});
      next.push_back({f[2], ca, bc});
      next.push_back({ab, bc, ca});
    }
    faces = std::move(next);
  }

  SphereGrid g;
  g.directions = v;
  g.weights = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(v.size()));
  std::vector<std::set<int>> adj(v.size());
  for (const auto& f : faces) {
    const double area = spherical_triangle_area(v[f[0]], v[f[1]], v[f[2]]);
    for (int k = 0; k < 3; ++k) {
      g.weights(f[k]) += area / 3.0;
      adj[f[k]].insert(f[(k + 1) % 3]);
      adj[f[k]].insert(f[(k + 2) % 3]);
    }
  }
  g.neighbors.resize(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) g.neighbors[i].assign(adj[i].begin(), adj[i].end());
  return g;
}

SphereGrid SphereGrid::repulsion(int count, int iterations) {
  // Fibonacci lattice as a deterministic start, then repulsion between every
  // point and every other point's antipode as well (ODFs are symmetric).
  std::vector<Eigen::Vector3d> p(count);
  const double golden = std::numbers::pi * (3.0 - std::sqrt(5.0));
  for (int i = 0; i < count; ++i) {
    const double z = 1.0 - (2.0 * i + 1.0) / count;
    const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
    const double phi = golden * i;
    p[i] = Eigen::Vector3d(r * std::cos(phi), r * std::sin(phi), z);
  }
  double step = 0.1 / std::sqrt(static_cast<double>(count));
  std::vector<Eigen::Vector3d> force(count);
  for (int it = 0; it < iterations; ++it) {
    for (int i = 0; i < count; ++i) {
      Eigen::Vector3d f = Eigen::Vector3d::Zero();
      for (int j = 0; j < count; ++j) {
        if (j != i) {
          const Eigen::Vector3d d = p[i] - p[j];
          f += d / std::pow(d.squaredNorm(), 1.5);
        }
        const Eigen::Vector3d da = p[i] + p[j];
        f += da / std::pow(da.squaredNorm(), 1.5);
      }
      force[i] = f - f.dot(p[i]) * p[i];
    }
    double fmax = 0.0;
    for (const auto& f : force) fmax = std::max(fmax, f.norm());
    if (fmax == 0.0) break;
    for (int i = 0; i < count; ++i) p[i] = (p[i] + step * force[i] / fmax).normalized();
    step *= 0.98;
  }

  SphereGrid g;
  g.directions = p;
  // Equal weights, minimally corrected so that every even SH function up to
  // order 8 integrates exactly; products of order-4 functions then do too.
  constexpr int exact_order = 8;
  const int terms = (exact_order + 1) * (exact_order + 2) / 2;
  Eigen::MatrixXd a(terms, count);
  for (int i = 0; i < count; ++i) {
    const double theta = std::acos(std::clamp(p[i].z(), -1.0, 1.0));
    const double phi = std::atan2(p[i].y(), p[i].x());
    int row = 0;
    for (int l = 0; l <= exact_order; l += 2)
      for (int m = -l; m <= l; ++m) a(row++, i) = real_sh(l, m, theta, phi);
  }
  const Eigen::VectorXd w0 = Eigen::VectorXd::Constant(count, 4.0 * std::numbers::pi / count);
  Eigen::VectorXd target = Eigen::VectorXd::Zero(terms);
  target(0) = std::sqrt(4.0 * std::numbers::pi);
  const Eigen::VectorXd residual = target - a * w0;
  g.weights = w0 + a.transpose() * (a * a.transpose()).ldlt().solve(residual);
  std::vector<std::set<int>> adj(count);
  constexpr int k = 6;
  for (int i = 0; i < count; ++i) {
    std::vector<std::pair<double, int>> d;
    d.reserve(count - 1);
    for (int j = 0; j < count; ++j)
      if (j != i) d.emplace_back((p[i] - p[j]).squaredNorm(), j);
    std::partial_sort(d.begin(), d.begin() + k, d.end());
    for (int n = 0; n < k; ++n) {
      adj[i].insert(d[n].second);
      adj[d[n].second].insert(i);
    }
  }
  g.neighbors.resize(count);
  for (int i = 0; i < count; ++i) g.neighbors[i].assign(adj[i].begin(), adj[i].end());
  return g;
}

const SphereGrid& default_sphere() {
  static const SphereGrid grid = SphereGrid::icosphere(3);
  return grid;
}

}  // namespace mdwi
