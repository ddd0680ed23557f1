#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <vector>

namespace mdwi {

/// Discretized unit sphere with a symmetric neighbour graph and quadrature
/// weights summing to 4*pi.
struct SphereGrid {
  std::vector<Eigen::Vector3d> directions;
  std::vector<std::vector<int>> neighbors;
  Eigen::VectorXd weights;

  int size() const { return static_cast<int>(directions.size()); }

  /// Subdivided icosahedron; 3 subdivisions give 642 vertices. Weights are
  /// one third of the spherical area of every incident triangle.
  static SphereGrid icosphere(int subdivisions = 3);

  /// Antipodally-repelled point set (default 724 vertices). Weights are the
  /// smallest correction of 4*pi/N that integrates even SH up to order 8
  /// exactly; neighbours are the 6 nearest points (symmetrized).
  static SphereGrid repulsion(int count = 724, int iterations = 200);
};

/// Shared default grid (642-vertex icosphere), built once.
const SphereGrid& default_sphere();

}  // namespace mdwi
