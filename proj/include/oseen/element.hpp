#pragma once

#include <Eigen/Dense>

#include <array>
#include <stdexcept>

#include "oseen/mesh.hpp"

namespace oseen {

enum class ElementKind { mini, taylor_hood };

enum class BasisRole { velocity, pressure };

inline const char* element_name(ElementKind k) {
  return k == ElementKind::mini ? "mini" : "taylor-hood";
}

/// Values, gradients and Hessians of all shape functions of one role at a
/// single reference point. Gradients/Hessians are in reference coordinates;
/// map with the inverse Jacobian (affine cells only).
struct ShapeValues {
  int count = 0;
  std::array<double, 6> value{};
  std::array<Eigen::Vector2d, 6> grad{};
  std::array<Eigen::Matrix2d, 6> hess{};
};

inline int velocity_shape_count(ElementKind kind) {
  return kind == ElementKind::mini ? 4 : 6;
}

namespace detail {

inline void check_barycentric(const Eigen::Vector3d& b) {
  if (b.minCoeff() < -1e-12 || std::abs(b.sum() - 1.0) > 1e-12)
    throw std::invalid_argument("reference_basis: point outside reference triangle");
}

// gradients of the barycentric coordinates on the reference triangle
inline Eigen::Vector2d bary_grad(int i) {
  switch (i) {
    case 0: return {-1.0, -1.0};
    case 1: return {1.0, 0.0};
    default: return {0.0, 1.0};
  }
}

}  // namespace detail

/// P1 basis (also the pressure basis).
inline ShapeValues p1_basis(const Eigen::Vector3d& b) {
  detail::check_barycentric(b);
  ShapeValues s;
  s.count = 3;
  for (int i = 0; i < 3; ++i) {
    s.value[i] = b[i];
    s.grad[i] = detail::bary_grad(i);
    s.hess[i].setZero();
  }
  return s;
}

/// Velocity basis: P1 + cubic cell bubble (mini) or P2 Lagrange
/// (Taylor-Hood). Shape ordering: vertices 0..2, then the bubble (mini) or
/// the edge-midpoint functions for local edges 0..2 (Taylor-Hood).
/// The bubble is scale * l0*l1*l2 with scale = 27 (value 1 at the barycenter).
inline ShapeValues velocity_basis(ElementKind kind, const Eigen::Vector3d& b,
                                  double bubble_scale = 27.0) {
  detail::check_barycentric(b);
  ShapeValues s;
  if (kind == ElementKind::mini) {
    s.count = 4;
    for (int i = 0; i < 3; ++i) {
      s.value[i] = b[i];
      s.grad[i] = detail::bary_grad(i);
      s.hess[i].setZero();
    }
    const double x = b[1], y = b[2];
    s.value[3] = bubble_scale * x * y * (1.0 - x - y);
    s.grad[3] = {bubble_scale * y * (1.0 - 2.0 * x - y),
                 bubble_scale * x * (1.0 - x - 2.0 * y)};
    s.hess[3] << -2.0 * bubble_scale * y, bubble_scale * (1.0 - 2.0 * x - 2.0 * y),
        bubble_scale * (1.0 - 2.0 * x - 2.0 * y), -2.0 * bubble_scale * x;
  } else {
    s.count = 6;
    for (int i = 0; i < 3; ++i) {
      const Eigen::Vector2d g = detail::bary_grad(i);
      s.value[i] = b[i] * (2.0 * b[i] - 1.0);
      s.grad[i] = (4.0 * b[i] - 1.0) * g;
      s.hess[i] = 4.0 * g * g.transpose();
    }
    for (int k = 0; k < 3; ++k) {
      const int i = (k + 1) % 3, j = (k + 2) % 3;
      const Eigen::Vector2d gi = detail::bary_grad(i), gj = detail::bary_grad(j);
      s.value[3 + k] = 4.0 * b[i] * b[j];
      s.grad[3 + k] = 4.0 * (b[j] * gi + b[i] * gj);
      s.hess[3 + k] = 4.0 * (gi * gj.transpose() + gj * gi.transpose());
    }
  }
  return s;
}

inline ShapeValues reference_basis(ElementKind kind, BasisRole role,
                                   const Eigen::Vector3d& bary,
                                   double bubble_scale = 27.0) {
  return role == BasisRole::pressure ? p1_basis(bary)
                                     : velocity_basis(kind, bary, bubble_scale);
}

/// Affine map data of one cell: x = v0 + J * xhat.
struct CellGeometry {
  Eigen::Vector2d v0;
  Eigen::Matrix2d J, Jinv;
  double detJ = 0.0;  // = 2 * area

  static CellGeometry of(const Mesh& mesh, int c) {
    const auto& t = mesh.cells[c];
    CellGeometry g;
    g.v0 = mesh.vertices[t[0]];
    g.J.col(0) = mesh.vertices[t[1]] - g.v0;
    g.J.col(1) = mesh.vertices[t[2]] - g.v0;
    g.detJ = g.J.determinant();
    g.Jinv = g.J.inverse();
    return g;
  }

  Eigen::Vector2d physical(const Eigen::Vector3d& bary) const {
    return v0 + J * Eigen::Vector2d(bary[1], bary[2]);
  }

  Eigen::Vector3d barycentric(const Eigen::Vector2d& x) const {
    Eigen::Vector2d r = Jinv * (x - v0);
    return {1.0 - r.x() - r.y(), r.x(), r.y()};
  }

  Eigen::Vector2d grad_physical(const Eigen::Vector2d& gref) const {
    return Jinv.transpose() * gref;
  }

  Eigen::Matrix2d hess_physical(const Eigen::Matrix2d& href) const {
    return Jinv.transpose() * href * Jinv;
  }
};

}  // namespace oseen
