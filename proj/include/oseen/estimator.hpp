#pragma once

#include <Eigen/Dense>

#include <array>
#include <cmath>
#include <complex>
#include <stdexcept>
#include <vector>

#include "oseen/assembly.hpp"
#include "oseen/dofmap.hpp"
#include "oseen/eigensolver.hpp"
#include "oseen/element.hpp"
#include "oseen/mesh.hpp"
#include "oseen/quadrature.hpp"

namespace oseen {

/// Per-cell residual indicators eta_T^2 with the R/D/J component totals.
/// R: volume residual, D: divergence defect, J: flux jumps over interior
/// edges (each edge counted once globally, split half/half between its two
/// cells), so that global2() == R + D + J == sum of per_cell.
struct EstimateReport {
  std::vector<double> per_cell;
  double R = 0.0, D = 0.0, J = 0.0;
  PencilKind kind = PencilKind::primal;
  Complex lambda{0.0, 0.0};

  double global2() const { return R + D + J; }
  double global() const { return std::sqrt(global2()); }
};

namespace detail {

struct CellFieldEval {
  // complex velocity/pressure values and derivatives at one physical point
  Eigen::Vector2cd u;
  Eigen::Matrix2cd grad_u;  // grad_u(i,j) = d_j u_i
  Eigen::Vector2cd lap_u;
  Complex p;
  Eigen::Vector2cd grad_p;
};

struct CellCoeffs {
  std::array<Complex, 6> ux{}, uy{};
  std::array<Complex, 3> pr{};
  int nsh = 0;

  static CellCoeffs of(const DofMap& d, const EigenPair& pair, int c) {
    CellCoeffs cc;
    cc.nsh = d.vel_dofs_per_cell();
    for (int j = 0; j < cc.nsh; ++j) {
      const int dof = d.cell_vel[c][j];
      cc.ux[j] = pair.u[dof];
      cc.uy[j] = pair.u[d.n_vel + dof];
    }
    for (int k = 0; k < 3; ++k) cc.pr[k] = pair.p[d.cell_press[c][k]];
    return cc;
  }
};

inline CellFieldEval evaluate(const CellCoeffs& cc, const CellGeometry& geo,
                              const ShapeValues& vb, const ShapeValues& pb) {
  CellFieldEval f;
  f.u.setZero();
  f.grad_u.setZero();
  f.lap_u.setZero();
  f.p = Complex(0.0, 0.0);
  f.grad_p.setZero();
  for (int j = 0; j < cc.nsh; ++j) {
    const Eigen::Vector2d g = geo.grad_physical(vb.grad[j]);
    const double lap = geo.hess_physical(vb.hess[j]).trace();
    f.u[0] += cc.ux[j] * vb.value[j];
    f.u[1] += cc.uy[j] * vb.value[j];
    f.grad_u.row(0) += cc.ux[j] * g.transpose();
    f.grad_u.row(1) += cc.uy[j] * g.transpose();
    f.lap_u[0] += cc.ux[j] * lap;
    f.lap_u[1] += cc.uy[j] * lap;
  }
  for (int k = 0; k < 3; ++k) {
    const Eigen::Vector2d g = geo.grad_physical(pb.grad[k]);
    f.p += cc.pr[k] * pb.value[k];
    f.grad_p += cc.pr[k] * g;
  }
  return f;
}

inline double velocity_l2_norm2(const Mesh& mesh, const DofMap& d, const EigenPair& pair,
                                double bubble_scale) {
  const QuadratureRule quad = triangle_rule(kVolumeQuadDegree);
  std::vector<ShapeValues> vb(quad.size());
  for (int q = 0; q < quad.size(); ++q)
    vb[q] = velocity_basis(d.kind, quad.points[q], bubble_scale);
  double n2 = 0.0;
  for (int c = 0; c < mesh.n_cells(); ++c) {
    const CellGeometry geo = CellGeometry::of(mesh, c);
    const CellCoeffs cc = CellCoeffs::of(d, pair, c);
    for (int q = 0; q < quad.size(); ++q) {
      Eigen::Vector2cd u;
      u.setZero();
      for (int j = 0; j < cc.nsh; ++j) {
        u[0] += cc.ux[j] * vb[q].value[j];
        u[1] += cc.uy[j] * vb[q].value[j];
      }
      n2 += quad.weights[q] * geo.detJ * (std::norm(u[0]) + std::norm(u[1]));
    }
  }
  return n2;
}

inline EstimateReport residual_indicators(const Mesh& mesh, const DofMap& d,
                                          const OseenParams& params,
                                          const EigenPair& pair, PencilKind kind,
                                          double bubble_scale) {
  params.check();
  if (pair.u.size() != 2 * d.n_vel || pair.p.size() != d.n_press)
    throw std::invalid_argument("indicators: eigenpair does not match dofmap");
  const double n2 = velocity_l2_norm2(mesh, d, pair, bubble_scale);
  if (std::abs(n2 - 1.0) > 1e-6)
    throw std::invalid_argument("indicators: eigenpair is not L2-normalized");

  const double sgn = (kind == PencilKind::primal) ? -1.0 : 1.0;
  const Complex lam = pair.lambda;
  const QuadratureRule quad = triangle_rule(kVolumeQuadDegree);
  const EdgeRule erule = edge_rule(kEdgeQuadDegree);
  std::vector<ShapeValues> vb(quad.size()), pb(quad.size());
  for (int q = 0; q < quad.size(); ++q) {
    vb[q] = velocity_basis(d.kind, quad.points[q], bubble_scale);
    pb[q] = p1_basis(quad.points[q]);
  }

  EstimateReport rep;
  rep.kind = kind;
  rep.lambda = lam;
  rep.per_cell.assign(mesh.n_cells(), 0.0);

  std::vector<CellGeometry> geos(mesh.n_cells());
  std::vector<CellCoeffs> coeffs(mesh.n_cells());
  for (int c = 0; c < mesh.n_cells(); ++c) {
    geos[c] = CellGeometry::of(mesh, c);
    coeffs[c] = CellCoeffs::of(d, pair, c);
  }

  // volume residual and divergence defect
  for (int c = 0; c < mesh.n_cells(); ++c) {
    double r_int = 0.0, d_int = 0.0;
    for (int q = 0; q < quad.size(); ++q) {
      const double w = quad.weights[q] * geos[c].detJ;
      const CellFieldEval f = evaluate(coeffs[c], geos[c], vb[q], pb[q]);
      const Eigen::Vector2d beta = params.beta_at(geos[c].physical(quad.points[q]));
      Eigen::Vector2cd conv = f.grad_u * beta.cast<Complex>();
      Eigen::Vector2cd res =
          lam * f.u + params.nu * f.lap_u + sgn * (conv + f.grad_p);
      r_int += w * (std::norm(res[0]) + std::norm(res[1]));
      d_int += w * std::norm(f.grad_u(0, 0) + f.grad_u(1, 1));
    }
    const double hT = mesh.cell_diameter(c);
    const double rT = hT * hT * r_int;
    rep.R += rT;
    rep.D += d_int;
    rep.per_cell[c] += rT + d_int;
  }

  // interior-edge jumps of the flux (nu*grad(u) -/+ p*I) * n
  for (int e = 0; e < mesh.n_edges(); ++e) {
    const Edge& ed = mesh.edges[e];
    if (ed.boundary) continue;
    const Eigen::Vector2d a = mesh.vertices[ed.v0], b = mesh.vertices[ed.v1];
    const double he = (b - a).norm();
    const Eigen::Vector2d tang = (b - a) / he;
    const Eigen::Vector2d n(tang.y(), -tang.x());
    double jump_int = 0.0;
    for (int q = 0; q < erule.size(); ++q) {
      const Eigen::Vector2d x = a + erule.points[q] * (b - a);
      Eigen::Vector2cd flux[2];
      const int cells2[2] = {ed.cell0, ed.cell1};
      for (int s = 0; s < 2; ++s) {
        const int c = cells2[s];
        const Eigen::Vector3d bary = geos[c].barycentric(x);
        const ShapeValues vbe = velocity_basis(d.kind, bary, bubble_scale);
        const ShapeValues pbe = p1_basis(bary);
        const CellFieldEval f = evaluate(coeffs[c], geos[c], vbe, pbe);
        flux[s] = params.nu * (f.grad_u * n.cast<Complex>()) +
                  sgn * (f.p * n.cast<Complex>());
      }
      const Eigen::Vector2cd jmp = flux[0] - flux[1];
      jump_int += erule.weights[q] * he * (std::norm(jmp[0]) + std::norm(jmp[1]));
    }
    const double Je = 0.5 * he * jump_int;
    rep.J += Je;
    rep.per_cell[ed.cell0] += 0.5 * Je;
    rep.per_cell[ed.cell1] += 0.5 * Je;
  }
  return rep;
}

}  // namespace detail

/// Local indicators for the primal problem:
///   eta_T^2 = h_T^2 ||lambda u + nu lap(u) - (beta.grad)u - grad p||_T^2
///           + ||div u||_T^2 + sum over interior edges of T of
///             (h_e/4) ||[[(nu grad(u) - p I) n]]||_e^2.
inline EstimateReport primal_indicators(const Mesh& mesh, const DofMap& d,
                                        const OseenParams& params, const EigenPair& pair,
                                        double bubble_scale = 27.0) {
  return detail::residual_indicators(mesh, d, params, pair, PencilKind::primal,
                                     bubble_scale);
}

/// Dual counterpart: residual lambda u* + nu lap(u*) + (beta.grad)u* + grad p*
/// and flux (nu grad(u*) + p* I) n (constant beta: div(u* x beta) = (beta.grad)u*).
inline EstimateReport dual_indicators(const Mesh& mesh, const DofMap& d,
                                      const OseenParams& params, const EigenPair& pair,
                                      double bubble_scale = 27.0) {
  return detail::residual_indicators(mesh, d, params, pair, PencilKind::dual,
                                     bubble_scale);
}

struct CombinedTheta {
  double theta = 0.0;
  std::vector<double> per_cell;  // theta_T^2
};

/// theta = sqrt(eta^2 + eta*^2) with per-cell theta_T^2 for marking.
inline CombinedTheta combined_theta(const EstimateReport& primal,
                                    const EstimateReport& dual) {
  if (primal.per_cell.size() != dual.per_cell.size())
    throw std::invalid_argument("combined_theta: reports from different meshes");
  CombinedTheta t;
  t.per_cell.resize(primal.per_cell.size());
  for (size_t c = 0; c < t.per_cell.size(); ++c)
    t.per_cell[c] = primal.per_cell[c] + dual.per_cell[c];
  t.theta = std::sqrt(primal.global2() + dual.global2());
  return t;
}

}  // namespace oseen
