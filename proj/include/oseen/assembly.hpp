#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <cstdio>
#include <fstream>
#include <functional>
#include <stdexcept>
#include <vector>

#include "oseen/dofmap.hpp"
#include "oseen/element.hpp"
#include "oseen/mesh.hpp"
#include "oseen/quadrature.hpp"

namespace oseen {

using SpMat = Eigen::SparseMatrix<double>;

// default quadrature: exact for all assembled and estimated integrands with
// constant beta (bubble x bubble mass terms have degree 6)
inline constexpr int kVolumeQuadDegree = 8;
inline constexpr int kEdgeQuadDegree = 7;

struct OseenParams {
  double nu = 1.0;
  Eigen::Vector2d beta{1.0, 0.0};
  /// Optional spatially varying convective field; the caller is responsible
  /// for divergence-freeness. Null means the constant `beta`.
  std::function<Eigen::Vector2d(const Eigen::Vector2d&)> beta_field;

  Eigen::Vector2d beta_at(const Eigen::Vector2d& x) const {
    return beta_field ? beta_field(x) : beta;
  }

  void check() const {
    if (!(nu > 0.0)) throw std::invalid_argument("OseenParams: nu must be positive");
    if (!beta.allFinite()) throw std::invalid_argument("OseenParams: beta must be finite");
  }
};

/// Assembled bilinear forms over all scalar dofs (no Dirichlet elimination).
/// Velocity blocks are scalar: the vector-valued forms act componentwise.
struct Forms {
  SpMat stiffness;   // nu * (grad phi_j, grad phi_i)
  SpMat convection;  // ((beta.grad) phi_j, phi_i)
  SpMat mass;        // (phi_j, phi_i)
  SpMat div_x;       // b-form block: -(psi_k, d_x phi_j), n_press x n_vel
  SpMat div_y;
  Eigen::VectorXd pressure_mean;  // integral of each pressure basis function
  double domain_volume = 0.0;
};

inline Forms assemble_forms(const Mesh& mesh, const DofMap& dofmap,
                            const OseenParams& params, double bubble_scale = 27.0) {
  params.check();
  if (static_cast<int>(dofmap.cell_vel.size()) != mesh.n_cells())
    throw std::runtime_error("assemble_forms: dofmap does not match mesh");

  const int nv = dofmap.n_vel, np = dofmap.n_press;
  const int nsh = dofmap.vel_dofs_per_cell();
  const QuadratureRule quad = triangle_rule(kVolumeQuadDegree);
  const int nq = quad.size();

  // reference-space basis tables, shared across cells
  std::vector<ShapeValues> vel_ref(nq), press_ref(nq);
  for (int q = 0; q < nq; ++q) {
    vel_ref[q] = velocity_basis(dofmap.kind, quad.points[q], bubble_scale);
    press_ref[q] = p1_basis(quad.points[q]);
  }

  using T = Eigen::Triplet<double>;
  std::vector<T> ts, tc, tm, tbx, tby;
  ts.reserve(mesh.n_cells() * nsh * nsh);
  tc.reserve(mesh.n_cells() * nsh * nsh);
  tm.reserve(mesh.n_cells() * nsh * nsh);
  tbx.reserve(mesh.n_cells() * 3 * nsh);
  tby.reserve(mesh.n_cells() * 3 * nsh);
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(np);
  double volume = 0.0;

  Eigen::Matrix<double, 6, 6> Sl, Cl, Ml;
  Eigen::Matrix<double, 3, 6> Bxl, Byl;
  std::array<Eigen::Vector2d, 6> gphys;

  for (int c = 0; c < mesh.n_cells(); ++c) {
    const CellGeometry geo = CellGeometry::of(mesh, c);
    Sl.setZero();
    Cl.setZero();
    Ml.setZero();
    Bxl.setZero();
    Byl.setZero();
    for (int q = 0; q < nq; ++q) {
      const double w = quad.weights[q] * geo.detJ;
      const ShapeValues& vb = vel_ref[q];
      const ShapeValues& pb = press_ref[q];
      const Eigen::Vector2d bq = params.beta_at(geo.physical(quad.points[q]));
      for (int j = 0; j < nsh; ++j) gphys[j] = geo.grad_physical(vb.grad[j]);
      for (int i = 0; i < nsh; ++i)
        for (int j = 0; j < nsh; ++j) {
          Sl(i, j) += w * params.nu * gphys[i].dot(gphys[j]);
          Cl(i, j) += w * bq.dot(gphys[j]) * vb.value[i];
          Ml(i, j) += w * vb.value[i] * vb.value[j];
        }
      for (int k = 0; k < 3; ++k)
        for (int j = 0; j < nsh; ++j) {
          Bxl(k, j) -= w * pb.value[k] * gphys[j].x();
          Byl(k, j) -= w * pb.value[k] * gphys[j].y();
        }
      for (int k = 0; k < 3; ++k) mean[dofmap.cell_press[c][k]] += w * pb.value[k];
      volume += w;
    }
    for (int i = 0; i < nsh; ++i) {
      const int gi = dofmap.cell_vel[c][i];
      for (int j = 0; j < nsh; ++j) {
        const int gj = dofmap.cell_vel[c][j];
        ts.emplace_back(gi, gj, Sl(i, j));
        tc.emplace_back(gi, gj, Cl(i, j));
        tm.emplace_back(gi, gj, Ml(i, j));
      }
    }
    for (int k = 0; k < 3; ++k) {
      const int gk = dofmap.cell_press[c][k];
      for (int j = 0; j < nsh; ++j) {
        const int gj = dofmap.cell_vel[c][j];
        tbx.emplace_back(gk, gj, Bxl(k, j));
        tby.emplace_back(gk, gj, Byl(k, j));
      }
    }
  }

  Forms f;
  f.stiffness.resize(nv, nv);
  f.convection.resize(nv, nv);
  f.mass.resize(nv, nv);
  f.div_x.resize(np, nv);
  f.div_y.resize(np, nv);
  f.stiffness.setFromTriplets(ts.begin(), ts.end());
  f.convection.setFromTriplets(tc.begin(), tc.end());
  f.mass.setFromTriplets(tm.begin(), tm.end());
  f.div_x.setFromTriplets(tbx.begin(), tbx.end());
  f.div_y.setFromTriplets(tby.begin(), tby.end());
  f.pressure_mean = mean;
  f.domain_volume = volume;
  return f;
}

/// Restrict a scalar velocity operator to the unconstrained dofs.
inline SpMat velocity_free_block(const SpMat& a, const DofMap& d) {
  std::vector<Eigen::Triplet<double>> tr;
  tr.reserve(a.nonZeros());
  for (int col = 0; col < a.outerSize(); ++col)
    for (SpMat::InnerIterator it(a, col); it; ++it) {
      const int fi = d.free_index[it.row()], fj = d.free_index[it.col()];
      if (fi >= 0 && fj >= 0) tr.emplace_back(fi, fj, it.value());
    }
  SpMat out(d.n_free, d.n_free);
  out.setFromTriplets(tr.begin(), tr.end());
  return out;
}

enum class PencilKind { primal, dual };

/// Sparse generalized eigenvalue pencil K x = lambda M x on the reduced
/// unknowns [u_x_free, u_y_free, p, multiplier], plus the data needed to
/// recover full velocity/pressure fields from a reduced vector.
struct Pencil {
  SpMat K, M;
  PencilKind kind = PencilKind::primal;
  int n_free = 0, n_press = 0, n_vel = 0;
  std::vector<int> free_to_dof;
  SpMat scalar_mass;  // full n_vel x n_vel, for L2 normalization
  Eigen::VectorXd pressure_mean;
  double domain_volume = 0.0;

  long dim() const { return K.rows(); }
  long pressure_offset() const { return 2L * n_free; }
};

inline Pencil build_primal_pencil(const Forms& f, const DofMap& d) {
  const int nf = d.n_free, np = d.n_press;
  const long dim = 2L * nf + np + 1;
  std::vector<Eigen::Triplet<double>> tk, tm;

  auto add_vel_block = [&](const SpMat& a, double scale) {
    for (int col = 0; col < a.outerSize(); ++col)
      for (SpMat::InnerIterator it(a, col); it; ++it) {
        const int fi = d.free_index[it.row()], fj = d.free_index[it.col()];
        if (fi < 0 || fj < 0) continue;
        tk.emplace_back(fi, fj, scale * it.value());
        tk.emplace_back(nf + fi, nf + fj, scale * it.value());
      }
  };
  add_vel_block(f.stiffness, 1.0);
  add_vel_block(f.convection, 1.0);

  auto add_div_block = [&](const SpMat& b, int comp) {
    for (int col = 0; col < b.outerSize(); ++col)
      for (SpMat::InnerIterator it(b, col); it; ++it) {
        const int fj = d.free_index[it.col()];
        if (fj < 0) continue;
        const long row = 2L * nf + it.row(), vcol = comp * nf + fj;
        tk.emplace_back(row, vcol, it.value());
        tk.emplace_back(vcol, row, it.value());
      }
  };
  add_div_block(f.div_x, 0);
  add_div_block(f.div_y, 1);

  for (int k = 0; k < np; ++k) {
    tk.emplace_back(2L * nf + k, dim - 1, f.pressure_mean[k]);
    tk.emplace_back(dim - 1, 2L * nf + k, f.pressure_mean[k]);
  }

  for (int col = 0; col < f.mass.outerSize(); ++col)
    for (SpMat::InnerIterator it(f.mass, col); it; ++it) {
      const int fi = d.free_index[it.row()], fj = d.free_index[it.col()];
      if (fi < 0 || fj < 0) continue;
      tm.emplace_back(fi, fj, it.value());
      tm.emplace_back(nf + fi, nf + fj, it.value());
    }

  Pencil p;
  p.K.resize(dim, dim);
  p.M.resize(dim, dim);
  p.K.setFromTriplets(tk.begin(), tk.end());
  p.M.setFromTriplets(tm.begin(), tm.end());
  p.kind = PencilKind::primal;
  p.n_free = nf;
  p.n_press = np;
  p.n_vel = d.n_vel;
  p.free_to_dof = d.free_to_dof;
  p.scalar_mass = f.mass;
  p.pressure_mean = f.pressure_mean;
  p.domain_volume = f.domain_volume;
  return p;
}

/// Dual pencil: the algebraic transpose of the primal system (the discrete
/// adjoint). Recovery flips the pressure sign so recovered fields satisfy
/// the dual strong form -nu*lap(u*) - (beta.grad)u* - grad p* = lambda u*.
inline Pencil build_dual_pencil(const Forms& f, const DofMap& d) {
  Pencil p = build_primal_pencil(f, d);
  SpMat kt = SpMat(p.K.transpose());
  p.K.swap(kt);
  p.kind = PencilKind::dual;
  return p;
}

/// Wrap a bare (K, M) pair as a pencil with no field recovery attached
/// (eigenvectors are then reported as raw coefficient vectors).
inline Pencil make_algebraic_pencil(SpMat K, SpMat M) {
  if (K.rows() != K.cols() || M.rows() != M.cols() || K.rows() != M.rows())
    throw std::invalid_argument("make_algebraic_pencil: dimension mismatch");
  Pencil p;
  p.K = std::move(K);
  p.M = std::move(M);
  p.kind = PencilKind::primal;
  p.domain_volume = 1.0;
  return p;
}

/// Matrix Market coordinate export (1-based indices).
inline void write_matrix_market(const SpMat& a, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("write_matrix_market: cannot open " + path);
  out << "%%MatrixMarket matrix coordinate real general\n";
  out << a.rows() << " " << a.cols() << " " << a.nonZeros() << "\n";
  char buf[80];
  for (int col = 0; col < a.outerSize(); ++col)
    for (SpMat::InnerIterator it(a, col); it; ++it) {
      std::snprintf(buf, sizeof(buf), "%ld %ld %.17g\n", static_cast<long>(it.row()) + 1,
                    static_cast<long>(it.col()) + 1, it.value());
      out << buf;
    }
  if (!out) throw std::runtime_error("write_matrix_market: write failed for " + path);
}

}  // namespace oseen
