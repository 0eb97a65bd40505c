#pragma once

#include <array>
#include <vector>

#include "oseen/element.hpp"
#include "oseen/mesh.hpp"

namespace oseen {

/// Global numbering of scalar velocity dofs (per component), pressure dofs,
/// and the Dirichlet mask. Scalar velocity dofs: vertices first, then one
/// bubble per cell (mini) or one midpoint per edge (Taylor-Hood). Pressure
/// dofs are the vertices. The reported dof count follows the convention
/// fixed by matching published tables: all velocity dofs (including the
/// boundary-constrained ones) plus pressure plus one zero-mean multiplier;
/// the assembled system is smaller because Dirichlet dofs are eliminated.
struct DofMap {
  ElementKind kind = ElementKind::mini;
  int n_vel = 0;    // scalar velocity dofs per component
  int n_press = 0;  // pressure dofs (= vertex count)
  int n_free = 0;   // unconstrained scalar velocity dofs per component
  std::vector<std::array<int, 6>> cell_vel;  // per-cell scalar velocity dofs
  std::vector<std::array<int, 3>> cell_press;
  std::vector<char> dirichlet;   // per scalar velocity dof
  std::vector<int> free_index;   // scalar dof -> free index, -1 if constrained
  std::vector<int> free_to_dof;  // inverse of free_index

  int vel_dofs_per_cell() const { return velocity_shape_count(kind); }

  /// dof as reported in convergence tables: 2*n_vel + n_press + 1.
  long reported_dof() const { return 2L * n_vel + n_press + 1; }

  /// Dimension of the assembled pencil: 2*n_free + n_press + 1.
  long system_dim() const { return 2L * n_free + n_press + 1; }
};

inline DofMap build_dofmap(const Mesh& mesh, ElementKind kind) {
  DofMap d;
  d.kind = kind;
  const int V = mesh.n_vertices();
  d.n_press = V;
  d.n_vel = kind == ElementKind::mini ? V + mesh.n_cells() : V + mesh.n_edges();
  d.cell_vel.assign(mesh.n_cells(), {-1, -1, -1, -1, -1, -1});
  d.cell_press.assign(mesh.n_cells(), {-1, -1, -1});
  for (int c = 0; c < mesh.n_cells(); ++c) {
    for (int k = 0; k < 3; ++k) {
      d.cell_vel[c][k] = mesh.cells[c][k];
      d.cell_press[c][k] = mesh.cells[c][k];
    }
    if (kind == ElementKind::mini) {
      d.cell_vel[c][3] = V + c;
    } else {
      for (int k = 0; k < 3; ++k) d.cell_vel[c][3 + k] = V + mesh.cell_edges[c][k];
    }
  }
  d.dirichlet.assign(d.n_vel, 0);
  for (int v = 0; v < V; ++v) d.dirichlet[v] = mesh.boundary_vertex[v];
  if (kind == ElementKind::taylor_hood)
    for (int e = 0; e < mesh.n_edges(); ++e)
      if (mesh.edges[e].boundary) d.dirichlet[V + e] = 1;
  d.free_index.assign(d.n_vel, -1);
  for (int i = 0; i < d.n_vel; ++i)
    if (!d.dirichlet[i]) {
      d.free_index[i] = d.n_free++;
      d.free_to_dof.push_back(i);
    }
  return d;
}

}  // namespace oseen
