#pragma once

#include <cstdio>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "oseen/dofmap.hpp"
#include "oseen/eigensolver.hpp"
#include "oseen/mesh.hpp"

namespace oseen {

/// Legacy ASCII VTK export of one eigenmode: velocity (re/im) as point
/// vectors sampled at vertices, pressure (re/im) as point scalars, and the
/// per-cell indicator eta_T^2 as cell data when given.
inline void export_vtk(const Mesh& mesh, const DofMap& dofmap, const EigenPair& pair,
                       const std::string& path,
                       const std::vector<double>* per_cell_eta2 = nullptr) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("export_vtk: cannot open " + path);
  const int V = mesh.n_vertices(), C = mesh.n_cells();
  char buf[120];
  out << "# vtk DataFile Version 3.0\n";
  out << "oseen-spectral eigenmode\n";
  out << "ASCII\n";
  out << "DATASET UNSTRUCTURED_GRID\n";
  out << "POINTS " << V << " double\n";
  for (const auto& v : mesh.vertices) {
    std::snprintf(buf, sizeof(buf), "%.12g %.12g 0\n", v.x(), v.y());
    out << buf;
  }
  out << "CELLS " << C << " " << 4 * C << "\n";
  for (const auto& t : mesh.cells) out << "3 " << t[0] << " " << t[1] << " " << t[2] << "\n";
  out << "CELL_TYPES " << C << "\n";
  for (int c = 0; c < C; ++c) out << "5\n";

  out << "POINT_DATA " << V << "\n";
  auto vectors = [&](const char* name, bool imag) {
    out << "VECTORS " << name << " double\n";
    for (int v = 0; v < V; ++v) {
      const Complex ux = pair.u[v], uy = pair.u[dofmap.n_vel + v];
      std::snprintf(buf, sizeof(buf), "%.12g %.12g 0\n", imag ? ux.imag() : ux.real(),
                    imag ? uy.imag() : uy.real());
      out << buf;
    }
  };
  vectors("velocity_re", false);
  vectors("velocity_im", true);
  auto scalars = [&](const char* name, bool imag) {
    out << "SCALARS " << name << " double 1\n";
    out << "LOOKUP_TABLE default\n";
    for (int v = 0; v < V; ++v) {
      std::snprintf(buf, sizeof(buf), "%.12g\n", imag ? pair.p[v].imag() : pair.p[v].real());
      out << buf;
    }
  };
  scalars("pressure_re", false);
  scalars("pressure_im", true);

  if (per_cell_eta2) {
    if (static_cast<int>(per_cell_eta2->size()) != C)
      throw std::invalid_argument("export_vtk: cell data size mismatch");
    out << "CELL_DATA " << C << "\n";
    out << "SCALARS eta2 double 1\n";
    out << "LOOKUP_TABLE default\n";
    for (double v : *per_cell_eta2) {
      std::snprintf(buf, sizeof(buf), "%.12g\n", v);
      out << buf;
    }
  }
  if (!out) throw std::runtime_error("export_vtk: write failed for " + path);
}

}  // namespace oseen
