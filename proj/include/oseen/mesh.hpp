#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace oseen {

/// Undirected mesh edge with its adjacent cells (one for boundary edges).
struct Edge {
  int v0 = -1, v1 = -1;    // endpoint vertex ids, v0 < v1
  int cell0 = -1, cell1 = -1;
  bool boundary = false;

  int n_adjacent() const { return cell1 >= 0 ? 2 : 1; }
};

/// Cells selected for refinement.
struct MarkedSet {
  std::vector<int> cell_ids;
};

/// Conforming 2D triangle mesh. Cells are counter-clockwise vertex triples;
/// local edge k of a cell is the edge opposite local vertex k. Immutable
/// after construction: refinement operations return new meshes.
class Mesh {
public:
  std::vector<Eigen::Vector2d> vertices;
  std::vector<std::array<int, 3>> cells;
  std::vector<int> refinement_edge;          // local edge index per cell
  std::vector<int> parent;                   // cell in the source mesh (-1 for base meshes)
  std::vector<Edge> edges;
  std::vector<std::array<int, 3>> cell_edges;  // edge ids, slot k opposite vertex k
  std::vector<std::array<int, 3>> neighbors;   // neighbor cell across local edge k, -1 on boundary
  std::vector<char> boundary_vertex;

  int n_vertices() const { return static_cast<int>(vertices.size()); }
  int n_cells() const { return static_cast<int>(cells.size()); }
  int n_edges() const { return static_cast<int>(edges.size()); }

  double signed_area(int c) const {
    const auto& t = cells[c];
    Eigen::Vector2d e1 = vertices[t[1]] - vertices[t[0]];
    Eigen::Vector2d e2 = vertices[t[2]] - vertices[t[0]];
    return 0.5 * (e1.x() * e2.y() - e1.y() * e2.x());
  }

  double edge_length(int e) const {
    return (vertices[edges[e].v1] - vertices[edges[e].v0]).norm();
  }

  /// Cell diameter = longest edge.
  double cell_diameter(int c) const {
    const auto& t = cells[c];
    double h = 0.0;
    for (int k = 0; k < 3; ++k)
      h = std::max(h, (vertices[t[(k + 1) % 3]] - vertices[t[(k + 2) % 3]]).norm());
    return h;
  }

  double max_diameter() const {
    double h = 0.0;
    for (int c = 0; c < n_cells(); ++c) h = std::max(h, cell_diameter(c));
    return h;
  }

  double min_diameter() const {
    double h = std::numeric_limits<double>::max();
    for (int c = 0; c < n_cells(); ++c) h = std::min(h, cell_diameter(c));
    return h;
  }

  Eigen::Vector2d centroid(int c) const {
    const auto& t = cells[c];
    return (vertices[t[0]] + vertices[t[1]] + vertices[t[2]]) / 3.0;
  }

  /// Smallest interior angle over all cells, in radians.
  double min_angle() const {
    double amin = std::numeric_limits<double>::max();
    for (const auto& t : cells) {
      for (int k = 0; k < 3; ++k) {
        Eigen::Vector2d u = vertices[t[(k + 1) % 3]] - vertices[t[k]];
        Eigen::Vector2d v = vertices[t[(k + 2) % 3]] - vertices[t[k]];
        double cosa = u.dot(v) / (u.norm() * v.norm());
        amin = std::min(amin, std::acos(std::clamp(cosa, -1.0, 1.0)));
      }
    }
    return amin;
  }

  /// Conformity audit: adjacency counts, boundary flags, positive areas.
  /// Throws std::runtime_error on the first violation.
  void validate() const {
    for (int c = 0; c < n_cells(); ++c)
      if (!(signed_area(c) > 0.0))
        throw std::runtime_error("mesh: cell " + std::to_string(c) + " has non-positive area");
    for (int e = 0; e < n_edges(); ++e) {
      const Edge& ed = edges[e];
      int count = ed.n_adjacent();
      if (count != 1 && count != 2)
        throw std::runtime_error("mesh: edge with invalid adjacency");
      if (ed.boundary != (count == 1))
        throw std::runtime_error("mesh: inconsistent boundary flag on edge " + std::to_string(e));
    }
    for (int c = 0; c < n_cells(); ++c) {
      if (refinement_edge[c] < 0 || refinement_edge[c] > 2)
        throw std::runtime_error("mesh: invalid refinement edge index");
      for (int k = 0; k < 3; ++k) {
        int nb = neighbors[c][k];
        if (nb >= 0) {
          const auto& nn = neighbors[nb];
          if (std::find(nn.begin(), nn.end(), c) == nn.end())
            throw std::runtime_error("mesh: asymmetric neighbor table");
        }
      }
    }
  }

  /// Build from vertex/cell lists. Refinement edges are assigned by the
  /// longest-edge rule unless provided (ties: smallest opposite local vertex).
  static Mesh build(std::vector<Eigen::Vector2d> verts,
                    std::vector<std::array<int, 3>> tris,
                    std::vector<int> refedges = {},
                    std::vector<int> parents = {}) {
    Mesh m;
    m.vertices = std::move(verts);
    m.cells = std::move(tris);
    m.refinement_edge = std::move(refedges);
    m.parent = std::move(parents);
    if (m.parent.empty()) m.parent.assign(m.cells.size(), -1);
    m.finalize();
    return m;
  }

private:
  void finalize() {
    const int nc = n_cells();
    // orient counter-clockwise
    for (auto& t : cells) {
      Eigen::Vector2d e1 = vertices[t[1]] - vertices[t[0]];
      Eigen::Vector2d e2 = vertices[t[2]] - vertices[t[0]];
      if (e1.x() * e2.y() - e1.y() * e2.x() < 0.0) std::swap(t[1], t[2]);
    }

    edges.clear();
    cell_edges.assign(nc, {-1, -1, -1});
    std::map<std::pair<int, int>, int> edge_of;
    for (int c = 0; c < nc; ++c) {
      for (int k = 0; k < 3; ++k) {
        int a = cells[c][(k + 1) % 3], b = cells[c][(k + 2) % 3];
        auto key = std::minmax(a, b);
        auto [it, inserted] = edge_of.try_emplace({key.first, key.second}, n_edges());
        if (inserted) {
          Edge ed;
          ed.v0 = key.first;
          ed.v1 = key.second;
          ed.cell0 = c;
          edges.push_back(ed);
        } else {
          Edge& ed = edges[it->second];
          if (ed.cell1 >= 0)
            throw std::runtime_error("mesh: edge shared by more than two cells");
          ed.cell1 = c;
        }
        cell_edges[c][k] = it->second;
      }
    }
    boundary_vertex.assign(vertices.size(), 0);
    for (auto& ed : edges) {
      ed.boundary = (ed.cell1 < 0);
      if (ed.boundary) {
        boundary_vertex[ed.v0] = 1;
        boundary_vertex[ed.v1] = 1;
      }
    }
    neighbors.assign(nc, {-1, -1, -1});
    for (int c = 0; c < nc; ++c)
      for (int k = 0; k < 3; ++k) {
        const Edge& ed = edges[cell_edges[c][k]];
        neighbors[c][k] = (ed.cell0 == c) ? ed.cell1 : ed.cell0;
      }

    if (refinement_edge.empty()) {
      refinement_edge.resize(nc);
      for (int c = 0; c < nc; ++c) refinement_edge[c] = longest_edge(c);
    }
    validate();
  }

  int longest_edge(int c) const {
    const auto& t = cells[c];
    int best = 0;
    double lbest = -1.0;
    for (int k = 0; k < 3; ++k) {
      double l = (vertices[t[(k + 1) % 3]] - vertices[t[(k + 2) % 3]]).norm();
      if (l > lbest + 1e-14 * (1.0 + lbest)) {
        lbest = l;
        best = k;
      }
    }
    return best;
  }
};

/// Structured mesh of the square (-1,1)^2 with n subdivisions per side.
/// All diagonals run lower-left to upper-right.
inline Mesh generate_square(int n) {
  if (n < 1) throw std::invalid_argument("generate_square: n must be >= 1");
  std::vector<Eigen::Vector2d> verts;
  verts.reserve((n + 1) * (n + 1));
  for (int j = 0; j <= n; ++j)
    for (int i = 0; i <= n; ++i)
      verts.emplace_back(-1.0 + 2.0 * i / n, -1.0 + 2.0 * j / n);
  auto vid = [n](int i, int j) { return j * (n + 1) + i; };
  std::vector<std::array<int, 3>> tris;
  tris.reserve(2 * n * n);
  for (int j = 0; j < n; ++j)
    for (int i = 0; i < n; ++i) {
      int a = vid(i, j), b = vid(i + 1, j), c = vid(i + 1, j + 1), d = vid(i, j + 1);
      tris.push_back({a, b, c});
      tris.push_back({a, c, d});
    }
  return Mesh::build(std::move(verts), std::move(tris));
}

/// Structured mesh of the L-shaped domain (-1,1)^2 \ (-1,0)^2 with
/// n subdivisions per unit length.
inline Mesh generate_lshape(int n) {
  if (n < 1) throw std::invalid_argument("generate_lshape: n must be >= 1");
  const int g = 2 * n;  // grid squares per side
  std::vector<int> vmap((g + 1) * (g + 1), -1);
  std::vector<Eigen::Vector2d> verts;
  std::vector<std::array<int, 3>> tris;
  auto gidx = [g](int i, int j) { return j * (g + 1) + i; };
  auto vert = [&](int i, int j) {
    int& id = vmap[gidx(i, j)];
    if (id < 0) {
      id = static_cast<int>(verts.size());
      verts.emplace_back(-1.0 + 2.0 * i / g, -1.0 + 2.0 * j / g);
    }
    return id;
  };
  for (int j = 0; j < g; ++j)
    for (int i = 0; i < g; ++i) {
      // keep the square unless it lies inside the removed quadrant (-1,0)^2
      if (i < n && j < n) continue;
      int a = vert(i, j), b = vert(i + 1, j), c = vert(i + 1, j + 1), d = vert(i, j + 1);
      tris.push_back({a, b, c});
      tris.push_back({a, c, d});
    }
  return Mesh::build(std::move(verts), std::move(tris));
}

/// Red refinement: every cell split into four similar children.
inline Mesh uniform_refine(const Mesh& m) {
  std::vector<Eigen::Vector2d> verts = m.vertices;
  std::vector<int> edge_mid(m.n_edges());
  for (int e = 0; e < m.n_edges(); ++e) {
    const Edge& ed = m.edges[e];
    edge_mid[e] = static_cast<int>(verts.size());
    verts.push_back(0.5 * (m.vertices[ed.v0] + m.vertices[ed.v1]));
  }
  std::vector<std::array<int, 3>> tris;
  std::vector<int> parents;
  tris.reserve(4 * m.n_cells());
  parents.reserve(4 * m.n_cells());
  for (int c = 0; c < m.n_cells(); ++c) {
    const auto& t = m.cells[c];
    int m0 = edge_mid[m.cell_edges[c][0]];
    int m1 = edge_mid[m.cell_edges[c][1]];
    int m2 = edge_mid[m.cell_edges[c][2]];
    tris.push_back({t[0], m2, m1});
    tris.push_back({t[1], m0, m2});
    tris.push_back({t[2], m1, m0});
    tris.push_back({m0, m1, m2});
    for (int k = 0; k < 4; ++k) parents.push_back(c);
  }
  return Mesh::build(std::move(verts), std::move(tris), {}, std::move(parents));
}

namespace detail {

/// Working state for newest-vertex bisection with recursive conforming closure.
struct BisectWork {
  std::vector<Eigen::Vector2d> verts;
  std::vector<std::array<int, 3>> cells;
  std::vector<std::array<int, 3>> neigh;
  std::vector<int> refedge;
  std::vector<int> origin;
  std::vector<char> alive;
  long bisections = 0;
  long bisection_cap = 0;

  explicit BisectWork(const Mesh& m)
      : verts(m.vertices),
        cells(m.cells),
        neigh(m.neighbors),
        refedge(m.refinement_edge),
        alive(m.n_cells(), 1) {
    origin.resize(m.n_cells());
    for (int c = 0; c < m.n_cells(); ++c) origin[c] = c;
    bisection_cap = 64L * m.n_cells() + 4096;
  }

  int facing_edge(int c, int nb) const {
    for (int k = 0; k < 3; ++k)
      if (neigh[c][k] == nb) return k;
    throw std::runtime_error("bisect: broken neighbor table");
  }

  void replace_neighbor(int c, int old_nb, int new_nb) {
    if (c < 0) return;
    neigh[c][facing_edge(c, old_nb)] = new_nb;
  }

  // Split cell c (and its compatible neighbor, if any) across the refinement edge.
  void bisect_pair(int c) {
    if (++bisections > bisection_cap)
      throw std::runtime_error("bisect: conforming closure did not terminate");
    const int r = refedge[c];
    const int peak = cells[c][r];
    const int a = cells[c][(r + 1) % 3];
    const int b = cells[c][(r + 2) % 3];
    const int n = neigh[c][r];

    const int mid = static_cast<int>(verts.size());
    verts.push_back(0.5 * (verts[a] + verts[b]));

    const int c1 = new_cell({a, mid, peak}, 1, origin[c]);
    const int c2 = new_cell({mid, b, peak}, 0, origin[c]);
    const int nb_pa = neigh[c][(r + 2) % 3];  // across (peak, a)
    const int nb_bp = neigh[c][(r + 1) % 3];  // across (b, peak)
    neigh[c1] = {c2, nb_pa, -1};
    neigh[c2] = {nb_bp, c1, -1};
    replace_neighbor(nb_pa, c, c1);
    replace_neighbor(nb_bp, c, c2);
    alive[c] = 0;

    if (n >= 0) {
      const int rn = refedge[n];
      const int peakn = cells[n][rn];
      const int an = cells[n][(rn + 1) % 3];
      const int bn = cells[n][(rn + 2) % 3];
      if (!((an == b && bn == a)))
        throw std::runtime_error("bisect: neighbor not compatibly divisible");
      const int n1 = new_cell({b, mid, peakn}, 1, origin[n]);
      const int n2 = new_cell({mid, a, peakn}, 0, origin[n]);
      const int nb_pb = neigh[n][(rn + 2) % 3];  // across (peakn, b)
      const int nb_ap = neigh[n][(rn + 1) % 3];  // across (a, peakn)
      neigh[n1] = {n2, nb_pb, c2};
      neigh[n2] = {nb_ap, n1, c1};
      replace_neighbor(nb_pb, n, n1);
      replace_neighbor(nb_ap, n, n2);
      neigh[c1][2] = n2;
      neigh[c2][2] = n1;
      alive[n] = 0;
    }
  }

  int new_cell(std::array<int, 3> vs, int re, int orig) {
    cells.push_back(vs);
    refedge.push_back(re);
    origin.push_back(orig);
    alive.push_back(1);
    neigh.push_back({-1, -1, -1});
    return static_cast<int>(cells.size()) - 1;
  }

  // Refine cell c, recursively bisecting incompatible neighbors first.
  void refine(int c) {
    std::vector<int> stack{c};
    while (!stack.empty()) {
      int t = stack.back();
      if (!alive[t]) {
        stack.pop_back();
        continue;
      }
      int n = neigh[t][refedge[t]];
      if (n >= 0 && refedge[n] != facing_edge(n, t)) {
        if (static_cast<long>(stack.size()) > bisection_cap)
          throw std::runtime_error("bisect: closure recursion did not terminate");
        stack.push_back(n);
        continue;
      }
      bisect_pair(t);
      stack.pop_back();
    }
  }

  Mesh finish() const {
    std::vector<std::array<int, 3>> out_cells;
    std::vector<int> out_refedge, out_parent;
    for (size_t c = 0; c < cells.size(); ++c) {
      if (!alive[c]) continue;
      out_cells.push_back(cells[c]);
      out_refedge.push_back(refedge[c]);
      out_parent.push_back(origin[c]);
    }
    return Mesh::build(verts, std::move(out_cells), std::move(out_refedge),
                       std::move(out_parent));
  }
};

}  // namespace detail

/// Newest-vertex bisection of all marked cells plus recursive conforming
/// closure. Cells untouched by the closure keep their ids' geometry; the
/// result is a fresh conforming mesh whose `parent` field maps each cell to
/// its ancestor in `m` (itself if unrefined).
inline Mesh bisect_refine(const Mesh& m, const MarkedSet& marked) {
  for (int c : marked.cell_ids)
    if (c < 0 || c >= m.n_cells())
      throw std::invalid_argument("bisect_refine: marked cell id out of range");
  if (marked.cell_ids.empty()) {
    Mesh copy = m;
    for (int c = 0; c < copy.n_cells(); ++c) copy.parent[c] = c;
    return copy;
  }
  detail::BisectWork work(m);
  for (int c : marked.cell_ids)
    if (work.alive[c]) work.refine(c);
  return work.finish();
}

/// ASCII mesh format: `oseen-mesh 1`, `<V> <C>`, V vertex lines, C cell lines.
inline void save_mesh(const Mesh& m, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("save_mesh: cannot open " + path);
  out << "oseen-mesh 1\n" << m.n_vertices() << " " << m.n_cells() << "\n";
  char buf[80];
  for (const auto& v : m.vertices) {
    std::snprintf(buf, sizeof(buf), "%.17g %.17g\n", v.x(), v.y());
    out << buf;
  }
  for (const auto& t : m.cells) out << t[0] << " " << t[1] << " " << t[2] << "\n";
  if (!out) throw std::runtime_error("save_mesh: write failed for " + path);
}

inline Mesh load_mesh(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("load_mesh: cannot open " + path);
  std::string tag;
  int version = 0;
  in >> tag >> version;
  if (tag != "oseen-mesh" || version != 1)
    throw std::runtime_error("load_mesh: " + path + " is not an oseen-mesh 1 file");
  int nv = 0, nc = 0;
  in >> nv >> nc;
  if (!in || nv < 3 || nc < 1) throw std::runtime_error("load_mesh: bad header counts");
  std::vector<Eigen::Vector2d> verts(nv);
  for (auto& v : verts) in >> v.x() >> v.y();
  std::vector<std::array<int, 3>> tris(nc);
  for (auto& t : tris) {
    in >> t[0] >> t[1] >> t[2];
    for (int k : t)
      if (k < 0 || k >= nv) throw std::runtime_error("load_mesh: vertex index out of range");
  }
  if (!in) throw std::runtime_error("load_mesh: truncated file " + path);
  return Mesh::build(std::move(verts), std::move(tris));
}

}  // namespace oseen
