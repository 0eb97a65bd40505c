#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <stdexcept>
#include <vector>

namespace oseen {

/// Quadrature rule on the reference triangle, points in barycentric
/// coordinates, weights summing to the reference measure 1/2.
struct QuadratureRule {
  std::vector<Eigen::Vector3d> points;
  std::vector<double> weights;
  int degree = 0;

  int size() const { return static_cast<int>(points.size()); }
};

/// Gauss rule on the reference edge [0,1], weights summing to 1.
struct EdgeRule {
  std::vector<double> points;
  std::vector<double> weights;
  int degree = 0;

  int size() const { return static_cast<int>(points.size()); }
};

namespace detail {

inline void add_center(QuadratureRule& q, double w) {
  q.points.emplace_back(1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0);
  q.weights.push_back(w);
}

// permutations of (1-2a, a, a)
inline void add_s21(QuadratureRule& q, double a, double w) {
  const double b = 1.0 - 2.0 * a;
  q.points.emplace_back(b, a, a);
  q.points.emplace_back(a, b, a);
  q.points.emplace_back(a, a, b);
  for (int k = 0; k < 3; ++k) q.weights.push_back(w);
}

// permutations of (b, a, a) with a = (1-b)/2
inline void add_s21b(QuadratureRule& q, double b, double w) {
  add_s21(q, 0.5 * (1.0 - b), w);
}

// all six permutations of (a, b, 1-a-b)
inline void add_s111(QuadratureRule& q, double a, double b, double w) {
  const double c = 1.0 - a - b;
  q.points.emplace_back(c, a, b);
  q.points.emplace_back(c, b, a);
  q.points.emplace_back(a, c, b);
  q.points.emplace_back(b, c, a);
  q.points.emplace_back(a, b, c);
  q.points.emplace_back(b, a, c);
  for (int k = 0; k < 6; ++k) q.weights.push_back(w);
}

// cyclic rotations of (a, b, c)
inline void add_rot3(QuadratureRule& q, double a, double b, double c, double w) {
  q.points.emplace_back(c, a, b);
  q.points.emplace_back(b, c, a);
  q.points.emplace_back(a, b, c);
  for (int k = 0; k < 3; ++k) q.weights.push_back(w);
}

}  // namespace detail

/// Symmetric rule on the reference triangle, exact for polynomials of total
/// degree <= `degree` (supported: 1..10).
inline QuadratureRule triangle_rule(int degree) {
  using namespace detail;
  if (degree < 0 || degree > 10)
    throw std::invalid_argument("triangle_rule: degree must be in [0, 10]");
  QuadratureRule q;
  q.degree = std::max(degree, 1);
  switch (q.degree) {
    case 1:
      add_center(q, 0.5);
      break;
    case 2:
      add_s21(q, 1.0 / 6.0, 1.0 / 6.0);
      break;
    case 3:
      add_center(q, -0.28125);
      add_s21(q, 0.2, 25.0 / 96.0);
      break;
    case 4:
      add_s21(q, 0.091576213509770743460, 0.054975871827660933819);
      add_s21(q, 0.44594849091596488632, 0.11169079483900573285);
      break;
    case 5:
      add_center(q, 0.1125);
      add_s21(q, 0.10128650732345633880, 0.062969590272413576298);
      add_s21(q, 0.47014206410511508977, 0.066197076394253090369);
      break;
    case 6:
      add_s21(q, 0.063089014491502228340, 0.025422453185103408460);
      add_s21(q, 0.24928674517091042129, 0.058393137863189683013);
      add_s111(q, 0.053145049844816947353, 0.31035245103378440542,
               0.041425537809186787597);
      break;
    case 7:
      add_rot3(q, 0.062382265094402118174, 0.067517867073916085443,
               1.0 - 0.062382265094402118174 - 0.067517867073916085443,
               0.026517028157436251429);
      add_rot3(q, 0.055225456656926611737, 0.32150249385198182267,
               1.0 - 0.055225456656926611737 - 0.32150249385198182267,
               0.043881408714446055037);
      add_rot3(q, 0.034324302945097146470, 0.66094919618673565761,
               0.30472650086816719592, 0.028775042784981585738);
      add_rot3(q, 0.51584233435359177926, 0.27771616697639178257,
               0.20644149867001643817, 0.067493187009802774463);
      break;
    case 8:
      add_center(q, 0.0721578038388935841255455552445323);
      add_s21(q, 0.170569307751760206622293501491464,
              0.0516086852673591251408957751460645);
      add_s21(q, 0.0505472283170309754584235505965989,
              0.0162292488115990401554629641708902);
      add_s21(q, 0.459292588292723156028815514494169,
              0.0475458171336423123969480521942921);
      add_s111(q, 0.008394777409957605337213834539296,
               0.263112829634638113421785786284643,
               0.0136151570872174971324223450369544);
      break;
    case 9:
      add_center(q, 0.0485678981413994169096209912536443);
      add_s21b(q, 0.020634961602524744433, 0.0156673501135695352684274156436046);
      add_s21b(q, 0.12582081701412672546, 0.0389137705023871396583696781497019);
      add_s21(q, 0.188203535619032730240961280467335,
              0.0398238694636051265164458871320226);
      add_s21(q, 0.0447295133944527098651065899662763,
              0.0127888378293490156308393992794999);
      add_s111(q, 0.0368384120547362836348175987833851,
               0.2219629891607656956751025276931919,
               0.0216417696886446886446886446886446);
      break;
    case 10:
      add_center(q, 0.0454089951913767900476432975500142);
      add_s21b(q, 0.028844733232685245264984935583748,
               0.0183629788782333523585030359456832);
      add_s21(q, 0.109481575485037054795458631340522,
              0.0226605297177639673913028223692986);
      add_s111(q, 0.141707219414879954756683250476361,
               0.307939838764120950165155022930631,
               0.0363789584227100543021575883096803);
      add_s111(q, 0.025003534762686386073988481007746,
               0.246672560639902693917276465411176,
               0.0141636212655287424183685307910495);
      add_s111(q, 0.0095408154002994575801528096228873,
               0.0668032510122002657735402127620247,
               4.71083348186641172996373548344341e-03);
      break;
  }
  return q;
}

namespace detail {

// Legendre polynomial value and derivative at x via the three-term recurrence.
inline std::pair<double, double> legendre(int n, double x) {
  double p0 = 1.0, p1 = x;
  if (n == 0) return {1.0, 0.0};
  for (int k = 2; k <= n; ++k) {
    double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
    p0 = p1;
    p1 = p2;
  }
  double dp = n * (x * p1 - p0) / (x * x - 1.0);
  return {p1, dp};
}

}  // namespace detail

/// Gauss-Legendre rule on [0,1], exact for polynomials of degree <= `degree`
/// (supported: 1..11). Nodes are computed by Newton iteration to machine
/// precision.
inline EdgeRule edge_rule(int degree) {
  if (degree < 0 || degree > 11)
    throw std::invalid_argument("edge_rule: degree must be in [0, 11]");
  const int n = std::max(1, (degree + 2) / 2);  // 2n-1 >= degree
  EdgeRule r;
  r.degree = 2 * n - 1;
  r.points.resize(n);
  r.weights.resize(n);
  for (int i = 0; i < n; ++i) {
    // root of P_n on (-1,1)
    double x = std::cos(M_PI * (4.0 * (i + 1) - 1.0) / (4.0 * n + 2.0));
    for (int it = 0; it < 100; ++it) {
      auto [p, dp] = detail::legendre(n, x);
      double dx = p / dp;
      x -= dx;
      if (std::abs(dx) < 1e-15) break;
    }
    auto [p, dp] = detail::legendre(n, x);
    (void)p;
    double w = 2.0 / ((1.0 - x * x) * dp * dp);
    r.points[i] = 0.5 * (1.0 - x);  // map to [0,1]; node order is descending in x
    r.weights[i] = 0.5 * w;
  }
  return r;
}

/// Spec-facing alias: the per-operation name for the triangle rule.
inline QuadratureRule quadrature_rule(int degree) { return triangle_rule(degree); }

}  // namespace oseen
