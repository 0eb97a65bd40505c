#include <catch_amalgamated.hpp>

#include <cmath>

#include "oseen/quadrature.hpp"

using namespace oseen;

namespace {

double factorial(int n) {
  double f = 1.0;
  for (int k = 2; k <= n; ++k) f *= k;
  return f;
}

// closed-form barycentric moment: integral over the reference triangle of
// l1^a l2^b l3^c equals a! b! c! / (a+b+c+2)! (= 2*area * that ratio)
double moment(int a, int b, int c) {
  return factorial(a) * factorial(b) * factorial(c) / factorial(a + b + c + 2);
}

double integrate(const QuadratureRule& q, int a, int b, int c) {
  double s = 0.0;
  for (int i = 0; i < q.size(); ++i)
    s += q.weights[i] * std::pow(q.points[i][0], a) * std::pow(q.points[i][1], b) *
         std::pow(q.points[i][2], c);
  return s;
}

}  // namespace

TEST_CASE("triangle rules integrate all monomials up to their degree", "[quadrature]") {
  for (int degree = 1; degree <= 10; ++degree) {
    QuadratureRule q = triangle_rule(degree);
    INFO("degree " << degree);
    double wsum = 0.0;
    for (double w : q.weights) wsum += w;
    CHECK(wsum == Catch::Approx(0.5).epsilon(1e-13));
    for (int a = 0; a <= degree; ++a)
      for (int b = 0; a + b <= degree; ++b) {
        const int c = 0;  // l3 = 1 - l1 - l2 keeps the span complete with two exponents
        INFO("monomial l1^" << a << " l2^" << b);
        CHECK(integrate(q, a, b, c) == Catch::Approx(moment(a, b, c)).margin(1e-14));
      }
    // a genuinely trivariate check as well
    if (degree >= 6) CHECK(integrate(q, 2, 2, 2) == Catch::Approx(moment(2, 2, 2)).margin(1e-15));
  }
}

TEST_CASE("triangle rule spec examples", "[quadrature]") {
  QuadratureRule q = triangle_rule(8);
  CHECK(integrate(q, 0, 0, 0) == Catch::Approx(0.5));
  // l1^2 l2^2 l3^2 = 2!2!2!/8! = 1/5040
  CHECK(integrate(q, 2, 2, 2) == Catch::Approx(1.0 / 5040.0).epsilon(1e-12));
  CHECK_THROWS_AS(triangle_rule(11), std::invalid_argument);
  CHECK_THROWS_AS(triangle_rule(-1), std::invalid_argument);
}

TEST_CASE("edge rules are Gauss-exact", "[quadrature]") {
  for (int degree = 1; degree <= 11; ++degree) {
    EdgeRule r = edge_rule(degree);
    INFO("degree " << degree);
    double wsum = 0.0;
    for (double w : r.weights) wsum += w;
    CHECK(wsum == Catch::Approx(1.0).epsilon(1e-14));
    for (int k = 0; k <= degree; ++k) {
      double s = 0.0;
      for (int i = 0; i < r.size(); ++i) s += r.weights[i] * std::pow(r.points[i], k);
      CHECK(s == Catch::Approx(1.0 / (k + 1)).epsilon(1e-13));
    }
  }
  // 4-point rule integrates x^7 exactly
  EdgeRule r4 = edge_rule(7);
  REQUIRE(r4.size() == 4);
  double s = 0.0;
  for (int i = 0; i < 4; ++i) s += r4.weights[i] * std::pow(r4.points[i], 7);
  CHECK(s == Catch::Approx(0.125).epsilon(1e-14));
  CHECK_THROWS_AS(edge_rule(12), std::invalid_argument);
}
