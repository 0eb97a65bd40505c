#include <catch_amalgamated.hpp>

#include <Eigen/SparseLU>
#include <cstdio>
#include <fstream>
#include <random>

#include "oseen/assembly.hpp"
#include "oseen/eigensolver.hpp"

using namespace oseen;

namespace {

double max_abs(const SpMat& a) {
  double m = 0.0;
  for (int col = 0; col < a.outerSize(); ++col)
    for (SpMat::InnerIterator it(a, col); it; ++it) m = std::max(m, std::abs(it.value()));
  return m;
}

}  // namespace

TEST_CASE("convection vanishes for beta = 0 and is skew for constant beta", "[assembly]") {
  for (ElementKind kind : {ElementKind::mini, ElementKind::taylor_hood}) {
    Mesh mesh = generate_square(5);
    DofMap d = build_dofmap(mesh, kind);

    OseenParams stokes;
    stokes.beta = {0.0, 0.0};
    Forms f0 = assemble_forms(mesh, d, stokes);
    CHECK(max_abs(velocity_free_block(f0.convection, d)) <= 1e-14);

    OseenParams params;  // beta = (1, 0)
    Forms f = assemble_forms(mesh, d, params);
    SpMat c = velocity_free_block(f.convection, d);
    SpMat skew = SpMat(c + SpMat(c.transpose()));
    CHECK(max_abs(skew) <= 1e-12);

    std::mt19937 rng(3);
    std::uniform_real_distribution<double> dist(-1.0, 1.0);
    for (int t = 0; t < 5; ++t) {
      Eigen::VectorXd v(d.n_free);
      for (int i = 0; i < d.n_free; ++i) v[i] = dist(rng);
      CHECK(std::abs(v.dot(c * v + SpMat(c.transpose()) * v)) <= 1e-12 * v.squaredNorm());
    }
  }
}

TEST_CASE("divergence of free velocities is orthogonal to constants", "[assembly]") {
  Mesh mesh = generate_lshape(3);
  for (ElementKind kind : {ElementKind::mini, ElementKind::taylor_hood}) {
    DofMap d = build_dofmap(mesh, kind);
    Forms f = assemble_forms(mesh, d, OseenParams{});
    // b(v, 1) = 0 for every zero-trace v: columns of B summed over pressure rows
    Eigen::VectorXd ones = Eigen::VectorXd::Ones(d.n_press);
    Eigen::VectorXd bx = f.div_x.transpose() * ones;
    Eigen::VectorXd by = f.div_y.transpose() * ones;
    double worst = 0.0;
    for (int i = 0; i < d.n_vel; ++i)
      if (!d.dirichlet[i]) worst = std::max(worst, std::max(std::abs(bx[i]), std::abs(by[i])));
    CHECK(worst <= 1e-12);
  }
}

TEST_CASE("stiffness and mass are SPD on free dofs", "[assembly]") {
  for (int n : {6, 10}) {
    Mesh mesh = generate_square(n);
    for (ElementKind kind : {ElementKind::mini, ElementKind::taylor_hood}) {
      DofMap d = build_dofmap(mesh, kind);
      Forms f = assemble_forms(mesh, d, OseenParams{});
      Eigen::MatrixXd S = Eigen::MatrixXd(velocity_free_block(f.stiffness, d));
      Eigen::MatrixXd M = Eigen::MatrixXd(velocity_free_block(f.mass, d));
      CHECK((S - S.transpose()).norm() <= 1e-12 * S.norm());
      CHECK((M - M.transpose()).norm() <= 1e-12 * M.norm());
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(S), em(M);
      CHECK(es.eigenvalues().minCoeff() > 0.0);
      CHECK(em.eigenvalues().minCoeff() > 0.0);
    }
  }
}

TEST_CASE("callable beta field matches the constant-beta assembly", "[assembly]") {
  Mesh mesh = generate_square(4);
  DofMap d = build_dofmap(mesh, ElementKind::mini);
  OseenParams constant;
  constant.beta = {0.7, -0.3};
  OseenParams field;
  field.beta = {0.0, 0.0};
  field.beta_field = [](const Eigen::Vector2d&) { return Eigen::Vector2d(0.7, -0.3); };
  Forms a = assemble_forms(mesh, d, constant);
  Forms b = assemble_forms(mesh, d, field);
  CHECK(max_abs(SpMat(a.convection - b.convection)) <= 1e-14);

  // a genuinely varying divergence-free field still assembles; skew-symmetry
  // of the free block holds because div beta = 0
  OseenParams vortex;
  vortex.beta = {0.0, 0.0};
  vortex.beta_field = [](const Eigen::Vector2d& x) {
    return Eigen::Vector2d(-x.y(), x.x());
  };
  Forms v = assemble_forms(mesh, d, vortex);
  SpMat c = velocity_free_block(v.convection, d);
  SpMat skew = SpMat(c + SpMat(c.transpose()));
  CHECK(max_abs(skew) <= 1e-10);
}

TEST_CASE("pencil layout and the zero-mean multiplier", "[assembly]") {
  Mesh mesh = generate_square(10);
  DofMap d = build_dofmap(mesh, ElementKind::mini);
  Forms f = assemble_forms(mesh, d, OseenParams{});
  Pencil p = build_primal_pencil(f, d);
  CHECK(p.dim() == 2 * 281 + 121 + 1);  // free velocity + pressure + multiplier
  CHECK(d.reported_dof() == 764);

  // source solve: K x = (Mu f, 0, 0) gives a pressure with zero mean
  // interpolate a smooth field componentwise at the velocity dofs
  Eigen::VectorXd fx(d.n_vel), fy(d.n_vel);
  for (int v = 0; v < mesh.n_vertices(); ++v) {
    const auto& pt = mesh.vertices[v];
    fx[v] = std::sin(pt.x()) * std::cos(pt.y());
    fy[v] = pt.x() * pt.y();
  }
  for (int c = 0; c < mesh.n_cells(); ++c) {
    const auto ctr = mesh.centroid(c);
    fx[mesh.n_vertices() + c] = std::sin(ctr.x()) * std::cos(ctr.y());
    fy[mesh.n_vertices() + c] = ctr.x() * ctr.y();
  }
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(p.dim());
  Eigen::VectorXd mfx = f.mass * fx, mfy = f.mass * fy;
  for (int i = 0; i < d.n_vel; ++i)
    if (d.free_index[i] >= 0) {
      rhs[d.free_index[i]] = mfx[i];
      rhs[d.n_free + d.free_index[i]] = mfy[i];
    }
  Eigen::SparseLU<SpMat> lu(p.K);
  REQUIRE(lu.info() == Eigen::Success);
  Eigen::VectorXd x = lu.solve(rhs);
  Eigen::VectorXd press = x.segment(2 * d.n_free, d.n_press);
  CHECK(std::abs(f.pressure_mean.dot(press)) <= 1e-12 * press.norm());
}

TEST_CASE("dual pencil is the transpose with a symmetric Stokes limit", "[assembly]") {
  Mesh mesh = generate_square(4);
  DofMap d = build_dofmap(mesh, ElementKind::mini);

  OseenParams params;
  Forms f = assemble_forms(mesh, d, params);
  Pencil primal = build_primal_pencil(f, d);
  Pencil dual = build_dual_pencil(f, d);
  CHECK(max_abs(SpMat(dual.K - SpMat(primal.K.transpose()))) == 0.0);
  CHECK(max_abs(SpMat(dual.M - primal.M)) == 0.0);

  OseenParams stokes;
  stokes.beta = {0.0, 0.0};
  Forms f0 = assemble_forms(mesh, d, stokes);
  Pencil p0 = build_primal_pencil(f0, d);
  Pencil d0 = build_dual_pencil(f0, d);
  CHECK(max_abs(SpMat(p0.K - d0.K)) <= 1e-14);
  CHECK(max_abs(SpMat(p0.K - SpMat(p0.K.transpose()))) <= 1e-13);
}

TEST_CASE("bubble rescaling leaves the spectrum unchanged", "[assembly]") {
  Mesh mesh = generate_square(4);
  DofMap d = build_dofmap(mesh, ElementKind::mini);
  OseenParams params;
  Pencil a = build_primal_pencil(assemble_forms(mesh, d, params), d);
  Pencil b = build_primal_pencil(assemble_forms(mesh, d, params, 5.0 * 27.0), d);
  auto ea = dense_solve(a);
  auto eb = dense_solve(b);
  REQUIRE(ea.size() >= 6);
  REQUIRE(eb.size() >= 6);
  for (int k = 0; k < 6; ++k)
    CHECK(std::abs(ea[k].lambda - eb[k].lambda) <= 1e-8 * std::abs(ea[k].lambda));
}

TEST_CASE("invalid parameters are rejected", "[assembly]") {
  OseenParams bad;
  bad.nu = 0.0;
  CHECK_THROWS_AS(bad.check(), std::invalid_argument);
  Mesh mesh = generate_square(2);
  DofMap d = build_dofmap(mesh, ElementKind::mini);
  CHECK_THROWS_AS(assemble_forms(mesh, d, bad), std::invalid_argument);
}

TEST_CASE("matrix market export", "[assembly][io]") {
  Mesh mesh = generate_square(2);
  DofMap d = build_dofmap(mesh, ElementKind::mini);
  Pencil p = build_primal_pencil(assemble_forms(mesh, d, OseenParams{}), d);
  const std::string path = "pencil_K.mtx";
  write_matrix_market(p.K, path);
  std::ifstream in(path);
  std::string header;
  std::getline(in, header);
  CHECK(header == "%%MatrixMarket matrix coordinate real general");
  long rows = 0, cols = 0, nnz = 0;
  in >> rows >> cols >> nnz;
  CHECK(rows == p.dim());
  CHECK(nnz == p.K.nonZeros());
  std::remove(path.c_str());
}
