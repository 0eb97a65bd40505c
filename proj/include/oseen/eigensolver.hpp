#pragma once

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <Eigen/Sparse>
#include <Eigen/SparseLU>

#include <algorithm>
#include <complex>
#include <random>
#include <stdexcept>
#include <vector>

#include "oseen/assembly.hpp"

namespace oseen {

using Complex = std::complex<double>;
using VectorXc = Eigen::VectorXcd;
using MatrixXc = Eigen::MatrixXcd;

struct singular_pencil_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct convergence_error : std::runtime_error {
  std::vector<double> best_residuals;
  convergence_error(const std::string& msg, std::vector<double> res)
      : std::runtime_error(msg), best_residuals(std::move(res)) {}
};

/// One computed eigenpair with recovered full fields: velocity coefficients
/// (x component then y component, Dirichlet entries zero), zero-mean pressure
/// coefficients. Normalized to ||u||_{L2} = 1 with the phase fixed by making
/// the largest-modulus velocity coefficient real positive.
struct EigenPair {
  Complex lambda;
  VectorXc u;  // 2 * n_vel
  VectorXc p;  // n_press
  double residual = 0.0;
};

struct SolverConfig {
  int nev = 4;
  Complex shift{0.0, 0.0};
  double tol = 1e-9;
  int max_krylov = 0;  // 0 = automatic (max(40, 2*nev + 8))
  int dense_threshold = 800;
  unsigned long seed = 42;
  int max_restarts = 120;

  int krylov_dim() const {
    int m = max_krylov > 0 ? max_krylov : std::max(40, 2 * nev + 8);
    if (m < 2 * nev + 8)
      throw std::invalid_argument("SolverConfig: max_krylov must be >= 2*nev + 8");
    return m;
  }

  void check() const {
    if (nev < 1) throw std::invalid_argument("SolverConfig: nev must be >= 1");
    if (!(tol > 0.0)) throw std::invalid_argument("SolverConfig: tol must be positive");
  }
};

// Ritz values of the shift-inverted operator smaller than this are images of
// the infinite eigenvalues from the singular M block and are discarded. The
// zero eigenvalue of (K - sigma*M)^{-1} M is defective, so roundoff spreads
// it to sqrt(eps)-level magnitudes (~1e-8); the cutoff sits well above that
// while keeping every finite eigenvalue with |lambda - sigma| < 1e6.
inline constexpr double kInfiniteModeThreshold = 1e-6;

namespace detail {

inline VectorXc apply_real(const SpMat& a, const VectorXc& x) {
  return a * x.real() + Complex(0.0, 1.0) * (a * x.imag());
}

inline double pencil_residual(const Pencil& pc, Complex lambda, const VectorXc& x) {
  VectorXc r = apply_real(pc.K, x) - lambda * apply_real(pc.M, x);
  return r.norm() / x.norm();
}

/// Reduced eigenvector -> EigenPair with normalization conventions applied.
/// Algebraic pencils (no recovery data) report the raw eigenvector in u.
inline EigenPair recover(const Pencil& pc, Complex lambda, const VectorXc& x,
                         double residual) {
  const int nf = pc.n_free, nv = pc.n_vel, np = pc.n_press;
  EigenPair ep;
  ep.lambda = lambda;
  ep.residual = residual;
  if (nv == 0) {
    ep.u = x / x.norm();
    int jmax = 0;
    for (int i = 0; i < ep.u.size(); ++i)
      if (std::abs(ep.u[i]) > std::abs(ep.u[jmax])) jmax = i;
    const Complex ph = std::conj(ep.u[jmax]) / std::abs(ep.u[jmax]);
    ep.u *= ph;
    return ep;
  }
  ep.u = VectorXc::Zero(2 * nv);
  for (int f = 0; f < nf; ++f) {
    const int dof = pc.free_to_dof[f];
    ep.u[dof] = x[f];
    ep.u[nv + dof] = x[nf + f];
  }
  ep.p = x.segment(2 * nf, np);
  if (pc.kind == PencilKind::dual) ep.p = -ep.p;

  const VectorXc ux = ep.u.head(nv), uy = ep.u.tail(nv);
  const double norm2 = (ux.adjoint() * apply_real(pc.scalar_mass, ux) +
                        uy.adjoint() * apply_real(pc.scalar_mass, uy))
                           .value()
                           .real();
  if (!(norm2 > 0.0)) throw std::runtime_error("recover: zero velocity eigenvector");
  const double scale = 1.0 / std::sqrt(norm2);
  ep.u *= scale;
  ep.p *= scale;

  // snap the pressure mean to zero exactly
  Complex pmean(0.0, 0.0);
  for (int k = 0; k < np; ++k) pmean += pc.pressure_mean[k] * ep.p[k];
  ep.p.array() -= pmean / pc.domain_volume;

  int imax = 0;
  double amax = 0.0;
  for (int i = 0; i < ep.u.size(); ++i)
    if (std::abs(ep.u[i]) > amax) {
      amax = std::abs(ep.u[i]);
      imax = i;
    }
  const Complex phase = std::conj(ep.u[imax]) / amax;
  ep.u *= phase;
  ep.p *= phase;

  // after phase fixing, an essentially real pair is snapped to exactly real
  double im_u = 0.0, im_p = 0.0;
  for (int i = 0; i < ep.u.size(); ++i) im_u = std::max(im_u, std::abs(ep.u[i].imag()));
  for (int k = 0; k < np; ++k) im_p = std::max(im_p, std::abs(ep.p[k].imag()));
  if (std::abs(lambda.imag()) <= 1e-12 * std::abs(lambda) && im_u <= 1e-12 * amax &&
      im_p <= 1e-10) {
    ep.lambda = Complex(lambda.real(), 0.0);
    ep.u = ep.u.real().cast<Complex>();
    ep.p = ep.p.real().cast<Complex>();
  }
  return ep;
}

/// Rebuild the reduced vector of a recovered pair (multiplier = 0).
inline VectorXc reduce(const Pencil& pc, const EigenPair& ep) {
  const int nf = pc.n_free, nv = pc.n_vel, np = pc.n_press;
  if (nv == 0) return ep.u;
  VectorXc x = VectorXc::Zero(pc.dim());
  for (int f = 0; f < nf; ++f) {
    const int dof = pc.free_to_dof[f];
    x[f] = ep.u[dof];
    x[nf + f] = ep.u[nv + dof];
  }
  x.segment(2 * nf, np) = pc.kind == PencilKind::dual ? (-ep.p).eval() : ep.p;
  return x;
}

// Swap the adjacent diagonal entries T(k,k), T(k+1,k+1) of a complex Schur
// form by a unitary similarity, accumulating Q.
inline void swap_schur(MatrixXc& T, MatrixXc& Q, int k) {
  const Complex t11 = T(k, k), t12 = T(k, k + 1), t22 = T(k + 1, k + 1);
  const Complex x1 = t12, x2 = t22 - t11;
  const double nx = std::sqrt(std::norm(x1) + std::norm(x2));
  if (nx <= 1e-300) return;  // equal eigenvalues, nothing to reorder
  Eigen::Matrix2cd G;
  G << x1 / nx, -std::conj(x2) / nx, x2 / nx, std::conj(x1) / nx;
  T.middleCols(k, 2) = (T.middleCols(k, 2) * G).eval();
  T.middleRows(k, 2) = (G.adjoint() * T.middleRows(k, 2)).eval();
  Q.middleCols(k, 2) = (Q.middleCols(k, 2) * G).eval();
  T(k + 1, k) = 0.0;
}

// Move the `want` highest-|diagonal| entries of T to the leading positions.
inline void order_schur(MatrixXc& T, MatrixXc& Q, int want) {
  const int m = static_cast<int>(T.rows());
  for (int i = 0; i < std::min(want, m); ++i) {
    int jbest = i;
    for (int j = i + 1; j < m; ++j)
      if (std::abs(T(j, j)) > std::abs(T(jbest, jbest))) jbest = j;
    for (int j = jbest; j > i; --j) swap_schur(T, Q, j - 1);
  }
}

// Eigenvector of the upper-triangular T for the eigenvalue at position i.
inline VectorXc triangular_eigenvector(const MatrixXc& T, int i) {
  VectorXc y = VectorXc::Zero(T.rows());
  y[i] = 1.0;
  const double tnorm = T.norm();
  for (int j = i - 1; j >= 0; --j) {
    Complex s = T(j, i);
    for (int l = j + 1; l < i; ++l) s += T(j, l) * y[l];
    Complex d = T(j, j) - T(i, i);
    if (std::abs(d) < 1e-14 * (tnorm + 1.0))
      d = Complex(1e-14 * (tnorm + 1.0), 0.0);
    y[j] = -s / d;
  }
  return y;
}

struct RitzCandidate {
  Complex lambda;
  VectorXc x;
  double residual;
};

inline void sort_by_shift_distance(std::vector<RitzCandidate>& v, Complex shift) {
  std::stable_sort(v.begin(), v.end(), [&](const RitzCandidate& a, const RitzCandidate& b) {
    return std::abs(a.lambda - shift) < std::abs(b.lambda - shift);
  });
}

// Keep nev pairs but never split a conjugate pair of a real pencil.
inline std::vector<RitzCandidate> trim_conjugate_closed(std::vector<RitzCandidate> v,
                                                        int nev) {
  if (static_cast<int>(v.size()) <= nev) return v;
  std::vector<RitzCandidate> out(v.begin(), v.begin() + nev);
  for (int i = nev; i < static_cast<int>(v.size()); ++i) {
    const Complex lam = v[i].lambda;
    if (std::abs(lam.imag()) <= 1e-8 * (1.0 + std::abs(lam))) continue;
    bool partner_kept = false, self_kept = false;
    for (const auto& k : out) {
      if (std::abs(k.lambda - std::conj(lam)) <= 1e-6 * (1.0 + std::abs(lam)))
        partner_kept = true;
      if (std::abs(k.lambda - lam) <= 1e-12 * (1.0 + std::abs(lam))) self_kept = true;
    }
    if (partner_kept && !self_kept) out.push_back(v[i]);
  }
  return out;
}

}  // namespace detail

/// Full spectrum of the pencil by dense reduction: eigendecompose K^{-1} M;
/// nonzero eigenvalues mu map to lambda = 1/mu, the M-nullspace gives mu = 0
/// (infinite eigenvalues) and is excluded. Oracle for small instances.
inline std::vector<EigenPair> dense_solve(const Pencil& pc, int dense_threshold = 800) {
  const long n = pc.dim();
  if (n > dense_threshold)
    throw std::invalid_argument("dense_solve: pencil dimension exceeds dense threshold");
  Eigen::MatrixXd K = Eigen::MatrixXd(pc.K), M = Eigen::MatrixXd(pc.M);
  Eigen::PartialPivLU<Eigen::MatrixXd> lu(K);
  Eigen::MatrixXd Z = lu.solve(M);
  if (!((K * Z - M).norm() <= 1e-8 * (M.norm() + 1.0)))
    throw singular_pencil_error("dense_solve: K factorization failed (singular pencil?)");
  Eigen::EigenSolver<Eigen::MatrixXd> es(Z);
  if (es.info() != Eigen::Success)
    throw std::runtime_error("dense_solve: eigendecomposition failed");
  std::vector<detail::RitzCandidate> cands;
  for (long i = 0; i < n; ++i) {
    const Complex mu = es.eigenvalues()[i];
    if (std::abs(mu) < kInfiniteModeThreshold) continue;
    detail::RitzCandidate c;
    c.lambda = 1.0 / mu;
    c.x = es.eigenvectors().col(i);
    c.residual = detail::pencil_residual(pc, c.lambda, c.x);
    cands.push_back(std::move(c));
  }
  detail::sort_by_shift_distance(cands, Complex(0.0, 0.0));
  std::vector<EigenPair> out;
  out.reserve(cands.size());
  for (auto& c : cands) out.push_back(detail::recover(pc, c.lambda, c.x, c.residual));
  return out;
}

/// Krylov-Schur iteration on the shift-inverted operator (K - sigma*M)^{-1} M
/// in complex arithmetic (modified Gram-Schmidt with one reorthogonalization
/// pass, direct sparse LU factorized once). Returns at least nev pairs sorted
/// by |lambda - sigma|, each with true pencil residual <= tol. Small systems
/// fall back to the dense path.
inline std::vector<EigenPair> shift_invert_solve(const Pencil& pc,
                                                 const SolverConfig& cfg) {
  cfg.check();
  const long n = pc.dim();
  const int nev = cfg.nev;

  if (n <= cfg.dense_threshold || n < 2 * nev + 10) {
    auto all = dense_solve(pc, std::max<long>(n, cfg.dense_threshold));
    if (static_cast<int>(all.size()) < nev)
      throw convergence_error("shift_invert_solve: fewer finite eigenvalues than requested",
                              {});
    std::vector<detail::RitzCandidate> cands;
    for (auto& ep : all) {
      detail::RitzCandidate c;
      c.lambda = ep.lambda;
      c.x = detail::reduce(pc, ep);
      c.residual = ep.residual;
      cands.push_back(std::move(c));
    }
    detail::sort_by_shift_distance(cands, cfg.shift);
    cands = detail::trim_conjugate_closed(std::move(cands), nev);
    std::vector<EigenPair> out;
    for (auto& c : cands) out.push_back(detail::recover(pc, c.lambda, c.x, c.residual));
    return out;
  }

  const int m = std::min<long>(cfg.krylov_dim(), n - 2);

  // real shifts keep the factorization in real arithmetic (two triangular
  // solves per application instead of one complex factorization)
  using SpMatC = Eigen::SparseMatrix<Complex>;
  Eigen::SparseLU<SpMat, Eigen::COLAMDOrdering<int>> lu_real;
  Eigen::SparseLU<SpMatC, Eigen::COLAMDOrdering<int>> lu_cplx;
  SpMatC Mc;
  const bool real_shift = cfg.shift.imag() == 0.0;
  if (real_shift) {
    SpMat A = pc.K - SpMat(cfg.shift.real() * pc.M);
    A.makeCompressed();
    lu_real.analyzePattern(A);
    lu_real.factorize(A);
    if (lu_real.info() != Eigen::Success)
      throw singular_pencil_error("shift_invert_solve: factorization of K - sigma*M failed");
  } else {
    SpMatC A = pc.K.cast<Complex>() - cfg.shift * pc.M.cast<Complex>();
    A.makeCompressed();
    lu_cplx.analyzePattern(A);
    lu_cplx.factorize(A);
    if (lu_cplx.info() != Eigen::Success)
      throw singular_pencil_error("shift_invert_solve: factorization of K - sigma*M failed");
    Mc = pc.M.cast<Complex>();
  }
  auto op = [&](const VectorXc& x) -> VectorXc {
    if (real_shift) {
      const Eigen::VectorXd xr = x.real(), xi = x.imag();
      const Eigen::VectorXd yr = lu_real.solve(pc.M * xr);
      const Eigen::VectorXd yi = lu_real.solve(pc.M * xi);
      return yr + Complex(0.0, 1.0) * yi;
    }
    return lu_cplx.solve(Mc * x);
  };

  // deterministic start vector, projected onto the range of the operator so
  // the Krylov space avoids the M-nullspace
  std::mt19937_64 rng(cfg.seed);
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  VectorXc v0(n);
  for (long i = 0; i < n; ++i) v0[i] = Complex(dist(rng), dist(rng));
  v0 = op(v0);
  if (v0.norm() == 0.0) throw std::runtime_error("shift_invert_solve: zero start vector");
  v0.normalize();

  MatrixXc V = MatrixXc::Zero(n, m + 1);
  MatrixXc H = MatrixXc::Zero(m + 1, m);
  V.col(0) = v0;
  int p = 0;  // retained Schur columns
  std::vector<double> best_residuals;

  for (int restart = 0; restart <= cfg.max_restarts; ++restart) {
    int mcur = m;
    for (int j = p; j < m; ++j) {
      VectorXc w = op(V.col(j));
      for (int pass = 0; pass < 2; ++pass)
        for (int i = 0; i <= j; ++i) {
          const Complex h = V.col(i).dot(w);
          H(i, j) += h;
          w -= h * V.col(i);
        }
      const double beta = w.norm();
      if (beta < 1e-14) {  // invariant subspace found
        H(j + 1, j) = 0.0;
        mcur = j + 1;
        break;
      }
      H(j + 1, j) = beta;
      V.col(j + 1) = w / beta;
    }

    MatrixXc S = H.topLeftCorner(mcur, mcur);
    Eigen::ComplexSchur<MatrixXc> schur(S);
    if (schur.info() != Eigen::Success)
      throw std::runtime_error("shift_invert_solve: Schur decomposition failed");
    MatrixXc T = schur.matrixT();
    MatrixXc Q = schur.matrixU();
    detail::order_schur(T, Q, mcur);

    // residual coupling of the Schur basis
    const double beta_m = (mcur == m) ? std::abs(H(m, m - 1)) : 0.0;
    Eigen::RowVectorXcd g = beta_m * Q.row(mcur - 1);

    // extract Ritz pairs for the leading block and test true residuals
    const int q = std::min(mcur, nev + 6);
    std::vector<detail::RitzCandidate> cands;
    for (int i = 0; i < q; ++i) {
      const Complex theta = T(i, i);
      if (std::abs(theta) < kInfiniteModeThreshold) continue;
      VectorXc y = detail::triangular_eigenvector(T, i);
      VectorXc z = Q.leftCols(mcur) * y.head(mcur);
      detail::RitzCandidate c;
      c.lambda = cfg.shift + 1.0 / theta;
      c.x = V.leftCols(mcur) * z;
      c.x.normalize();
      c.residual = detail::pencil_residual(pc, c.lambda, c.x);
      cands.push_back(std::move(c));
    }
    detail::sort_by_shift_distance(cands, cfg.shift);

    int converged = 0;
    for (int i = 0; i < static_cast<int>(cands.size()); ++i)
      if (cands[i].residual <= cfg.tol)
        ++converged;
      else
        break;
    best_residuals.clear();
    for (const auto& c : cands) best_residuals.push_back(c.residual);

    if (converged >= nev || mcur < m) {
      if (converged < nev)
        throw convergence_error(
            "shift_invert_solve: invariant subspace exhausted before nev converged",
            best_residuals);
      cands = detail::trim_conjugate_closed(std::move(cands), nev);
      std::vector<EigenPair> out;
      for (auto& c : cands) out.push_back(detail::recover(pc, c.lambda, c.x, c.residual));
      return out;
    }

    // Krylov-Schur restart: keep the leading block plus the residual vector
    const int keep = std::min(m - 2, std::max(nev + 2, (m + nev) / 2));
    MatrixXc Vnew = V.leftCols(mcur) * Q.leftCols(keep);
    V.leftCols(keep) = Vnew;
    V.col(keep) = V.col(mcur);
    H.setZero();
    H.topLeftCorner(keep, keep) = T.topLeftCorner(keep, keep);
    H.row(keep).head(keep) = g.head(keep);
    p = keep;
  }
  throw convergence_error("shift_invert_solve: no convergence within restart budget",
                          best_residuals);
}

struct ResidualReport {
  std::vector<double> residuals;
  double max_residual = 0.0;
  std::vector<int> violations;       // indices with residual > tol
  bool conjugates_paired = true;     // complex eigenvalues closed under conjugation
  bool ok() const { return violations.empty() && conjugates_paired; }
};

/// Recompute ||K x - lambda M x|| / ||x|| for every pair and audit conjugate
/// pairing of complex eigenvalues (real pencils only produce conjugate pairs).
inline ResidualReport verify_residuals(const Pencil& pc,
                                       const std::vector<EigenPair>& pairs, double tol) {
  if (pairs.empty()) throw std::invalid_argument("verify_residuals: no pairs given");
  ResidualReport rep;
  for (int i = 0; i < static_cast<int>(pairs.size()); ++i) {
    VectorXc x = detail::reduce(pc, pairs[i]);
    const double r = detail::pencil_residual(pc, pairs[i].lambda, x);
    rep.residuals.push_back(r);
    rep.max_residual = std::max(rep.max_residual, r);
    if (r > tol) rep.violations.push_back(i);
  }
  for (const auto& a : pairs) {
    if (std::abs(a.lambda.imag()) <= 1e-8 * (1.0 + std::abs(a.lambda))) continue;
    bool found = false;
    for (const auto& b : pairs)
      if (std::abs(b.lambda - std::conj(a.lambda)) <= 1e-6 * (1.0 + std::abs(a.lambda)))
        found = true;
    if (!found) rep.conjugates_paired = false;
  }
  return rep;
}

}  // namespace oseen
