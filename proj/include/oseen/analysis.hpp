#pragma once

#include <cmath>
#include <complex>
#include <cstdio>
#include <fstream>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "oseen/adaptivity.hpp"
#include "oseen/assembly.hpp"
#include "oseen/eigensolver.hpp"
#include "oseen/estimator.hpp"
#include "oseen/mesh.hpp"

namespace oseen {

/// Power-law fit lambda_h ~ lambda_extr + C h^alpha.
struct RateFit {
  double lambda_extr = 0.0;
  double C = 0.0;
  double alpha = 0.0;
  double rms = 0.0;
};

/// Least-squares fit by grid search over alpha in [0.25, 10] (step 1e-3)
/// with exact linear least squares for (lambda_extr, C) at each alpha.
inline RateFit fit_rate(const std::vector<double>& hs, const std::vector<double>& lambdas) {
  const int n = static_cast<int>(hs.size());
  if (n < 3 || lambdas.size() != hs.size())
    throw std::invalid_argument("fit_rate: need at least 3 samples");
  for (int i = 1; i < n; ++i)
    if (!(hs[i] < hs[i - 1]))
      throw std::invalid_argument("fit_rate: mesh sizes must be strictly decreasing");

  RateFit best;
  double best_sse = std::numeric_limits<double>::max();
  double ybar = 0.0;
  for (double l : lambdas) ybar += l;
  ybar /= n;

  for (int ia = 0; ia <= 9750; ++ia) {
    const double alpha = 0.25 + 1e-3 * ia;
    double xbar = 0.0;
    std::vector<double> t(n);
    for (int i = 0; i < n; ++i) {
      t[i] = std::pow(hs[i], alpha);
      xbar += t[i];
    }
    xbar /= n;
    double sxx = 0.0, sxy = 0.0;
    for (int i = 0; i < n; ++i) {
      sxx += (t[i] - xbar) * (t[i] - xbar);
      sxy += (t[i] - xbar) * (lambdas[i] - ybar);
    }
    if (sxx <= 0.0) continue;
    const double C = sxy / sxx;
    const double a = ybar - C * xbar;
    double sse = 0.0;
    for (int i = 0; i < n; ++i) {
      const double r = lambdas[i] - a - C * t[i];
      sse += r * r;
    }
    if (sse < best_sse) {
      best_sse = sse;
      best = {a, C, alpha, std::sqrt(sse / n)};
    }
  }
  return best;
}

/// Complex entry point: rejects eigenvalues with non-negligible imaginary
/// parts, then fits the real parts.
inline RateFit fit_rate(const std::vector<double>& hs, const std::vector<Complex>& lambdas) {
  std::vector<double> re(lambdas.size());
  for (size_t i = 0; i < lambdas.size(); ++i) {
    if (std::abs(lambdas[i].imag()) > 1e-8 * std::abs(lambdas[i]))
      throw std::invalid_argument("fit_rate: eigenvalue has non-negligible imaginary part");
    re[i] = lambdas[i].real();
  }
  return fit_rate(hs, re);
}

enum class Domain { square, lshape };

inline const char* domain_name(Domain d) { return d == Domain::square ? "square" : "lshape"; }

inline Mesh make_domain_mesh(Domain d, int n) {
  return d == Domain::square ? generate_square(n) : generate_lshape(n);
}

struct StudyRow {
  int N = 0;
  double h = 0.0;
  long dof = 0;
  Complex lambda{0.0, 0.0};
  double err = 0.0;
  double eta2 = 0.0;
  double etastar2 = 0.0;
  double eff = 0.0;
  double effstar = 0.0;
  double order_so_far = 0.0;
};

struct UniformStudy {
  std::vector<StudyRow> rows;               // one per level, for the target eigenvalue
  std::vector<RateFit> fits;                // per eigenvalue index 0..nev-1
  std::vector<std::vector<Complex>> lambdas;  // [level][index]
  int target_index = 0;
  bool imag_warning = false;
};

/// Uniform refinement study: per-level eigensolve (primal and dual), both
/// estimators for the target pair, rate fits for each of the first nev
/// eigenvalues, and err/eff columns against the fitted lambda_extr.
inline UniformStudy uniform_study(Domain domain, const OseenParams& params,
                                  ElementKind element, const std::vector<int>& levels,
                                  const SolverConfig& solver_config, int target_index = 0) {
  if (levels.size() < 3)
    throw std::invalid_argument("uniform_study: need at least 3 mesh levels");
  params.check();
  SolverConfig scfg = solver_config;
  scfg.nev = std::max(scfg.nev, target_index + 1);

  UniformStudy study;
  study.target_index = target_index;
  std::vector<double> hs;
  for (int N : levels) {
    const Mesh mesh = make_domain_mesh(domain, N);
    const DofMap dofmap = build_dofmap(mesh, element);
    const Forms forms = assemble_forms(mesh, dofmap, params);
    const Pencil primal = build_primal_pencil(forms, dofmap);
    const std::vector<EigenPair> pairs = shift_invert_solve(primal, scfg);
    const Pencil dual = build_dual_pencil(forms, dofmap);
    const std::vector<EigenPair> dual_pairs = shift_invert_solve(dual, scfg);

    const EigenPair& target = pairs.at(target_index);
    size_t dbest = 0;
    for (size_t i = 1; i < dual_pairs.size(); ++i)
      if (std::abs(dual_pairs[i].lambda - target.lambda) <
          std::abs(dual_pairs[dbest].lambda - target.lambda))
        dbest = i;
    const EstimateReport prep = primal_indicators(mesh, dofmap, params, target);
    const EstimateReport drep = dual_indicators(mesh, dofmap, params, dual_pairs[dbest]);

    StudyRow row;
    row.N = N;
    row.h = mesh.max_diameter();
    row.dof = dofmap.reported_dof();
    row.lambda = target.lambda;
    row.eta2 = prep.global2();
    row.etastar2 = drep.global2();
    study.rows.push_back(row);
    hs.push_back(row.h);

    std::vector<Complex> level_lambdas;
    for (int k = 0; k < scfg.nev && k < static_cast<int>(pairs.size()); ++k) {
      level_lambdas.push_back(pairs[k].lambda);
      if (std::abs(pairs[k].lambda.imag()) > 1e-8 * std::abs(pairs[k].lambda))
        study.imag_warning = true;
    }
    study.lambdas.push_back(std::move(level_lambdas));
  }

  for (int k = 0; k < scfg.nev; ++k) {
    std::vector<double> vals;
    for (const auto& level : study.lambdas) vals.push_back(level.at(k).real());
    study.fits.push_back(fit_rate(hs, vals));
  }

  const double lref = study.fits.at(target_index).lambda_extr;
  for (size_t i = 0; i < study.rows.size(); ++i) {
    StudyRow& row = study.rows[i];
    row.err = std::abs(row.lambda - lref) / std::abs(lref);
    row.eff = row.err / row.eta2;
    row.effstar = row.err / row.etastar2;
    row.order_so_far =
        i == 0 ? 0.0
               : std::log(row.err / study.rows[i - 1].err) / std::log(row.h / study.rows[i - 1].h);
  }
  return study;
}

struct StokesLimitRow {
  int i = 0;
  double beta_norm = 0.0;
  int k = 0;
  Complex lambda{0.0, 0.0};
  double stokes_re = 0.0;
  double gap = 0.0;
};

struct StokesLimitStudy {
  std::vector<StokesLimitRow> rows;
  std::vector<double> stokes;      // reference beta = 0 eigenvalues (real parts)
  std::vector<double> gap_by_exp;  // max_k gap for each exponent, in input order
  std::vector<int> exponents;
};

/// Oseen -> Stokes limit: solve the same mesh with beta = (2^-i, 0) and
/// compare the first k eigenvalues to the code's own beta = 0 spectrum.
inline StokesLimitStudy stokes_limit_study(Domain domain, ElementKind element,
                                           const std::vector<int>& exponents, int N,
                                           double nu, const SolverConfig& solver_config,
                                           int k_count = 4) {
  if (exponents.empty())
    throw std::invalid_argument("stokes_limit_study: no exponents given");
  SolverConfig scfg = solver_config;
  scfg.nev = std::max(scfg.nev, k_count);
  const Mesh mesh = make_domain_mesh(domain, N);
  const ElementKind kind = element;
  const DofMap dofmap = build_dofmap(mesh, kind);

  OseenParams stokes_params;
  stokes_params.nu = nu;
  stokes_params.beta = {0.0, 0.0};
  const Forms sforms = assemble_forms(mesh, dofmap, stokes_params);
  const Pencil spencil = build_primal_pencil(sforms, dofmap);
  const std::vector<EigenPair> spairs = shift_invert_solve(spencil, scfg);

  StokesLimitStudy study;
  study.exponents = exponents;
  for (int k = 0; k < k_count; ++k) study.stokes.push_back(spairs.at(k).lambda.real());

  for (int i : exponents) {
    OseenParams params;
    params.nu = nu;
    params.beta = {std::pow(2.0, -i), 0.0};
    const Forms forms = assemble_forms(mesh, dofmap, params);
    const Pencil pencil = build_primal_pencil(forms, dofmap);
    const std::vector<EigenPair> pairs = shift_invert_solve(pencil, scfg);
    double gap_max = 0.0;
    for (int k = 0; k < k_count; ++k) {
      StokesLimitRow row;
      row.i = i;
      row.beta_norm = params.beta.norm();
      row.k = k;
      row.lambda = pairs.at(k).lambda;
      row.stokes_re = study.stokes[k];
      row.gap = std::abs(pairs.at(k).lambda - Complex(row.stokes_re, 0.0));
      gap_max = std::max(gap_max, row.gap);
      study.rows.push_back(row);
    }
    study.gap_by_exp.push_back(gap_max);
  }
  return study;
}

namespace detail {

inline std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.12g", v);
  return buf;
}

}  // namespace detail

// CSV schemas (exact headers fixed by the external interface)

inline void write_uniform_csv(const UniformStudy& study, std::ostream& out) {
  out << "N,h,dof,lambda_re,lambda_im,err,eta2,etastar2,eff,effstar\n";
  using detail::fmt;
  for (const StudyRow& r : study.rows)
    out << r.N << "," << fmt(r.h) << "," << r.dof << "," << fmt(r.lambda.real()) << ","
        << fmt(r.lambda.imag()) << "," << fmt(r.err) << "," << fmt(r.eta2) << ","
        << fmt(r.etastar2) << "," << fmt(r.eff) << "," << fmt(r.effstar) << "\n";
  for (size_t k = 0; k < study.fits.size(); ++k)
    out << "# fit k=" << k << " lambda_extr=" << fmt(study.fits[k].lambda_extr)
        << " C=" << fmt(study.fits[k].C) << " alpha=" << fmt(study.fits[k].alpha)
        << " rms=" << fmt(study.fits[k].rms) << "\n";
}

inline void write_adapt_csv(const std::vector<AdaptRecord>& records, std::ostream& out) {
  out << "iter,dof,lambda_re,lambda_im,err,R,D,J,eta2,eff\n";
  using detail::fmt;
  for (const AdaptRecord& r : records)
    out << r.iteration << "," << r.dof << "," << fmt(r.lambda.real()) << ","
        << fmt(r.lambda.imag()) << "," << fmt(r.err) << "," << fmt(r.R) << ","
        << fmt(r.D) << "," << fmt(r.J) << "," << fmt(r.estimator2) << "," << fmt(r.eff)
        << "\n";
}

inline void write_stokes_csv(const StokesLimitStudy& study, std::ostream& out) {
  out << "i,beta_norm,k,lambda_re,lambda_im,stokes_re,gap\n";
  using detail::fmt;
  for (const StokesLimitRow& r : study.rows)
    out << r.i << "," << fmt(r.beta_norm) << "," << r.k << "," << fmt(r.lambda.real())
        << "," << fmt(r.lambda.imag()) << "," << fmt(r.stokes_re) << "," << fmt(r.gap)
        << "\n";
}

/// Least-squares slope of log(err) against log(dof) over the given records.
inline double loglog_slope(const std::vector<double>& dofs, const std::vector<double>& errs) {
  const int n = static_cast<int>(dofs.size());
  if (n < 2 || errs.size() != dofs.size())
    throw std::invalid_argument("loglog_slope: need matching samples");
  double xb = 0, yb = 0;
  for (int i = 0; i < n; ++i) {
    xb += std::log(dofs[i]);
    yb += std::log(errs[i]);
  }
  xb /= n;
  yb /= n;
  double sxx = 0, sxy = 0;
  for (int i = 0; i < n; ++i) {
    sxx += (std::log(dofs[i]) - xb) * (std::log(dofs[i]) - xb);
    sxy += (std::log(dofs[i]) - xb) * (std::log(errs[i]) - yb);
  }
  return sxy / sxx;
}

}  // namespace oseen
