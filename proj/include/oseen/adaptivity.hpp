#pragma once

#include <cmath>
#include <functional>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "oseen/assembly.hpp"
#include "oseen/dofmap.hpp"
#include "oseen/eigensolver.hpp"
#include "oseen/estimator.hpp"
#include "oseen/mesh.hpp"

namespace oseen {

enum class EstimatorKind { eta, etastar, theta };

inline const char* estimator_name(EstimatorKind k) {
  switch (k) {
    case EstimatorKind::eta: return "eta";
    case EstimatorKind::etastar: return "etastar";
    default: return "theta";
  }
}

struct AdaptConfig {
  EstimatorKind estimator = EstimatorKind::eta;
  double marking_fraction = 0.5;
  int max_iterations = 15;
  long max_dof = 200000;
  int target_index = 0;
  /// Reference eigenvalue for the err column (NaN = err not reported).
  double reference_eigenvalue = std::numeric_limits<double>::quiet_NaN();

  void check() const {
    if (!(marking_fraction > 0.0 && marking_fraction <= 1.0))
      throw std::invalid_argument("AdaptConfig: marking_fraction must be in (0, 1]");
    if (max_iterations < 1)
      throw std::invalid_argument("AdaptConfig: max_iterations must be >= 1");
    if (target_index < 0)
      throw std::invalid_argument("AdaptConfig: target_index must be >= 0");
  }
};

struct AdaptRecord {
  int iteration = 0;
  long dof = 0;
  Complex lambda{0.0, 0.0};
  double R = 0.0, D = 0.0, J = 0.0;  // components of the driving estimator
  double estimator2 = 0.0;
  double err = std::numeric_limits<double>::quiet_NaN();
  double eff = std::numeric_limits<double>::quiet_NaN();
  int marked = 0;
  int cells = 0;
};

struct AdaptResult {
  std::vector<AdaptRecord> records;
  bool completed = true;
  std::string error;
};

/// Maximum marking: mark every cell whose indicator zeta_T = sqrt(zeta_T^2)
/// satisfies zeta_T >= fraction * max_T zeta_T. The argmax cell is always
/// marked.
inline MarkedSet mark_max_strategy(const std::vector<double>& indicators2,
                                   double fraction) {
  if (indicators2.empty())
    throw std::invalid_argument("mark_max_strategy: empty indicator list");
  if (!(fraction > 0.0 && fraction <= 1.0))
    throw std::invalid_argument("mark_max_strategy: fraction must be in (0, 1]");
  double zmax = 0.0;
  for (double z2 : indicators2) zmax = std::max(zmax, std::sqrt(std::max(z2, 0.0)));
  MarkedSet marked;
  const double thr = fraction * zmax;
  for (size_t c = 0; c < indicators2.size(); ++c)
    if (std::sqrt(std::max(indicators2[c], 0.0)) >= thr)
      marked.cell_ids.push_back(static_cast<int>(c));
  return marked;
}

/// Called after each iteration with the mesh, the reports that were computed
/// (null when not needed by the chosen estimator) and the marked set.
using AdaptCallback = std::function<void(int iteration, const Mesh& mesh,
                                         const EstimateReport* primal,
                                         const EstimateReport* dual,
                                         const MarkedSet& marked)>;

/// The solve -> estimate -> mark -> refine loop. Tracks the target eigenvalue
/// across meshes by nearest-to-previous-value continuation. Solver failures
/// abort the loop, returning the records gathered so far with the cause.
inline AdaptResult adapt_loop(const Mesh& initial, const OseenParams& params,
                              ElementKind element, const SolverConfig& solver_config,
                              const AdaptConfig& adapt_config,
                              const AdaptCallback& callback = {}) {
  adapt_config.check();
  params.check();
  AdaptResult result;
  Mesh mesh = initial;
  Complex lambda_prev{0.0, 0.0};
  bool have_prev = false;

  SolverConfig scfg = solver_config;
  scfg.nev = std::max({scfg.nev, 6, adapt_config.target_index + 3});
  if (scfg.max_krylov > 0) scfg.max_krylov = std::max(scfg.max_krylov, 2 * scfg.nev + 8);

  for (int it = 0; it < adapt_config.max_iterations; ++it) {
    const DofMap dofmap = build_dofmap(mesh, element);
    std::vector<EigenPair> primal_pairs, dual_pairs;
    try {
      const Forms forms = assemble_forms(mesh, dofmap, params);
      const Pencil primal = build_primal_pencil(forms, dofmap);
      primal_pairs = shift_invert_solve(primal, scfg);
      if (adapt_config.estimator != EstimatorKind::eta) {
        const Pencil dual = build_dual_pencil(forms, dofmap);
        dual_pairs = shift_invert_solve(dual, scfg);
      }
    } catch (const std::exception& e) {
      result.completed = false;
      result.error = e.what();
      return result;
    }

    // Track by index among the |lambda - shift|-sorted candidates. Plain
    // nearest-to-previous continuation locks onto the neighboring branch on
    // the L-shape: the singular mode moves by several units per refinement
    // while the next eigenvalue barely moves.
    const EigenPair& pair = primal_pairs.at(adapt_config.target_index);
    if (have_prev && std::abs(pair.lambda - lambda_prev) > 0.5 * std::abs(lambda_prev)) {
      result.completed = false;
      result.error = "adapt_loop: eigenvalue tracking lost the target branch";
      return result;
    }
    lambda_prev = pair.lambda;
    have_prev = true;

    EstimateReport primal_rep, dual_rep;
    const EstimateReport* prep = nullptr;
    const EstimateReport* drep = nullptr;
    std::vector<double> indicators2;
    AdaptRecord rec;
    rec.iteration = it;
    rec.dof = dofmap.reported_dof();
    rec.lambda = pair.lambda;
    rec.cells = mesh.n_cells();

    if (adapt_config.estimator == EstimatorKind::eta ||
        adapt_config.estimator == EstimatorKind::theta) {
      primal_rep = primal_indicators(mesh, dofmap, params, pair);
      prep = &primal_rep;
    }
    if (adapt_config.estimator == EstimatorKind::etastar ||
        adapt_config.estimator == EstimatorKind::theta) {
      auto dual_select = [&](const std::vector<EigenPair>& pairs) -> const EigenPair& {
        size_t best = 0;
        for (size_t i = 1; i < pairs.size(); ++i)
          if (std::abs(pairs[i].lambda - pair.lambda) <
              std::abs(pairs[best].lambda - pair.lambda))
            best = i;
        return pairs[best];
      };
      dual_rep = dual_indicators(mesh, dofmap, params, dual_select(dual_pairs));
      drep = &dual_rep;
    }

    switch (adapt_config.estimator) {
      case EstimatorKind::eta:
        rec.R = primal_rep.R;
        rec.D = primal_rep.D;
        rec.J = primal_rep.J;
        rec.estimator2 = primal_rep.global2();
        indicators2 = primal_rep.per_cell;
        break;
      case EstimatorKind::etastar:
        rec.R = dual_rep.R;
        rec.D = dual_rep.D;
        rec.J = dual_rep.J;
        rec.estimator2 = dual_rep.global2();
        indicators2 = dual_rep.per_cell;
        break;
      case EstimatorKind::theta: {
        CombinedTheta t = combined_theta(primal_rep, dual_rep);
        rec.R = primal_rep.R + dual_rep.R;
        rec.D = primal_rep.D + dual_rep.D;
        rec.J = primal_rep.J + dual_rep.J;
        rec.estimator2 = t.theta * t.theta;
        indicators2 = std::move(t.per_cell);
        break;
      }
    }

    if (!std::isnan(adapt_config.reference_eigenvalue)) {
      rec.err = std::abs(pair.lambda - adapt_config.reference_eigenvalue) /
                std::abs(adapt_config.reference_eigenvalue);
      rec.eff = rec.err / rec.estimator2;
    }

    const MarkedSet marked = mark_max_strategy(indicators2, adapt_config.marking_fraction);
    rec.marked = static_cast<int>(marked.cell_ids.size());
    result.records.push_back(rec);
    if (callback) callback(it, mesh, prep, drep, marked);

    if (it + 1 >= adapt_config.max_iterations) break;
    if (rec.dof >= adapt_config.max_dof) break;
    mesh = bisect_refine(mesh, marked);
  }
  return result;
}

}  // namespace oseen
