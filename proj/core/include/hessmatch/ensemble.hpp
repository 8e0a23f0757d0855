#ifndef HESSMATCH_ENSEMBLE_HPP
#define HESSMATCH_ENSEMBLE_HPP

#include <optional>
#include <vector>

#include "hessmatch/aa_system.hpp"
#include "hessmatch/cg_map.hpp"

namespace hm {

// Frames approximately distributed as delta(xi(r) - R) exp(-beta U).
struct ConditionalEnsemble {
  Vec target_r;
  std::vector<AtomisticFrame> frames;
  double restraint_stiffness = 0.0;  // 0 marks the exact Gaussian path
  double beta = 1.0;
};

struct ConditionalOptions {
  double dt = 1e-4;
  double friction = 1.0;
  int thinning = 10;
  // Force the restraint sampler even where the exact Gaussian path applies.
  bool force_restraint = false;
};

// Exact Gaussian conditioning for QuadraticForm + LinearCGMap, stiff
// harmonic restraint sampling otherwise (stiffness >= 1e3).
ConditionalEnsemble sample_conditional(const ForceField& ff, const CGMap& map, const Vec& r_target,
                                       double beta, int count, double restraint_stiffness,
                                       RngState& rng, const ConditionalOptions& opts = {});

// Linear maps: <Xi_F F_AA>_R. Nonlinear: <Xi_F F_AA>_R + (1/beta) <div Xi_F>_R.
Vec cg_mean_force(const ConditionalEnsemble& ens, const ForceField& ff, const CGMap& map);

struct HessianEstimate {
  Mat hessian;           // symmetrized (H + H^T)/2
  Mat raw;               // estimate before symmetrization (diagnostic)
  double asymmetry = 0;  // max-norm of H - H^T before symmetrization
  Mat term1;             // <Xi_F H_AA Xi_F^T>_R
  Mat beta_cov;          // beta * Sigma(Xi_F F_AA, Xi_F F_AA)
};

struct HessianEstimateOptions {
  // Run the full nonlinear term set even for linear maps (the extra terms
  // are exactly zero there).
  bool force_full_path = false;
};

HessianEstimate cg_hessian_estimate(const ConditionalEnsemble& ens, const ForceField& ff,
                                    const CGMap& map, const HessianEstimateOptions& opts = {});

// F(R) = -log(Z(R))/beta up to an additive constant, via tensor-product
// Gauss-Legendre quadrature (64 nodes per unconstrained axis) over the
// constraint slice. Supported for linear maps (<=3 null-space dims) and
// the single-particle radial map (angular quadrature).
std::vector<double> free_energy_quadrature(const ForceField& ff, const CGMap& map,
                                           const std::vector<Vec>& r_grid, double beta);

}  // namespace hm

#endif
