#ifndef HESSMATCH_AA_SYSTEM_HPP
#define HESSMATCH_AA_SYSTEM_HPP

#include <variant>
#include <vector>

#include "hessmatch/numerics.hpp"

namespace hm {

// Fine-grained configuration in reduced units. positions has length n*dim.
struct AtomisticFrame {
  Vec positions;
  int frame_index = 0;
};

// j = -1 bonds atom i to a partner pinned at the origin (the pinned
// particle carries no coordinates).
struct HarmonicBond {
  int i = 0, j = 0;
  double k = 0.0, r0 = 0.0;
};

// Angle at atom j between atoms i and k.
struct HarmonicAngle {
  int i = 0, j = 0, k = 0;
  double k_theta = 0.0, theta0 = 0.0;
};

struct LennardJones {
  int i = 0, j = 0;
  double epsilon = 0.0, sigma = 1.0;
};

struct HarmonicWell {
  int i = 0;
  double k = 0.0;
  Vec center;
};

// U(r) = 1/2 r^T K r, K symmetric positive definite; exact-oracle systems.
struct QuadraticForm {
  Mat k;
};

using ForceFieldTerm =
    std::variant<HarmonicBond, HarmonicAngle, LennardJones, HarmonicWell, QuadraticForm>;

struct ForceField {
  int n_atoms = 0;
  int dim = 1;  // 1, 2 or 3
  std::vector<ForceFieldTerm> terms;

  int n_coords() const { return n_atoms * dim; }
};

double aa_energy(const AtomisticFrame& frame, const ForceField& ff);
Vec aa_forces(const AtomisticFrame& frame, const ForceField& ff);

// Full analytic Hessian; oracle use only (exactly symmetric).
Mat aa_hessian(const AtomisticFrame& frame, const ForceField& ff);

// -[F(r + eps v) - F(r - eps v)] / (2 eps), the central-difference HVP.
Vec aa_hvp_fd(const AtomisticFrame& frame, const ForceField& ff, const Vec& direction,
              double epsilon = 1e-5);

struct SampleOptions {
  double dt = 1e-3;
  double friction = 1.0;
  int thinning = 10;
  Vec initial;  // defaults to zeros (or LJ-safe spread when LJ terms present)
};

// Overdamped Langevin (Euler-Maruyama) sampling of exp(-beta U);
// burn-in of 10*count steps, then one frame every `thinning` steps.
std::vector<AtomisticFrame> sample_boltzmann(const ForceField& ff, double beta, int count,
                                             const SampleOptions& opts, RngState& rng);

}  // namespace hm

#endif
