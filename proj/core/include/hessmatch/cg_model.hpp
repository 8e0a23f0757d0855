#ifndef HESSMATCH_CG_MODEL_HPP
#define HESSMATCH_CG_MODEL_HPP

#include <string>
#include <variant>
#include <vector>

#include "hessmatch/numerics.hpp"

namespace hm {

struct FeatureConfig {
  int rbf_count = 12;
  double cutoff_low = 0.3;
  double cutoff_high = 1.2;
};

// W(R) = 1/2 (R - R_ref)^T A (R - R_ref); trainable parameters are the
// upper triangle of A. Realizes the HVP objective's closed-form optimum
// (A = H_CG) for quadratic reference systems.
struct QuadraticBaseline {
  Mat a;
  Vec r_ref;
};

// Pair-distance MLP potential: W(R) = sum over bead pairs within the
// cutoff of switch(d) * mlp(rbf(d)). SiLU activations, exponential-normal
// radial basis, cosine switching to zero at cutoff_high.
struct MlpPotential {
  int n_beads = 0;
  int dim = 1;
  FeatureConfig features;
  std::vector<int> hidden;  // hidden layer widths
  Vec params;               // per layer: W row-major then b
};

struct CGModelState {
  std::variant<QuadraticBaseline, MlpPotential> kind;
};

CGModelState make_quadratic_baseline(const Mat& a, const Vec& r_ref);
CGModelState make_mlp(int n_beads, int dim, const std::vector<int>& hidden,
                      const FeatureConfig& features, RngState& init_rng);

double model_energy(const CGModelState& m, const Vec& r);
Vec model_forces(const CGModelState& m, const Vec& r);

// Exact H v via the closed-form pair geometry second derivatives and a
// second-order scalar jet through the pair network.
Vec model_hvp(const CGModelState& m, const Vec& r, const Vec& v);

// Upstream cotangents of a scalar loss built from energy, forces, and
// the HVPs along `probes` (hvps[k] pairs with probes[k]).
struct ModelCotangents {
  double energy = 0.0;
  Vec forces;                // empty = no force contribution
  std::vector<Vec> probes;
  std::vector<Vec> hvps;
};

Vec model_param_grad(const CGModelState& m, const Vec& r, const ModelCotangents& cot);

std::size_t param_count(const CGModelState& m);
Vec get_params(const CGModelState& m);
void set_params(CGModelState& m, const Vec& params);

void write_checkpoint(const std::string& path, const CGModelState& m);
CGModelState read_checkpoint(const std::string& path);

}  // namespace hm

#endif
