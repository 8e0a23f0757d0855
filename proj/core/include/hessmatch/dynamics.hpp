#ifndef HESSMATCH_DYNAMICS_HPP
#define HESSMATCH_DYNAMICS_HPP

#include <cstdint>
#include <vector>

#include "hessmatch/cg_model.hpp"

namespace hm {

struct SimConfig {
  double dt = 1e-3;
  double friction = 1.0;
  double beta = 1.0;  // may be +inf for zero-noise descent
  long steps = 0;
  int thinning = 1;
  std::uint64_t seed = 0;
  Vec initial;
};

// Overdamped Euler-Maruyama: R += (dt/gamma) F(R) + sqrt(2 dt/(beta gamma)) xi.
// Records a frame every `thinning` steps (the initial state is not recorded).
std::vector<Vec> simulate(const CGModelState& model, const SimConfig& cfg);

}  // namespace hm

#endif
