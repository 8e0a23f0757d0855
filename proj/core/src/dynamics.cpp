#include "hessmatch/dynamics.hpp"

#include <cmath>
#include <deque>
#include <sstream>

#include "hessmatch/text_io.hpp"

namespace hm {

std::vector<Vec> simulate(const CGModelState& model, const SimConfig& cfg) {
  if (cfg.dt <= 0.0) throw ValidationError("simulate: dt must be positive");
  if (cfg.friction <= 0.0) throw ValidationError("simulate: friction must be positive");
  if (!(cfg.beta > 0.0)) throw ValidationError("simulate: beta must be positive");
  if (cfg.thinning < 1) throw ValidationError("simulate: thinning must be >= 1");

  Vec r = cfg.initial;
  RngState rng{cfg.seed};
  const double mob = cfg.dt / cfg.friction;
  const double noise =
      std::isinf(cfg.beta) ? 0.0 : std::sqrt(2.0 * cfg.dt / (cfg.beta * cfg.friction));

  std::vector<Vec> traj;
  traj.reserve(static_cast<std::size_t>(cfg.steps / cfg.thinning));
  std::deque<Vec> recent;

  for (long step = 0; step < cfg.steps; ++step) {
    const Vec f = model_forces(model, r);
    Vec xi;
    if (noise != 0.0) xi = standard_normals(rng, r.size());
    for (std::size_t i = 0; i < r.size(); ++i)
      r[i] += mob * f[i] + (noise != 0.0 ? noise * xi[i] : 0.0);

    recent.push_back(r);
    if (recent.size() > 10) recent.pop_front();
    if (!all_finite(r)) {
      std::ostringstream msg;
      msg << "simulate: non-finite state at step " << step << "; last states:\n";
      for (const Vec& s : recent) msg << "  " << join_g17(s) << "\n";
      throw NonFiniteState(msg.str());
    }
    if ((step + 1) % cfg.thinning == 0) traj.push_back(r);
  }
  return traj;
}

}  // namespace hm
