#ifndef HESSMATCH_PROBES_HPP
#define HESSMATCH_PROBES_HPP

#include <cstdint>
#include <vector>

#include "hessmatch/numerics.hpp"

namespace hm {

struct ProbeSet {
  int frame_index = 0;
  std::uint64_t seed = 0;  // stream seed actually used for this frame
  std::vector<Vec> vectors;  // K unit vectors of length d
};

// Deterministic per-frame probes: stream seed is
// global_seed ^ (frame_index * 0x9E3779B97F4A7C15 mod 2^64); K*d standard
// normals drawn in order, each consecutive d-block normalized.
ProbeSet generate_probes(std::uint64_t global_seed, int frame_index, int k, int d);

// Hutchinson-style Frobenius estimator: d * mean_k |H v_k|^2.
double frobenius_estimate(const Mat& h, const std::vector<Vec>& probes);

}  // namespace hm

#endif
