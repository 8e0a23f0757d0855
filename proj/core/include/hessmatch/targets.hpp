#ifndef HESSMATCH_TARGETS_HPP
#define HESSMATCH_TARGETS_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "hessmatch/aa_system.hpp"
#include "hessmatch/cg_map.hpp"

namespace hm {

// Per-frame precomputed Term-1 HVP targets plus the probes that
// generated them. Probes are persisted so cross-build training never
// regenerates them.
struct HvpTargetRecord {
  int frame_index = 0;
  std::uint64_t seed = 0;
  int k = 0;
  double epsilon = 0.0;
  double unit_scale = 1.0;
  std::vector<Vec> probes;  // K x d
  std::vector<Vec> term1;   // K x d, CG-space vectors
};

struct ForceResidual {
  Vec delta_j;  // Xi_F F_AA - F_NN
};

struct TargetStoreHeader {
  int d = 0;
  int k = 0;
  double epsilon = 0.0;
  std::uint64_t seed = 0;
  double unit_scale = 1.0;
};

// Term 1 per frame/probe: embed v into AA space via Xi_F^T, central-FD
// HVP against the AA force field, project back, scale. Linear maps only.
std::vector<HvpTargetRecord> precompute_term1(const std::vector<AtomisticFrame>& frames,
                                              const ForceField& ff, const CGMap& map,
                                              std::uint64_t global_seed, int k, double epsilon,
                                              double unit_scale = 1.0);

// beta * (delta_j . v) * delta_j; targets built from this are constants
// to the optimizer.
Vec term2_correction(const ForceResidual& residual, const Vec& probe, double beta);

// term1[k] or term1[k] - term2 depending on use_covariance.
Vec assemble_target(const HvpTargetRecord& record, int k, const ForceResidual* residual,
                    double beta, bool use_covariance);

void write_target_store(const std::string& path, const TargetStoreHeader& header,
                        const std::vector<HvpTargetRecord>& records);

std::vector<HvpTargetRecord> read_target_store(const std::string& path,
                                               TargetStoreHeader& header);

}  // namespace hm

#endif
