#ifndef HESSMATCH_TRAINING_HPP
#define HESSMATCH_TRAINING_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "hessmatch/cg_model.hpp"
#include "hessmatch/targets.hpp"

namespace hm {

struct LossWeights {
  double w_fm = 1.0;
  double w_hvp = 0.01;
};

struct TrainConfig {
  double learning_rate = 1e-4;
  int batch_size = 200;
  int epochs = 1;
  double beta = 1.0;
  bool use_covariance = false;
  std::uint64_t global_seed = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.01;
  LossWeights weights;
};

// Mean over frames of ||F_NN - F_target||^2 / (dim*N).
double loss_fm(const std::vector<Vec>& predicted, const std::vector<Vec>& target);

// Mean over frames and probes of ||H_NN v_k - target_k||^2 / (dim*N).
double loss_hvp(const std::vector<std::vector<Vec>>& predicted,
                const std::vector<std::vector<Vec>>& target);

double total_loss(double fm, double hvp, const LossWeights& w);

struct AdamState {
  Vec m;
  Vec v;
  int step = 0;
};

void adamw_step(Vec& params, const Vec& grads, AdamState& state, const TrainConfig& cfg);

// In-memory training set: CG positions and projected AA forces per frame,
// plus the precomputed HVP target records (empty when w_hvp = 0).
struct TrainDataset {
  std::vector<Vec> positions;   // CG coordinates per frame
  std::vector<Vec> forces;      // Xi_F F_AA per frame
  std::vector<HvpTargetRecord> targets;
  int n_beads = 0;
  int dim = 1;
};

struct LossRecord {
  int epoch = 0;
  std::string split;  // "train" | "val"
  double fm = 0.0;
  double hvp = 0.0;
  double total = 0.0;
};

struct TrainResult {
  CGModelState model;
  std::vector<LossRecord> history;
  Vec mean_term2_norm;  // per epoch; only filled when use_covariance is on
};

TrainResult train(const TrainDataset& data, CGModelState model, const TrainConfig& cfg);

void write_loss_history(const std::string& path, const std::vector<LossRecord>& history);

}  // namespace hm

#endif
