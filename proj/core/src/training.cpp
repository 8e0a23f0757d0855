#include "hessmatch/training.hpp"

#include <cmath>
#include <sstream>

#include "hessmatch/text_io.hpp"

namespace hm {
namespace {

double frame_sq_residual(const Vec& a, const Vec& b) {
  if (a.size() != b.size()) throw DimensionMismatch("loss: frame shape mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double r = a[i] - b[i];
    s += r * r;
  }
  return s / static_cast<double>(a.size());
}

struct EpochLosses {
  double fm = 0.0;
  double hvp = 0.0;
};

// Losses of the current model over a set of frame indices; targets are
// assembled exactly as in the gradient path (residual recomputed, then
// treated as a constant).
EpochLosses evaluate_split(const CGModelState& model, const TrainDataset& data,
                           const std::vector<std::size_t>& idx, const TrainConfig& cfg,
                           double w_hvp) {
  EpochLosses out;
  if (idx.empty()) return out;
  for (std::size_t t : idx) {
    const Vec f_nn = model_forces(model, data.positions[t]);
    out.fm += frame_sq_residual(f_nn, data.forces[t]);
    if (w_hvp > 0.0) {
      const HvpTargetRecord& rec = data.targets[t];
      ForceResidual res;
      if (cfg.use_covariance) {
        res.delta_j.resize(f_nn.size());
        for (std::size_t i = 0; i < f_nn.size(); ++i) res.delta_j[i] = data.forces[t][i] - f_nn[i];
      }
      double acc = 0.0;
      for (int k = 0; k < rec.k; ++k) {
        const Vec h = model_hvp(model, data.positions[t], rec.probes[k]);
        const Vec tgt = assemble_target(rec, k, cfg.use_covariance ? &res : nullptr, cfg.beta,
                                        cfg.use_covariance);
        acc += frame_sq_residual(h, tgt);
      }
      out.hvp += acc / rec.k;
    }
  }
  out.fm /= static_cast<double>(idx.size());
  out.hvp /= static_cast<double>(idx.size());
  return out;
}

}  // namespace

double loss_fm(const std::vector<Vec>& predicted, const std::vector<Vec>& target) {
  if (predicted.empty()) throw EmptyBatch("loss_fm: no frames");
  if (predicted.size() != target.size()) throw DimensionMismatch("loss_fm: frame count mismatch");
  double s = 0.0;
  for (std::size_t t = 0; t < predicted.size(); ++t)
    s += frame_sq_residual(predicted[t], target[t]);
  return s / static_cast<double>(predicted.size());
}

double loss_hvp(const std::vector<std::vector<Vec>>& predicted,
                const std::vector<std::vector<Vec>>& target) {
  if (predicted.empty()) throw EmptyBatch("loss_hvp: no frames");
  if (predicted.size() != target.size()) throw DimensionMismatch("loss_hvp: frame count mismatch");
  const std::size_t k = predicted[0].size();
  double s = 0.0;
  for (std::size_t t = 0; t < predicted.size(); ++t) {
    if (predicted[t].size() != k || target[t].size() != k)
      throw DimensionMismatch("loss_hvp: probe count varies across frames");
    double acc = 0.0;
    for (std::size_t p = 0; p < k; ++p) acc += frame_sq_residual(predicted[t][p], target[t][p]);
    s += acc / static_cast<double>(k);
  }
  return s / static_cast<double>(predicted.size());
}

double total_loss(double fm, double hvp, const LossWeights& w) {
  return w.w_fm * fm + w.w_hvp * hvp;
}

void adamw_step(Vec& params, const Vec& grads, AdamState& state, const TrainConfig& cfg) {
  if (params.size() != grads.size()) throw DimensionMismatch("adamw_step: shape mismatch");
  if (state.m.empty()) {
    state.m.assign(params.size(), 0.0);
    state.v.assign(params.size(), 0.0);
  }
  state.step += 1;
  const double bc1 = 1.0 - std::pow(cfg.beta1, state.step);
  const double bc2 = 1.0 - std::pow(cfg.beta2, state.step);
  for (std::size_t i = 0; i < params.size(); ++i) {
    state.m[i] = cfg.beta1 * state.m[i] + (1.0 - cfg.beta1) * grads[i];
    state.v[i] = cfg.beta2 * state.v[i] + (1.0 - cfg.beta2) * grads[i] * grads[i];
    const double mhat = state.m[i] / bc1;
    const double vhat = state.v[i] / bc2;
    params[i] -= cfg.learning_rate * (mhat / (std::sqrt(vhat) + cfg.eps)
                                      + cfg.weight_decay * params[i]);
  }
}

TrainResult train(const TrainDataset& data, CGModelState model, const TrainConfig& cfg) {
  const std::size_t n = data.positions.size();
  if (n == 0) throw EmptyBatch("train: no frames");
  if (data.forces.size() != n) throw StoreMismatch("train: force count differs from frame count");
  const double w_hvp = cfg.weights.w_hvp;
  if (w_hvp > 0.0) {
    if (data.targets.size() != n)
      throw StoreMismatch("train: target store frame count differs from frame store");
    for (std::size_t t = 0; t < n; ++t)
      if (!data.targets[t].probes.empty() &&
          data.targets[t].probes[0].size() != data.positions[t].size())
        throw StoreMismatch("train: target dimension differs from frame dimension");
  }

  // Validation split: trailing 10% of frames by index.
  const std::size_t n_val = n / 10;
  std::vector<std::size_t> train_idx, val_idx;
  for (std::size_t t = 0; t < n - n_val; ++t) train_idx.push_back(t);
  for (std::size_t t = n - n_val; t < n; ++t) val_idx.push_back(t);
  if (val_idx.empty()) val_idx = train_idx;

  TrainResult result;
  RngState shuffle_rng{cfg.global_seed ^ 0xA5A5A5A55A5A5A5AULL};
  AdamState adam;
  Vec params = get_params(model);

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    // deterministic Fisher-Yates over the training indices
    std::vector<std::size_t> order = train_idx;
    for (std::size_t i = order.size(); i > 1; --i) {
      const std::size_t j = splitmix64_next(shuffle_rng) % i;
      std::swap(order[i - 1], order[j]);
    }

    double term2_acc = 0.0;
    std::size_t term2_count = 0;

    for (std::size_t start = 0; start < order.size();
         start += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t stop =
          std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_size));
      const double batch = static_cast<double>(stop - start);
      Vec grad(params.size(), 0.0);
      double batch_loss = 0.0;

      for (std::size_t b = start; b < stop; ++b) {
        const std::size_t t = order[b];
        const Vec& r = data.positions[t];
        const double d = static_cast<double>(r.size());
        const Vec f_nn = model_forces(model, r);

        ModelCotangents cot;
        cot.forces.assign(r.size(), 0.0);
        double frame_loss = 0.0;
        for (std::size_t i = 0; i < r.size(); ++i) {
          const double res = f_nn[i] - data.forces[t][i];
          frame_loss += cfg.weights.w_fm * res * res / d;
          cot.forces[i] = cfg.weights.w_fm * 2.0 * res / (batch * d);
        }

        if (w_hvp > 0.0) {
          const HvpTargetRecord& rec = data.targets[t];
          ForceResidual res;
          if (cfg.use_covariance) {
            res.delta_j.resize(r.size());
            for (std::size_t i = 0; i < r.size(); ++i)
              res.delta_j[i] = data.forces[t][i] - f_nn[i];
          }
          for (int k = 0; k < rec.k; ++k) {
            const Vec h = model_hvp(model, r, rec.probes[k]);
            const Vec tgt = assemble_target(rec, k, cfg.use_covariance ? &res : nullptr,
                                            cfg.beta, cfg.use_covariance);
            if (cfg.use_covariance) {
              const Vec t2 = term2_correction(res, rec.probes[k], cfg.beta);
              term2_acc += std::sqrt(dot(t2, t2));
              term2_count += 1;
            }
            Vec hbar(r.size());
            for (std::size_t i = 0; i < r.size(); ++i) {
              const double hr = h[i] - tgt[i];
              frame_loss += w_hvp * hr * hr / (rec.k * d);
              hbar[i] = w_hvp * 2.0 * hr / (batch * rec.k * d);
            }
            cot.probes.push_back(rec.probes[k]);
            cot.hvps.push_back(std::move(hbar));
          }
        }

        batch_loss += frame_loss / batch;
        const Vec g = model_param_grad(model, r, cot);
        for (std::size_t i = 0; i < grad.size(); ++i) grad[i] += g[i];
      }

      if (!std::isfinite(batch_loss)) {
        std::ostringstream msg;
        msg << "train: non-finite loss at epoch " << epoch << " step " << adam.step
            << "; |params|_inf = " << norm_inf(params);
        throw NonFiniteLoss(msg.str());
      }
      adamw_step(params, grad, adam, cfg);
      set_params(model, params);
    }

    const EpochLosses tr = evaluate_split(model, data, train_idx, cfg, w_hvp);
    const EpochLosses va = evaluate_split(model, data, val_idx, cfg, w_hvp);
    result.history.push_back({epoch, "train", tr.fm, tr.hvp,
                              total_loss(tr.fm, tr.hvp, cfg.weights)});
    result.history.push_back({epoch, "val", va.fm, va.hvp,
                              total_loss(va.fm, va.hvp, cfg.weights)});
    if (cfg.use_covariance)
      result.mean_term2_norm.push_back(term2_count ? term2_acc / term2_count : 0.0);
  }

  result.model = std::move(model);
  return result;
}

void write_loss_history(const std::string& path, const std::vector<LossRecord>& history) {
  std::ostringstream out;
  out << "epoch,split,loss_fm,loss_hvp,loss_total\n";
  for (const LossRecord& rec : history)
    out << rec.epoch << "," << rec.split << "," << g17(rec.fm) << "," << g17(rec.hvp) << ","
        << g17(rec.total) << "\n";
  atomic_write(path, out.str());
}

}  // namespace hm
