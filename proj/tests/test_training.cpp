#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "hessmatch/probes.hpp"
#include "hessmatch/training.hpp"

using namespace hm;

namespace {

// Exact-conditional training set for the gaussian chain with the
// select-atom map: r2 | r1 = R is N(R/2, 1/2), projected force is
// -(2 r1 - r2), targets carry term1 = 2 v (Xi K Xi^T is constant).
TrainDataset chain_dataset(int count, std::uint64_t seed) {
  TrainDataset data;
  data.n_beads = 1;
  data.dim = 1;
  RngState rng{seed};
  for (int t = 0; t < count; ++t) {
    const double r1 = 0.3 + 0.4 * standard_normals(rng, 1)[0];
    const double r2 = r1 / 2.0 + standard_normals(rng, 1)[0] / std::sqrt(2.0);
    data.positions.push_back({r1});
    data.forces.push_back({-(2.0 * r1 - r2)});
    HvpTargetRecord rec;
    rec.frame_index = t;
    rec.k = 1;
    rec.epsilon = 1e-5;
    const ProbeSet probes = generate_probes(seed, t, 1, 1);
    rec.probes = probes.vectors;
    rec.term1 = {{2.0 * rec.probes[0][0]}};
    data.targets.push_back(rec);
  }
  return data;
}

}  // namespace

TEST_CASE("force-matching loss hand cases") {
  CHECK(loss_fm({{1.0, 2.0}}, {{1.0, 2.0}}) == doctest::Approx(0.0));
  // one frame, N=1, dim=2, residual (1,1): (1/2)*2 = 1
  CHECK(loss_fm({{1.0, 1.0}}, {{0.0, 0.0}}) == doctest::Approx(1.0));
  // doubling residuals quadruples the loss
  CHECK(loss_fm({{2.0, 2.0}}, {{0.0, 0.0}}) == doctest::Approx(4.0));
  CHECK_THROWS_AS(loss_fm({}, {}), EmptyBatch);
  CHECK_THROWS_AS(loss_fm({{1.0}}, {{1.0, 2.0}}), DimensionMismatch);
}

TEST_CASE("hvp loss hand cases") {
  // one frame, one probe, residual (3,4), N=1, dim=2: 25/2
  CHECK(loss_hvp({{{3.0, 4.0}}}, {{{0.0, 0.0}}}) == doctest::Approx(12.5));
  // duplicating the probe set leaves the mean unchanged
  CHECK(loss_hvp({{{3.0, 4.0}, {3.0, 4.0}}}, {{{0.0, 0.0}, {0.0, 0.0}}}) ==
        doctest::Approx(12.5));
  CHECK_THROWS_AS(loss_hvp({}, {}), EmptyBatch);
}

TEST_CASE("total loss combines the weighted parts") {
  CHECK(total_loss(2.0, 10.0, {1.0, 0.01}) == doctest::Approx(2.1));
  CHECK(total_loss(2.0, 10.0, {1.0, 0.0}) == doctest::Approx(2.0));  // FM variant
  CHECK(total_loss(0.0, 0.0, {1.0, 0.01}) == doctest::Approx(0.0));
  // exact weight sensitivity: d total / d w_hvp = hvp
  const double h = total_loss(1.0, 7.0, {1.0, 0.02}) - total_loss(1.0, 7.0, {1.0, 0.01});
  CHECK(h == doctest::Approx(0.07));
}

TEST_CASE("adamw hand cases") {
  TrainConfig cfg;
  cfg.learning_rate = 0.1;

  // zero gradient, zero decay: parameters unchanged
  {
    Vec p = {1.0, -2.0};
    AdamState st{Vec(2, 0.0), Vec(2, 0.0), 0};
    TrainConfig c = cfg;
    c.weight_decay = 0.0;
    adamw_step(p, {0.0, 0.0}, st, c);
    CHECK(p[0] == 1.0);
    CHECK(p[1] == -2.0);
  }

  // first step with g=1, no decay: bias-corrected update is close to -lr
  {
    Vec p = {0.0};
    AdamState st{Vec(1, 0.0), Vec(1, 0.0), 0};
    TrainConfig c = cfg;
    c.weight_decay = 0.0;
    adamw_step(p, {1.0}, st, c);
    CHECK(p[0] == doctest::Approx(-0.1).epsilon(1e-4));
    CHECK(st.step == 1);
  }

  // decay only: theta <- theta (1 - lr*lambda)
  {
    Vec p = {4.0};
    AdamState st{Vec(1, 0.0), Vec(1, 0.0), 0};
    TrainConfig c = cfg;
    c.weight_decay = 0.5;
    adamw_step(p, {0.0}, st, c);
    CHECK(p[0] == doctest::Approx(4.0 * (1.0 - 0.1 * 0.5)));
  }
}

TEST_CASE("quadratic baseline converges to the CG hessian") {
  // exact ensemble targets: mean forces -H_CG r and assembled HVP
  // targets H_CG v make the objective realizable with optimum A = 1.5
  const double h_cg = 1.5;
  TrainDataset data;
  data.n_beads = 1;
  data.dim = 1;
  RngState rng{77};
  for (int t = 0; t < 400; ++t) {
    const double r = standard_normals(rng, 1)[0] / std::sqrt(h_cg);
    data.positions.push_back({r});
    data.forces.push_back({-h_cg * r});
    HvpTargetRecord rec;
    rec.frame_index = t;
    rec.k = 2;
    rec.epsilon = 1e-5;
    rec.probes = generate_probes(77, t, 2, 1).vectors;
    for (const Vec& v : rec.probes) rec.term1.push_back({h_cg * v[0]});
    data.targets.push_back(rec);
  }

  Mat a0(1, 1);
  a0(0, 0) = 0.2;
  TrainConfig cfg;
  cfg.learning_rate = 5e-3;
  cfg.batch_size = 200;
  cfg.epochs = 1000;  // two steps per epoch
  cfg.weight_decay = 0.0;
  cfg.global_seed = 3;

  const TrainResult result = train(data, make_quadratic_baseline(a0, {0.0}), cfg);
  const double a = get_params(result.model)[0];
  CHECK(std::abs(a - 1.5) < 1e-3);
  CHECK_FALSE(result.history.empty());
  CHECK(result.history.back().split == "val");
}

TEST_CASE("training history is deterministic per seed") {
  const TrainDataset data = chain_dataset(500, 5);
  Mat a0(1, 1);
  a0(0, 0) = 0.5;
  TrainConfig cfg;
  cfg.learning_rate = 1e-3;
  cfg.batch_size = 100;
  cfg.epochs = 5;
  cfg.global_seed = 11;

  const TrainResult a = train(data, make_quadratic_baseline(a0, {0.0}), cfg);
  const TrainResult b = train(data, make_quadratic_baseline(a0, {0.0}), cfg);
  REQUIRE(a.history.size() == b.history.size());
  for (std::size_t i = 0; i < a.history.size(); ++i) {
    REQUIRE(a.history[i].fm == b.history[i].fm);
    REQUIRE(a.history[i].hvp == b.history[i].hvp);
    REQUIRE(a.history[i].total == b.history[i].total);
  }
  REQUIRE(get_params(a.model) == get_params(b.model));
}

TEST_CASE("targets are constants to the optimizer") {
  // perturbing the target changes the loss value but the analytic
  // parameter gradient still equals FD of the perturbed loss in theta
  TrainDataset data = chain_dataset(50, 9);
  for (auto& rec : data.targets) rec.term1[0][0] += 0.37;  // corrupt targets

  Mat a0(1, 1);
  a0(0, 0) = 0.8;
  auto eval_loss = [&](double a) {
    const CGModelState m = make_quadratic_baseline(Mat(1, 1, a), {0.0});
    std::vector<Vec> pf, tf;
    std::vector<std::vector<Vec>> ph, th;
    for (std::size_t t = 0; t < data.positions.size(); ++t) {
      pf.push_back(model_forces(m, data.positions[t]));
      tf.push_back(data.forces[t]);
      ph.push_back({model_hvp(m, data.positions[t], data.targets[t].probes[0])});
      th.push_back({data.targets[t].term1[0]});
    }
    return total_loss(loss_fm(pf, tf), loss_hvp(ph, th), {1.0, 1.0});
  };
  const double eps = 1e-5;
  const double fd = (eval_loss(0.8 + eps) - eval_loss(0.8 - eps)) / (2.0 * eps);

  // analytic gradient via the cotangent plumbing
  const CGModelState m = make_quadratic_baseline(a0, {0.0});
  Vec grad(1, 0.0);
  const double t_count = data.positions.size();
  for (std::size_t t = 0; t < data.positions.size(); ++t) {
    const Vec f = model_forces(m, data.positions[t]);
    const Vec hv = model_hvp(m, data.positions[t], data.targets[t].probes[0]);
    ModelCotangents cot;
    cot.forces = {2.0 * (f[0] - data.forces[t][0]) / t_count};
    cot.probes = {data.targets[t].probes[0]};
    cot.hvps = {{2.0 * (hv[0] - data.targets[t].term1[0][0]) / t_count}};
    const Vec g = model_param_grad(m, data.positions[t], cot);
    grad[0] += g[0];
  }
  CHECK(std::abs(grad[0] - fd) / std::max(std::abs(fd), 1.0) < 1e-5);
}

TEST_CASE("non-finite loss aborts training") {
  TrainDataset data = chain_dataset(20, 1);
  data.forces[3][0] = std::numeric_limits<double>::quiet_NaN();
  Mat a0(1, 1);
  a0(0, 0) = 1.0;
  TrainConfig cfg;
  cfg.batch_size = 20;
  cfg.epochs = 1;
  CHECK_THROWS_AS(train(data, make_quadratic_baseline(a0, {0.0}), cfg), NonFiniteLoss);
}
