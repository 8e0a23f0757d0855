#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <limits>

#include "hessmatch/dynamics.hpp"

using namespace hm;

namespace {

CGModelState isotropic_quadratic(double k) {
  Mat a(2, 2);
  a(0, 0) = k;
  a(1, 1) = k;
  return make_quadratic_baseline(a, {0.0, 0.0});
}

Mat sample_cov(const std::vector<Vec>& traj) {
  const std::size_t d = traj[0].size();
  Vec mean(d, 0.0);
  for (const Vec& x : traj)
    for (std::size_t i = 0; i < d; ++i) mean[i] += x[i];
  for (double& m : mean) m /= traj.size();
  Mat cov(d, d);
  for (const Vec& x : traj)
    for (std::size_t i = 0; i < d; ++i)
      for (std::size_t j = 0; j < d; ++j) cov(i, j) += (x[i] - mean[i]) * (x[j] - mean[j]);
  for (double& c : cov.data()) c /= traj.size();
  return cov;
}

}  // namespace

TEST_CASE("stationary variance matches 1/(beta k)") {
  const double k = 3.0, beta = 2.0;
  SimConfig cfg;
  cfg.dt = 1e-3;
  cfg.beta = beta;
  cfg.steps = 400000;
  cfg.thinning = 4;
  cfg.seed = 17;
  cfg.initial = {0.0, 0.0};
  const auto traj = simulate(isotropic_quadratic(k), cfg);
  REQUIRE(traj.size() == 100000);
  const Mat cov = sample_cov(traj);
  const double want = 1.0 / (beta * k);
  CHECK(std::abs(cov(0, 0) - want) / want < 0.05);
  CHECK(std::abs(cov(1, 1) - want) / want < 0.05);
}

TEST_CASE("anisotropic covariance matches (beta A)^-1") {
  Mat a(2, 2);
  a(0, 0) = 2.0;
  a(0, 1) = -1.0;
  a(1, 0) = -1.0;
  a(1, 1) = 2.0;
  SimConfig cfg;
  cfg.dt = 1e-3;
  cfg.beta = 1.0;
  cfg.steps = 1000000;
  cfg.thinning = 5;
  cfg.seed = 23;
  cfg.initial = {0.0, 0.0};
  const auto traj = simulate(make_quadratic_baseline(a, {0.0, 0.0}), cfg);
  const Mat cov = sample_cov(traj);
  // A^-1 = (1/3) [[2,1],[1,2]]
  CHECK(std::abs(cov(0, 0) - 2.0 / 3.0) / (2.0 / 3.0) < 0.05);
  CHECK(std::abs(cov(1, 1) - 2.0 / 3.0) / (2.0 / 3.0) < 0.05);
  CHECK(std::abs(cov(0, 1) - 1.0 / 3.0) / (1.0 / 3.0) < 0.05);
}

TEST_CASE("zero noise descends monotonically to the reference point") {
  const CGModelState m = make_quadratic_baseline(Mat::identity(2) * 2.0, {0.5, -0.5});
  SimConfig cfg;
  cfg.dt = 0.05;
  cfg.beta = std::numeric_limits<double>::infinity();
  cfg.steps = 400;
  cfg.thinning = 1;
  cfg.initial = {3.0, 2.0};
  const auto traj = simulate(m, cfg);
  double prev = model_energy(m, cfg.initial);
  for (const Vec& x : traj) {
    const double e = model_energy(m, x);
    REQUIRE(e <= prev + 1e-12);
    prev = e;
  }
  CHECK(std::abs(traj.back()[0] - 0.5) < 1e-6);
  CHECK(std::abs(traj.back()[1] + 0.5) < 1e-6);
}

TEST_CASE("distinct seeds decorrelate but share stationary moments") {
  SimConfig cfg;
  cfg.dt = 1e-3;
  cfg.beta = 1.0;
  cfg.steps = 300000;
  cfg.thinning = 3;
  cfg.initial = {0.0, 0.0};
  cfg.seed = 1;
  const auto ta = simulate(isotropic_quadratic(2.0), cfg);
  cfg.seed = 2;
  const auto tb = simulate(isotropic_quadratic(2.0), cfg);
  CHECK(ta[10] != tb[10]);
  const Mat ca = sample_cov(ta), cb = sample_cov(tb);
  CHECK(std::abs(ca(0, 0) - cb(0, 0)) / ca(0, 0) < 0.1);
}

TEST_CASE("same seed reproduces the trajectory bitwise") {
  SimConfig cfg;
  cfg.dt = 1e-3;
  cfg.beta = 1.0;
  cfg.steps = 500;
  cfg.thinning = 5;
  cfg.seed = 99;
  cfg.initial = {0.3, -0.2};
  const auto ta = simulate(isotropic_quadratic(1.5), cfg);
  const auto tb = simulate(isotropic_quadratic(1.5), cfg);
  REQUIRE(ta.size() == tb.size());
  for (std::size_t t = 0; t < ta.size(); ++t) REQUIRE(ta[t] == tb[t]);
}

TEST_CASE("forward and reversed stationary increments agree in mean") {
  SimConfig cfg;
  cfg.dt = 1e-3;
  cfg.beta = 1.0;
  cfg.steps = 200000;
  cfg.thinning = 1;
  cfg.seed = 31;
  cfg.initial = {0.0, 0.0};
  const auto traj = simulate(isotropic_quadratic(2.0), cfg);
  // skip the relaxation transient
  const std::size_t start = traj.size() / 10;
  double fwd = 0.0;
  for (std::size_t t = start; t + 1 < traj.size(); ++t) fwd += traj[t + 1][0] - traj[t][0];
  fwd /= (traj.size() - 1 - start);
  // stationary drift should vanish within Monte-Carlo error
  CHECK(std::abs(fwd) < 5e-4);
}

TEST_CASE("divergent dynamics abort with NonFiniteState") {
  // dt far beyond the stability limit of the quadratic force
  SimConfig cfg;
  cfg.dt = 10.0;
  cfg.beta = 1.0;
  cfg.steps = 10000;
  cfg.thinning = 1;
  cfg.seed = 7;
  cfg.initial = {1.0, 1.0};
  CHECK_THROWS_AS(simulate(isotropic_quadratic(100.0), cfg), NonFiniteState);
}
