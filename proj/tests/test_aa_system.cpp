#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "hessmatch/aa_system.hpp"

using namespace hm;

namespace {

Mat gaussian_chain_k() {
  Mat k(2, 2);
  k(0, 0) = 2.0;
  k(0, 1) = -1.0;
  k(1, 0) = -1.0;
  k(1, 1) = 2.0;
  return k;
}

Vec fd_gradient(const ForceField& ff, const Vec& r, double eps = 1e-6) {
  Vec g(r.size());
  for (std::size_t i = 0; i < r.size(); ++i) {
    Vec rp = r, rm = r;
    rp[i] += eps;
    rm[i] -= eps;
    g[i] = (aa_energy({rp, 0}, ff) - aa_energy({rm, 0}, ff)) / (2.0 * eps);
  }
  return g;
}

}  // namespace

TEST_CASE("harmonic bond energy") {
  const ForceField ff{2, 1, {HarmonicBond{0, 1, 2.0, 1.0}}};
  CHECK(aa_energy({{0.0, 1.0}, 0}, ff) == doctest::Approx(0.0));
  CHECK(aa_energy({{0.0, 2.0}, 0}, ff) == doctest::Approx(1.0));
}

TEST_CASE("lennard-jones minimum") {
  const double sigma = 0.8, eps_lj = 1.3;
  const ForceField ff{2, 1, {LennardJones{0, 1, eps_lj, sigma}}};
  const double rmin = std::pow(2.0, 1.0 / 6.0) * sigma;
  CHECK(aa_energy({{0.0, rmin}, 0}, ff) == doctest::Approx(-eps_lj).epsilon(1e-12));
  CHECK_THROWS_AS(aa_energy({{0.0, 1e-9}, 0}, ff), DivergentGeometry);
}

TEST_CASE("quadratic form forces") {
  const ForceField ff{2, 1, {QuadraticForm{gaussian_chain_k()}}};
  const Vec f = aa_forces({{1.0, 0.0}, 0}, ff);
  CHECK(f[0] == doctest::Approx(-2.0));
  CHECK(f[1] == doctest::Approx(1.0));
}

TEST_CASE("forces match FD of energy for every term kind") {
  RngState rng{777};
  std::vector<ForceField> systems;
  systems.push_back({2, 3, {HarmonicBond{0, 1, 3.0, 0.8}}});
  systems.push_back({3, 3, {HarmonicAngle{0, 1, 2, 2.0, 1.9}}});
  systems.push_back({2, 3, {LennardJones{0, 1, 1.0, 0.9}}});
  systems.push_back({1, 3, {HarmonicWell{0, 4.0, {0.1, -0.2, 0.3}}}});
  systems.push_back({1, 2, {HarmonicBond{0, -1, 4.0, 1.0}}});
  for (const ForceField& ff : systems) {
    for (int rep = 0; rep < 20; ++rep) {
      Vec r = standard_normals(rng, ff.n_coords());
      for (double& x : r) x *= 0.5;
      // keep pair systems away from coincident particles
      if (ff.n_atoms == 2) r[ff.dim] += 1.5;
      const Vec f = aa_forces({r, 0}, ff);
      const Vec g = fd_gradient(ff, r);
      for (std::size_t i = 0; i < r.size(); ++i) {
        const double scale = std::max({std::abs(f[i]), std::abs(g[i]), 1e-3});
        REQUIRE(std::abs(f[i] + g[i]) / scale <= 1e-6);
      }
    }
  }
}

TEST_CASE("hessian hand cases and FD agreement") {
  const ForceField quad{2, 1, {QuadraticForm{gaussian_chain_k()}}};
  const Mat h = aa_hessian({{0.4, -0.1}, 0}, quad);
  CHECK(h(0, 0) == doctest::Approx(2.0));
  CHECK(h(0, 1) == doctest::Approx(-1.0));

  const ForceField bond{2, 1, {HarmonicBond{0, 1, 3.0, 0.0}}};
  const Mat hb = aa_hessian({{0.0, 1.0}, 0}, bond);
  CHECK(hb(0, 0) == doctest::Approx(3.0));
  CHECK(hb(0, 1) == doctest::Approx(-3.0));
  CHECK(hb(1, 0) == doctest::Approx(-3.0));
  CHECK(hb(1, 1) == doctest::Approx(3.0));

  const ForceField lj{2, 3, {LennardJones{0, 1, 1.0, 0.9}}};
  const Vec r = {0.0, 0.0, 0.0, 1.1, 0.2, -0.1};
  const Mat hl = aa_hessian({r, 0}, lj);
  // symmetric exactly
  for (std::size_t i = 0; i < hl.rows(); ++i)
    for (std::size_t j = 0; j < hl.cols(); ++j) REQUIRE(hl(i, j) == hl(j, i));
  // columns match FD of forces
  const double eps = 1e-6;
  for (std::size_t j = 0; j < r.size(); ++j) {
    Vec rp = r, rm = r;
    rp[j] += eps;
    rm[j] -= eps;
    const Vec fp = aa_forces({rp, 0}, lj);
    const Vec fm = aa_forces({rm, 0}, lj);
    for (std::size_t i = 0; i < r.size(); ++i) {
      const double fd = -(fp[i] - fm[i]) / (2.0 * eps);
      const double scale = std::max({std::abs(hl(i, j)), std::abs(fd), 1e-2});
      REQUIRE(std::abs(hl(i, j) - fd) / scale <= 1e-5);
    }
  }
}

TEST_CASE("pinned bond acts on a single atom") {
  const ForceField ff{1, 2, {HarmonicBond{0, -1, 4.0, 1.0}}};
  CHECK(aa_energy({{0.6, 0.8}, 0}, ff) == doctest::Approx(0.0));
  CHECK(aa_energy({{2.0, 0.0}, 0}, ff) == doctest::Approx(2.0));
  const Vec f = aa_forces({{2.0, 0.0}, 0}, ff);
  CHECK(f[0] == doctest::Approx(-4.0));
  CHECK(f[1] == doctest::Approx(0.0));
}

TEST_CASE("hvp_fd is exact on quadratics and linear in direction") {
  const Mat k = gaussian_chain_k();
  const ForceField ff{2, 1, {QuadraticForm{k}}};
  const AtomisticFrame frame{{0.3, -0.6}, 0};
  const Vec v = {0.7, -0.4};
  const Vec hv = aa_hvp_fd(frame, ff, v, 1e-5);
  const Vec want = matvec(k, v);
  for (int i = 0; i < 2; ++i)
    CHECK(std::abs(hv[i] - want[i]) <= 1e-8 * std::max(std::abs(want[i]), 1.0));

  Vec v2 = v;
  for (double& x : v2) x *= 2.0;
  const Vec hv2 = aa_hvp_fd(frame, ff, v2, 1e-5);
  for (int i = 0; i < 2; ++i) CHECK(hv2[i] == doctest::Approx(2.0 * hv[i]).epsilon(1e-6));
}

TEST_CASE("hvp_fd matches analytic hessian on a bond") {
  const ForceField ff{2, 2, {HarmonicBond{0, 1, 2.5, 0.7}}};
  const AtomisticFrame frame{{0.0, 0.1, 1.0, -0.2}, 0};
  const Mat h = aa_hessian(frame, ff);
  const Vec e1 = {1.0, 0.0, 0.0, 0.0};
  const Vec hv = aa_hvp_fd(frame, ff, e1, 1e-5);
  for (int i = 0; i < 4; ++i)
    CHECK(std::abs(hv[i] - h(i, 0)) <= 1e-6 * std::max(std::abs(h(i, 0)), 1.0));
}

TEST_CASE("boltzmann sampling reproduces the gaussian covariance") {
  const Mat k = gaussian_chain_k();
  const ForceField ff{2, 1, {QuadraticForm{k}}};
  RngState rng{321};
  SampleOptions opts;
  opts.dt = 5e-3;
  opts.thinning = 10;
  const std::vector<AtomisticFrame> frames = sample_boltzmann(ff, 1.0, 100000, opts, rng);
  REQUIRE(frames.size() == 100000);
  Vec mean(2, 0.0);
  for (const auto& f : frames)
    for (int i = 0; i < 2; ++i) mean[i] += f.positions[i];
  for (double& m : mean) m /= frames.size();
  Mat cov(2, 2);
  for (const auto& f : frames)
    for (int i = 0; i < 2; ++i)
      for (int j = 0; j < 2; ++j)
        cov(i, j) += (f.positions[i] - mean[i]) * (f.positions[j] - mean[j]);
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) cov(i, j) /= frames.size();
  // K^-1 = (1/3) [[2,1],[1,2]]
  CHECK(std::abs(cov(0, 0) - 2.0 / 3.0) / (2.0 / 3.0) < 0.05);
  CHECK(std::abs(cov(1, 1) - 2.0 / 3.0) / (2.0 / 3.0) < 0.05);
  CHECK(std::abs(cov(0, 1) - 1.0 / 3.0) / (1.0 / 3.0) < 0.05);
}

TEST_CASE("zero-noise sampling descends to the minimum") {
  const ForceField ff{1, 1, {HarmonicWell{0, 2.0, {0.7}}}};
  RngState rng{10};
  SampleOptions opts;
  opts.dt = 0.1;  // gradient descent reaches the minimum within the step budget
  opts.initial = {5.0};
  const std::vector<AtomisticFrame> frames =
      sample_boltzmann(ff, std::numeric_limits<double>::infinity(), 10, opts, rng);
  CHECK(std::abs(frames.back().positions[0] - 0.7) < 1e-6);
}

TEST_CASE("sampling is deterministic per seed") {
  const ForceField ff{2, 1, {QuadraticForm{gaussian_chain_k()}}};
  RngState ra{55}, rb{55};
  const auto fa = sample_boltzmann(ff, 1.0, 50, {}, ra);
  const auto fb = sample_boltzmann(ff, 1.0, 50, {}, rb);
  for (std::size_t t = 0; t < fa.size(); ++t) REQUIRE(fa[t].positions == fb[t].positions);
}
