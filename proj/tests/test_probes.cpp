#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "hessmatch/probes.hpp"

using namespace hm;

namespace {

Mat random_mat(int n, RngState& rng) {
  Mat h(n, n);
  const Vec entries = standard_normals(rng, n * n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) h(i, j) = entries[i * n + j];
  return h;
}

}  // namespace

TEST_CASE("probes are unit norm") {
  const ProbeSet set = generate_probes(12345, 7, 8, 6);
  REQUIRE(set.vectors.size() == 8);
  for (const Vec& v : set.vectors) {
    REQUIRE(v.size() == 6);
    CHECK(std::abs(norm2(v) - 1.0) <= 1e-12);
  }
}

TEST_CASE("probe generation is deterministic per (seed, frame)") {
  const ProbeSet a = generate_probes(99, 3, 4, 5);
  const ProbeSet b = generate_probes(99, 3, 4, 5);
  REQUIRE(a.seed == b.seed);
  for (int k = 0; k < 4; ++k) REQUIRE(a.vectors[k] == b.vectors[k]);
  // different frames decorrelate the stream
  const ProbeSet c = generate_probes(99, 4, 4, 5);
  CHECK(c.seed != a.seed);
  CHECK(c.vectors[0] != a.vectors[0]);
}

TEST_CASE("stream seed uses the golden-ratio frame mix") {
  const std::uint64_t gamma = 0x9E3779B97F4A7C15ull;
  const ProbeSet set = generate_probes(42, 11, 1, 2);
  CHECK(set.seed == (42ull ^ (11ull * gamma)));
  CHECK(set.frame_index == 11);
}

TEST_CASE("high-dimensional probes concentrate near orthogonality") {
  // d = 1e4, pairwise |v.v'| should be ~1/sqrt(d); mean over 100 pairs < 0.05
  const int d = 10000;
  double mean_abs = 0.0;
  int pairs = 0;
  for (int frame = 0; frame < 100; frame += 2) {
    const ProbeSet a = generate_probes(7, frame, 2, d);
    mean_abs += std::abs(dot(a.vectors[0], a.vectors[1]));
    ++pairs;
  }
  mean_abs /= pairs;
  CHECK(mean_abs < 0.05);
}

TEST_CASE("frobenius estimate hand cases") {
  // identity: every unit probe gives |Iv|^2 = 1, so the estimate is exactly d
  const Mat id = Mat::identity(4);
  const ProbeSet set = generate_probes(1, 0, 16, 4);
  CHECK(frobenius_estimate(id, set.vectors) == doctest::Approx(4.0).epsilon(1e-14));

  Mat h(2, 2);
  h(0, 0) = 2.0;
  CHECK(frobenius_estimate(h, {{1.0, 0.0}}) == doctest::Approx(8.0));
  CHECK(frobenius_estimate(h, {{0.0, 1.0}}) == doctest::Approx(0.0));
  CHECK(frobenius_estimate(h, {{1.0, 0.0}, {0.0, 1.0}}) == doctest::Approx(4.0));
}

TEST_CASE("frobenius estimate rejects mismatched probes") {
  const Mat h = Mat::identity(3);
  CHECK_THROWS_AS(frobenius_estimate(h, {{1.0, 0.0}}), DimensionMismatch);
}

TEST_CASE("random 5x5 matrix recovered within 1% at 1e5 probes") {
  RngState rng{2024};
  const Mat h = random_mat(5, rng);
  double target = 0.0;
  for (double x : h.data()) target += x * x;

  std::vector<Vec> probes;
  probes.reserve(100000);
  for (int frame = 0; frame < 12500; ++frame) {
    const ProbeSet set = generate_probes(31, frame, 8, 5);
    probes.insert(probes.end(), set.vectors.begin(), set.vectors.end());
  }
  const double est = frobenius_estimate(h, probes);
  CHECK(std::abs(est - target) / target < 0.01);
}

TEST_CASE("batch-mean standard error shrinks as M^(-1/2)") {
  RngState rng{5};
  const Mat h = random_mat(5, rng);

  // sd of batch means over fixed-size groups of batches; slope of
  // log(sd) vs log(M) should be -0.5 within 0.1
  auto batch_sd = [&](int m, std::uint64_t seed_base) {
    const int outer = 200;  // sd estimated from 200 independent batch means
    Vec means(outer, 0.0);
    int frame = 0;
    for (int o = 0; o < outer; ++o) {
      double acc = 0.0;
      for (int b = 0; b < m; ++b) {
        const ProbeSet set = generate_probes(seed_base, frame++, 8, 5);
        acc += frobenius_estimate(h, set.vectors);
      }
      means[o] = acc / m;
    }
    double mu = 0.0, var = 0.0;
    for (double x : means) mu += x;
    mu /= outer;
    for (double x : means) var += (x - mu) * (x - mu);
    return std::sqrt(var / (outer - 1.0));
  };

  const Vec ms = {1, 2, 4, 8, 16, 32};
  Vec lx, ly;
  for (double m : ms) {
    lx.push_back(std::log(m));
    ly.push_back(std::log(batch_sd(static_cast<int>(m), 777)));
  }
  double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
  const double n = lx.size();
  for (std::size_t i = 0; i < lx.size(); ++i) {
    sx += lx[i];
    sy += ly[i];
    sxx += lx[i] * lx[i];
    sxy += lx[i] * ly[i];
  }
  const double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
  CHECK(std::abs(slope + 0.5) < 0.1);
}

TEST_CASE("estimator statistics are rotation invariant") {
  RngState rng{8};
  Mat h = random_mat(4, rng);
  // random orthogonal Q from the eigenvectors of a random symmetric matrix
  Mat s(4, 4);
  const Vec entries = standard_normals(rng, 16);
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) s(i, j) = entries[i * 4 + j] + entries[j * 4 + i];
  const Mat q = sym_eig(s).eigenvectors;
  const Mat rotated = matmul(matmul(q, h), q.transpose());

  std::vector<Vec> probes;
  for (int frame = 0; frame < 4000; ++frame) {
    const ProbeSet set = generate_probes(64, frame, 8, 4);
    probes.insert(probes.end(), set.vectors.begin(), set.vectors.end());
  }
  const double ea = frobenius_estimate(h, probes);
  const double eb = frobenius_estimate(rotated, probes);
  CHECK(std::abs(ea - eb) / ea < 0.05);
}
