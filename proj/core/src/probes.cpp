#include "hessmatch/probes.hpp"

#include <cmath>

namespace hm {

ProbeSet generate_probes(std::uint64_t global_seed, int frame_index, int k, int d) {
  if (k < 1 || d < 1) throw ValidationError("generate_probes: K and d must be >= 1");
  const std::uint64_t stream_seed =
      global_seed ^ (static_cast<std::uint64_t>(frame_index) * 0x9E3779B97F4A7C15ULL);

  ProbeSet set;
  set.frame_index = frame_index;
  set.seed = stream_seed;
  set.vectors.reserve(k);

  RngState rng{stream_seed};
  for (int p = 0; p < k; ++p) {
    Vec v;
    bool ok = false;
    for (int attempt = 0; attempt < 4; ++attempt) {
      v = standard_normals(rng, d);
      const double n = norm2(v);
      if (n > 0.0) {
        for (double& x : v) x /= n;
        ok = true;
        break;
      }
    }
    if (!ok) throw ZeroVector("generate_probes: degenerate probe after 3 retries");
    set.vectors.push_back(std::move(v));
  }
  return set;
}

double frobenius_estimate(const Mat& h, const std::vector<Vec>& probes) {
  if (h.rows() != h.cols()) throw DimensionMismatch("frobenius_estimate: H must be square");
  if (probes.empty()) throw EmptyInput("frobenius_estimate: no probes");
  const std::size_t d = h.rows();
  double acc = 0.0;
  for (const Vec& v : probes) {
    if (v.size() != d) throw DimensionMismatch("frobenius_estimate: probe length mismatch");
    const Vec hv = matvec(h, v);
    acc += dot(hv, hv);
  }
  return static_cast<double>(d) * acc / static_cast<double>(probes.size());
}

}  // namespace hm
