#ifndef HESSMATCH_ANALYSIS_HPP
#define HESSMATCH_ANALYSIS_HPP

#include <cstdint>
#include <vector>

#include "hessmatch/numerics.hpp"

namespace hm {

// Uniform-bin normalized histogram with pseudocounts, so KL ratios stay
// finite on empty bins.
struct Histogram1D {
  Vec edges;   // bins+1 ascending
  Vec masses;  // bins entries, sum 1
};

Histogram1D make_histogram(const Vec& samples, double lo, double hi, int bins,
                           double pseudocount = 1e-10);

struct TicaModel {
  int lag = 1;
  Vec mean;
  Vec eigenvalues;  // descending
  Mat components;   // columns, C0-orthonormal, first-nonzero-positive sign
};

TicaModel tica_fit(const std::vector<std::vector<Vec>>& trajectories, int lag,
                   double regularization = 1e-6);

// Time series per component: result[c][t] = component c . (x_t - mean).
std::vector<Vec> tica_project(const TicaModel& model, const std::vector<Vec>& trajectory);

// Exact 1-dim Wasserstein-1 via the quantile coupling.
double w1_1d(Vec a, Vec b);

// Histogram KL over shared binning spanning the pooled range.
double kl_1d(const Vec& samples_p, const Vec& samples_q, int bins = 50);

// Mean over seeded random unit directions of w1_1d on projections.
double sliced_w1_2d(const std::vector<Vec>& points_a, const std::vector<Vec>& points_b,
                    int directions = 64, std::uint64_t seed = 0);

struct StructuralDistributions {
  Vec bonds;      // consecutive-bead distances, pooled over frames
  Vec angles;     // bead-triple angles
  Vec dihedrals;  // bead-quadruple torsions (needs dim >= 3)
  Vec gyration;   // per-frame radius of gyration
  bool has_angles = false;
  bool has_dihedrals = false;
};

StructuralDistributions structural_metrics(const std::vector<Vec>& trajectory, int n_beads,
                                           int dim);

}  // namespace hm

#endif
