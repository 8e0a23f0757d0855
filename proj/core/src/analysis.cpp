#include "hessmatch/analysis.hpp"

#include <algorithm>
#include <cmath>

#include "hessmatch/errors.hpp"

namespace hm {
namespace {

double clamp_unit(double x) { return std::min(1.0, std::max(-1.0, x)); }

void bead(const Vec& frame, int i, int dim, Vec& out) {
  out.assign(frame.begin() + static_cast<std::ptrdiff_t>(i) * dim,
             frame.begin() + static_cast<std::ptrdiff_t>(i + 1) * dim);
}

Vec sub(const Vec& a, const Vec& b) {
  Vec out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] - b[i];
  return out;
}

Vec cross3(const Vec& a, const Vec& b) {
  return {a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]};
}

}  // namespace

Histogram1D make_histogram(const Vec& samples, double lo, double hi, int bins,
                           double pseudocount) {
  if (bins < 1) throw ValidationError("make_histogram: bins must be >= 1");
  if (!(hi > lo)) hi = lo + 1.0;
  Histogram1D h;
  h.edges.resize(bins + 1);
  for (int i = 0; i <= bins; ++i) h.edges[i] = lo + (hi - lo) * i / bins;
  h.masses.assign(bins, pseudocount);
  const double width = (hi - lo) / bins;
  for (double x : samples) {
    int b = static_cast<int>((x - lo) / width);
    if (b < 0) b = 0;
    if (b >= bins) b = bins - 1;
    h.masses[b] += 1.0;
  }
  double total = 0.0;
  for (double m : h.masses) total += m;
  for (double& m : h.masses) m /= total;
  return h;
}

TicaModel tica_fit(const std::vector<std::vector<Vec>>& trajectories, int lag,
                   double regularization) {
  if (lag < 1) throw ValidationError("tica_fit: lag must be >= 1");
  std::size_t total = 0;
  for (const auto& traj : trajectories) {
    if (traj.size() <= static_cast<std::size_t>(lag))
      throw TrajectoryTooShort("tica_fit: trajectory length must exceed lag");
    total += traj.size();
  }
  if (trajectories.empty()) throw EmptyInput("tica_fit: no trajectories");
  const std::size_t d = trajectories[0][0].size();

  TicaModel model;
  model.lag = lag;
  model.mean.assign(d, 0.0);
  for (const auto& traj : trajectories)
    for (const Vec& x : traj)
      for (std::size_t i = 0; i < d; ++i) model.mean[i] += x[i];
  for (double& m : model.mean) m /= static_cast<double>(total);

  Mat c0(d, d), ct(d, d);
  std::size_t pairs = 0;
  Vec a(d), b(d);
  for (const auto& traj : trajectories) {
    for (std::size_t t = 0; t < traj.size(); ++t) {
      for (std::size_t i = 0; i < d; ++i) a[i] = traj[t][i] - model.mean[i];
      for (std::size_t i = 0; i < d; ++i)
        for (std::size_t j = 0; j < d; ++j) c0(i, j) += a[i] * a[j];
      if (t + lag < traj.size()) {
        for (std::size_t i = 0; i < d; ++i) b[i] = traj[t + lag][i] - model.mean[i];
        for (std::size_t i = 0; i < d; ++i)
          for (std::size_t j = 0; j < d; ++j) ct(i, j) += a[i] * b[j];
        pairs += 1;
      }
    }
  }
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = 0; j < d; ++j) {
      c0(i, j) /= static_cast<double>(total);
      ct(i, j) /= static_cast<double>(pairs);
    }
  // symmetrize the lagged covariance (reversibility is only approximate in data)
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = i + 1; j < d; ++j)
      ct(i, j) = ct(j, i) = 0.5 * (ct(i, j) + ct(j, i));

  // symmetric whitening with an eigenvalue floor
  const EigResult e0 = sym_eig(c0);
  Mat w(d, d);
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = 0; j < d; ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < d; ++k) {
        const double lam = std::max(e0.eigenvalues[k], regularization);
        s += e0.eigenvectors(i, k) * e0.eigenvectors(j, k) / std::sqrt(lam);
      }
      w(i, j) = s;
    }

  Mat m = matmul(w, matmul(ct, w));
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = i + 1; j < d; ++j) m(i, j) = m(j, i) = 0.5 * (m(i, j) + m(j, i));
  const EigResult em = sym_eig(m);
  model.eigenvalues = em.eigenvalues;
  model.components = matmul(w, em.eigenvectors);

  // first-nonzero-positive sign convention per component
  for (std::size_t c = 0; c < d; ++c) {
    double lead = 0.0;
    for (std::size_t i = 0; i < d; ++i)
      if (std::abs(model.components(i, c)) > 1e-12) {
        lead = model.components(i, c);
        break;
      }
    if (lead < 0.0)
      for (std::size_t i = 0; i < d; ++i) model.components(i, c) = -model.components(i, c);
  }
  return model;
}

std::vector<Vec> tica_project(const TicaModel& model, const std::vector<Vec>& trajectory) {
  const std::size_t d = model.mean.size();
  const std::size_t nc = model.components.cols();
  std::vector<Vec> out(nc, Vec(trajectory.size(), 0.0));
  for (std::size_t t = 0; t < trajectory.size(); ++t) {
    if (trajectory[t].size() != d) throw DimensionMismatch("tica_project: frame dimension");
    for (std::size_t c = 0; c < nc; ++c) {
      double s = 0.0;
      for (std::size_t i = 0; i < d; ++i)
        s += model.components(i, c) * (trajectory[t][i] - model.mean[i]);
      out[c][t] = s;
    }
  }
  return out;
}

double w1_1d(Vec a, Vec b) {
  if (a.empty() || b.empty()) throw EmptyInput("w1_1d: empty sample set");
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  if (a.size() == b.size()) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += std::abs(a[i] - b[i]);
    return s / static_cast<double>(a.size());
  }
  // piecewise-constant quantile functions; integrate |Fa^-1 - Fb^-1| dq
  const double na = static_cast<double>(a.size()), nb = static_cast<double>(b.size());
  std::size_t i = 0, j = 0;
  double q = 0.0, s = 0.0;
  while (i < a.size() && j < b.size()) {
    const double qa = (i + 1) / na, qb = (j + 1) / nb;
    const double qn = std::min(qa, qb);
    s += (qn - q) * std::abs(a[i] - b[j]);
    q = qn;
    if (qa <= qn + 1e-15) ++i;
    if (qb <= qn + 1e-15) ++j;
  }
  return s;
}

double kl_1d(const Vec& samples_p, const Vec& samples_q, int bins) {
  if (samples_p.empty() || samples_q.empty()) throw EmptyInput("kl_1d: empty sample set");
  double lo = samples_p[0], hi = samples_p[0];
  for (double x : samples_p) {
    lo = std::min(lo, x);
    hi = std::max(hi, x);
  }
  for (double x : samples_q) {
    lo = std::min(lo, x);
    hi = std::max(hi, x);
  }
  const Histogram1D p = make_histogram(samples_p, lo, hi, bins);
  const Histogram1D q = make_histogram(samples_q, lo, hi, bins);
  double kl = 0.0;
  for (int i = 0; i < bins; ++i) kl += p.masses[i] * std::log(p.masses[i] / q.masses[i]);
  return kl;
}

double sliced_w1_2d(const std::vector<Vec>& points_a, const std::vector<Vec>& points_b,
                    int directions, std::uint64_t seed) {
  if (points_a.empty() || points_b.empty()) throw EmptyInput("sliced_w1_2d: empty point set");
  if (points_a[0].size() != 2 || points_b[0].size() != 2)
    throw DimensionMismatch("sliced_w1_2d: points must be 2-dim");
  RngState rng{seed};
  double total = 0.0;
  for (int k = 0; k < directions; ++k) {
    double ux, uy, nrm;
    do {
      const Vec z = standard_normals(rng, 2);
      ux = z[0];
      uy = z[1];
      nrm = std::sqrt(ux * ux + uy * uy);
    } while (nrm < 1e-12);
    ux /= nrm;
    uy /= nrm;
    Vec pa(points_a.size()), pb(points_b.size());
    for (std::size_t i = 0; i < points_a.size(); ++i)
      pa[i] = ux * points_a[i][0] + uy * points_a[i][1];
    for (std::size_t i = 0; i < points_b.size(); ++i)
      pb[i] = ux * points_b[i][0] + uy * points_b[i][1];
    total += w1_1d(std::move(pa), std::move(pb));
  }
  return total / directions;
}

StructuralDistributions structural_metrics(const std::vector<Vec>& trajectory, int n_beads,
                                           int dim) {
  StructuralDistributions out;
  out.has_angles = n_beads >= 3;
  out.has_dihedrals = n_beads >= 4 && dim >= 3;
  Vec p0, p1, p2, p3;
  for (const Vec& frame : trajectory) {
    for (int i = 0; i + 1 < n_beads; ++i) {
      bead(frame, i, dim, p0);
      bead(frame, i + 1, dim, p1);
      out.bonds.push_back(std::sqrt(dot(sub(p1, p0), sub(p1, p0))));
    }
    if (out.has_angles)
      for (int i = 0; i + 2 < n_beads; ++i) {
        bead(frame, i, dim, p0);
        bead(frame, i + 1, dim, p1);
        bead(frame, i + 2, dim, p2);
        const Vec u = sub(p0, p1), v = sub(p2, p1);
        const double nu = std::sqrt(dot(u, u)), nv = std::sqrt(dot(v, v));
        if (nu < 1e-12 || nv < 1e-12) continue;
        out.angles.push_back(std::acos(clamp_unit(dot(u, v) / (nu * nv))));
      }
    if (out.has_dihedrals)
      for (int i = 0; i + 3 < n_beads; ++i) {
        bead(frame, i, dim, p0);
        bead(frame, i + 1, dim, p1);
        bead(frame, i + 2, dim, p2);
        bead(frame, i + 3, dim, p3);
        Vec b1 = sub(p1, p0), b2 = sub(p2, p1), b3 = sub(p3, p2);
        b1.resize(3);
        b2.resize(3);
        b3.resize(3);
        const Vec n1 = cross3(b1, b2), n2 = cross3(b2, b3);
        const double nb2 = std::sqrt(dot(b2, b2));
        if (nb2 < 1e-12 || dot(n1, n1) < 1e-24 || dot(n2, n2) < 1e-24) continue;
        const double x = dot(n1, n2);
        const double y = dot(cross3(n1, n2), b2) / nb2;
        out.dihedrals.push_back(std::atan2(y, x));
      }
    // radius of gyration about the centroid
    Vec centroid(dim, 0.0);
    for (int i = 0; i < n_beads; ++i)
      for (int a = 0; a < dim; ++a) centroid[a] += frame[i * dim + a];
    for (double& c : centroid) c /= n_beads;
    double acc = 0.0;
    for (int i = 0; i < n_beads; ++i)
      for (int a = 0; a < dim; ++a) {
        const double dr = frame[i * dim + a] - centroid[a];
        acc += dr * dr;
      }
    out.gyration.push_back(std::sqrt(acc / n_beads));
  }
  return out;
}

}  // namespace hm
