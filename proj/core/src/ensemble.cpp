#include "hessmatch/ensemble.hpp"

#include <cmath>
#include <numbers>

namespace hm {
namespace {

Mat inv_spd(const Mat& a) {
  const std::size_t n = a.rows();
  Mat inv(n, n);
  Vec e(n, 0.0);
  for (std::size_t c = 0; c < n; ++c) {
    e[c] = 1.0;
    const Vec x = solve_spd(a, e);
    for (std::size_t i = 0; i < n; ++i) inv(i, c) = x[i];
    e[c] = 0.0;
  }
  return inv;
}

bool exact_gaussian_applicable(const ForceField& ff, const CGMap& map) {
  return is_linear(map) && ff.terms.size() == 1 &&
         std::holds_alternative<QuadraticForm>(ff.terms[0]);
}

ConditionalEnsemble sample_conditional_exact(const ForceField& ff, const LinearCGMap& map,
                                             const Vec& r_target, double beta, int count,
                                             RngState& rng) {
  const auto& quad = std::get<QuadraticForm>(ff.terms[0]);
  const std::size_t nd = quad.k.rows();
  const Mat sigma = inv_spd(quad.k) * (1.0 / beta);

  const Mat xi_t = map.xi_r.transpose();
  const Mat a = matmul(map.xi_r, matmul(sigma, xi_t));
  const Mat a_inv = inv_spd(a);
  const Mat gain = matmul(sigma, matmul(xi_t, a_inv));  // nd x cd
  const Vec mean = matvec(gain, r_target);
  Mat cov = sigma - matmul(gain, matmul(map.xi_r, sigma));
  // enforce symmetry before the eigensolve
  for (std::size_t i = 0; i < nd; ++i)
    for (std::size_t j = i + 1; j < nd; ++j) {
      const double s = 0.5 * (cov(i, j) + cov(j, i));
      cov(i, j) = cov(j, i) = s;
    }

  const EigResult eig = sym_eig(cov);
  Vec scale(nd);
  for (std::size_t i = 0; i < nd; ++i)
    scale[i] = eig.eigenvalues[i] > 0.0 ? std::sqrt(eig.eigenvalues[i]) : 0.0;

  ConditionalEnsemble ens;
  ens.target_r = r_target;
  ens.beta = beta;
  ens.restraint_stiffness = 0.0;
  ens.frames.reserve(count);
  for (int t = 0; t < count; ++t) {
    const Vec z = standard_normals(rng, nd);
    Vec x = mean;
    for (std::size_t j = 0; j < nd; ++j) {
      const double zj = scale[j] * z[j];
      if (zj == 0.0) continue;
      for (std::size_t i = 0; i < nd; ++i) x[i] += eig.eigenvectors(i, j) * zj;
    }
    ens.frames.push_back(AtomisticFrame{x, t});
  }
  return ens;
}

Vec restraint_initial(const CGMap& map, const Vec& r_target, int nd) {
  if (const auto* lin = std::get_if<LinearCGMap>(&map)) {
    const Mat a = matmul(lin->xi_r, lin->xi_r.transpose());
    return matvec(lin->xi_r.transpose(), solve_spd(a, r_target));
  }
  const auto& nl = std::get<NonlinearCGMap>(map);
  Vec r(nd, 0.0);
  if (const auto* radial = std::get_if<RadialFromPinnedMap>(&nl.kind)) {
    r[radial->i * nl.dim] = r_target[0];
  } else if (const auto* bond = std::get_if<BondLengthMap>(&nl.kind)) {
    r[bond->i * nl.dim] = r_target[0];
  } else {
    // callback maps start from a small offset to avoid map singularities
    for (int i = 0; i < nd; ++i) r[i] = 0.1 * (i + 1);
  }
  return r;
}

ConditionalEnsemble sample_conditional_restrained(const ForceField& ff, const CGMap& map,
                                                  const Vec& r_target, double beta, int count,
                                                  double stiffness, RngState& rng,
                                                  const ConditionalOptions& opts) {
  const int nd = ff.n_coords();
  Vec r = restraint_initial(map, r_target, nd);

  const double drift = opts.dt / opts.friction;
  const double noise = std::sqrt(2.0 * opts.dt / (beta * opts.friction));

  AtomisticFrame scratch{r, 0};
  auto total_force = [&](const Vec& pos) {
    scratch.positions = pos;
    Vec f = aa_forces(scratch, ff);
    const Vec xi = project_positions(map, pos);
    const Mat j = map_jacobian(map, pos);
    for (std::size_t i = 0; i < f.size(); ++i) {
      double restr = 0.0;
      for (std::size_t I = 0; I < j.rows(); ++I)
        restr += j(I, i) * (xi[I] - r_target[I]);
      f[i] -= stiffness * restr;
    }
    return f;
  };

  auto step = [&]() {
    const Vec f = total_force(r);
    const Vec z = standard_normals(rng, r.size());
    for (std::size_t i = 0; i < r.size(); ++i) r[i] += drift * f[i] + noise * z[i];
  };

  const long burn_in = 10L * count;
  for (long s = 0; s < burn_in; ++s) step();

  ConditionalEnsemble ens;
  ens.target_r = r_target;
  ens.beta = beta;
  ens.restraint_stiffness = stiffness;
  ens.frames.reserve(count);
  for (int t = 0; t < count; ++t) {
    for (int s = 0; s < opts.thinning; ++s) step();
    ens.frames.push_back(AtomisticFrame{r, t});
  }
  return ens;
}

}  // namespace

ConditionalEnsemble sample_conditional(const ForceField& ff, const CGMap& map,
                                       const Vec& r_target, double beta, int count,
                                       double restraint_stiffness, RngState& rng,
                                       const ConditionalOptions& opts) {
  if (beta <= 0.0) throw ValidationError("sample_conditional: beta must be positive");
  if (count < 1) throw ValidationError("sample_conditional: count must be >= 1");
  if (exact_gaussian_applicable(ff, map) && !opts.force_restraint)
    return sample_conditional_exact(ff, std::get<LinearCGMap>(map), r_target, beta, count, rng);
  if (restraint_stiffness < 1e3)
    throw ValidationError("sample_conditional: restraint stiffness must be >= 1e3");
  return sample_conditional_restrained(ff, map, r_target, beta, count, restraint_stiffness, rng,
                                       opts);
}

Vec cg_mean_force(const ConditionalEnsemble& ens, const ForceField& ff, const CGMap& map) {
  if (ens.frames.empty()) throw EmptyEnsemble("cg_mean_force: empty ensemble");
  const int cd = cg_dim(map);
  Vec mean(cd, 0.0);
  const bool linear = is_linear(map);
  for (const AtomisticFrame& fr : ens.frames) {
    const Mat xf = force_projection(map, fr.positions);
    const Vec g = matvec(xf, aa_forces(fr, ff));
    for (int I = 0; I < cd; ++I) mean[I] += g[I];
    if (!linear) {
      const Vec div = xi_divergence(map, fr.positions);
      for (int I = 0; I < cd; ++I) mean[I] += div[I] / ens.beta;
    }
  }
  for (double& x : mean) x /= static_cast<double>(ens.frames.size());
  return mean;
}

HessianEstimate cg_hessian_estimate(const ConditionalEnsemble& ens, const ForceField& ff,
                                    const CGMap& map, const HessianEstimateOptions& opts) {
  const std::size_t n = ens.frames.size();
  if (n < 2) throw EmptyEnsemble("cg_hessian_estimate: needs >= 2 frames");
  const int cd = cg_dim(map);
  const bool full = opts.force_full_path || !is_linear(map);
  const double beta = ens.beta;

  Mat sum_term1(cd, cd), sum_gg(cd, cd);
  Vec sum_g(cd, 0.0);
  Mat sum_t(cd, cd), sum_gdiv(cd, cd), sum_divg(cd, cd), sum_divdiv(cd, cd), sum_gd(cd, cd);
  Vec sum_div(cd, 0.0);

  for (const AtomisticFrame& fr : ens.frames) {
    const Mat xf = force_projection(map, fr.positions);
    const Mat h_aa = aa_hessian(fr, ff);
    const Vec f_aa = aa_forces(fr, ff);
    const Vec g = matvec(xf, f_aa);

    sum_term1 += matmul(xf, matmul(h_aa, xf.transpose()));
    sum_gg += outer(g, g);
    for (int I = 0; I < cd; ++I) sum_g[I] += g[I];

    if (full) {
      const Vec div = xi_divergence(map, fr.positions);
      sum_t += xi_t_matrix(map, fr.positions, f_aa);
      sum_gdiv += outer(g, div);
      sum_divg += outer(div, g);
      sum_divdiv += outer(div, div);
      sum_gd += matmul(xf, xi_grad_divergence(map, fr.positions));
      for (int I = 0; I < cd; ++I) sum_div[I] += div[I];
    }
  }

  const double dn = static_cast<double>(n);
  auto covariance = [&](const Mat& sum_ab, const Vec& sum_a, const Vec& sum_b) {
    Mat c(cd, cd);
    for (int i = 0; i < cd; ++i)
      for (int j = 0; j < cd; ++j)
        c(i, j) = (sum_ab(i, j) - sum_a[i] * sum_b[j] / dn) / (dn - 1.0);
    return c;
  };

  HessianEstimate est;
  est.term1 = sum_term1 * (1.0 / dn);
  est.beta_cov = covariance(sum_gg, sum_g, sum_g) * beta;
  Mat h = est.term1 - est.beta_cov;

  if (full) {
    h -= sum_t * (1.0 / dn);
    h -= covariance(sum_gdiv, sum_g, sum_div);
    h -= covariance(sum_divg, sum_div, sum_g);
    h -= (sum_gd * (1.0 / dn) + covariance(sum_divdiv, sum_div, sum_div)) * (1.0 / beta);
  }

  est.asymmetry = mat_norm_inf(h - h.transpose());
  est.raw = h;
  est.hessian = Mat(cd, cd);
  for (int i = 0; i < cd; ++i)
    for (int j = 0; j < cd; ++j) est.hessian(i, j) = 0.5 * (h(i, j) + h(j, i));
  return est;
}

namespace {

double slice_free_energy_linear(const ForceField& ff, const LinearCGMap& map, const Vec& r_cg,
                                double beta) {
  const int nd = ff.n_coords();
  const int cd = static_cast<int>(map.xi_r.rows());
  const int m = nd - cd;
  if (m > 3) throw DimensionTooLarge("free_energy_quadrature: more than 3 integration dims");

  const Mat a = matmul(map.xi_r, map.xi_r.transpose());
  const Mat a_inv = inv_spd(a);
  const Vec r0 = matvec(map.xi_r.transpose(), matvec(a_inv, r_cg));

  if (m == 0) {
    return aa_energy(AtomisticFrame{r0, 0}, ff);
  }

  // Null-space basis from the eigenvectors of Q = I - Xi^T (Xi Xi^T)^{-1} Xi.
  Mat q = Mat::identity(nd) - matmul(map.xi_r.transpose(), matmul(a_inv, map.xi_r));
  const EigResult eig = sym_eig(q);
  Mat basis(nd, m);
  int found = 0;
  for (int j = 0; j < nd && found < m; ++j) {
    if (eig.eigenvalues[j] > 0.5) {
      for (int i = 0; i < nd; ++i) basis(i, found) = eig.eigenvectors(i, j);
      ++found;
    }
  }
  if (found != m) throw NumericalError("free_energy_quadrature: null-space extraction failed");

  auto energy_at = [&](const Vec& s) {
    Vec r = r0;
    for (int i = 0; i < nd; ++i)
      for (int a2 = 0; a2 < m; ++a2) r[i] += basis(i, a2) * s[a2];
    return aa_energy(AtomisticFrame{r, 0}, ff);
  };

  // Slice minimizer by gradient descent in the null-space coordinates.
  Vec s(m, 0.0);
  const double h = 1e-6;
  double step = 0.1;
  double e_cur = energy_at(s);
  for (int it = 0; it < 500; ++it) {
    Vec g(m, 0.0);
    Vec p = s;
    for (int a2 = 0; a2 < m; ++a2) {
      p[a2] = s[a2] + h;
      const double ep = energy_at(p);
      p[a2] = s[a2] - h;
      const double em = energy_at(p);
      p[a2] = s[a2];
      g[a2] = (ep - em) / (2.0 * h);
    }
    if (norm2(g) < 1e-10) break;
    Vec trial(m);
    for (int a2 = 0; a2 < m; ++a2) trial[a2] = s[a2] - step * g[a2];
    const double e_trial = energy_at(trial);
    if (e_trial < e_cur) {
      s = trial;
      e_cur = e_trial;
      step *= 1.2;
    } else {
      step *= 0.5;
      if (step < 1e-12) break;
    }
  }

  // Per-axis half-width from the local curvature (8 sigma, clamped).
  Vec half(m, 1.0);
  for (int a2 = 0; a2 < m; ++a2) {
    Vec p = s;
    const double hc = 1e-4;
    p[a2] = s[a2] + hc;
    const double ep = energy_at(p);
    p[a2] = s[a2] - hc;
    const double em = energy_at(p);
    double curv = (ep - 2.0 * e_cur + em) / (hc * hc);
    if (curv < 1e-3) curv = 1e-3;
    half[a2] = std::min(50.0, 8.0 / std::sqrt(beta * curv));
  }

  const int n_nodes = 64;
  std::vector<Vec> nodes(m), weights(m);
  for (int a2 = 0; a2 < m; ++a2)
    gauss_legendre(n_nodes, s[a2] - half[a2], s[a2] + half[a2], nodes[a2], weights[a2]);

  double z = 0.0;
  std::vector<int> idx(m, 0);
  Vec p(m);
  while (true) {
    double w = 1.0;
    for (int a2 = 0; a2 < m; ++a2) {
      p[a2] = nodes[a2][idx[a2]];
      w *= weights[a2][idx[a2]];
    }
    z += w * std::exp(-beta * (energy_at(p) - e_cur));
    int axis = 0;
    while (axis < m && ++idx[axis] == n_nodes) idx[axis++] = 0;
    if (axis == m) break;
  }
  return e_cur - std::log(z) / beta;
}

double slice_free_energy_radial(const ForceField& ff, const NonlinearCGMap& nl, double radius,
                                double beta) {
  if (ff.n_atoms != 1)
    throw UnsupportedMap("free_energy_quadrature: radial map quadrature needs a single atom");
  const int dim = ff.dim;
  auto energy_at = [&](const Vec& pos) { return aa_energy(AtomisticFrame{pos, 0}, ff); };

  if (dim == 1) {
    const double ep = energy_at({radius});
    const double em = energy_at({-radius});
    const double e0 = std::min(ep, em);
    const double z = std::exp(-beta * (ep - e0)) + std::exp(-beta * (em - e0));
    return e0 - std::log(z) / beta;
  }

  const int n_nodes = 64;
  Vec phi_nodes, phi_weights;
  gauss_legendre(n_nodes, 0.0, 2.0 * std::numbers::pi, phi_nodes, phi_weights);

  if (dim == 2) {
    double e0 = energy_at({radius, 0.0});
    double z = 0.0;
    for (int i = 0; i < n_nodes; ++i) {
      const double e = energy_at({radius * std::cos(phi_nodes[i]), radius * std::sin(phi_nodes[i])});
      z += phi_weights[i] * std::exp(-beta * (e - e0));
    }
    z *= radius;  // co-area factor R^(dim-1)
    return e0 - std::log(z) / beta;
  }

  Vec th_nodes, th_weights;
  gauss_legendre(n_nodes, 0.0, std::numbers::pi, th_nodes, th_weights);
  double e0 = energy_at({radius, 0.0, 0.0});
  double z = 0.0;
  for (int i = 0; i < n_nodes; ++i)
    for (int j = 0; j < n_nodes; ++j) {
      const double st = std::sin(th_nodes[i]);
      const Vec pos = {radius * st * std::cos(phi_nodes[j]),
                       radius * st * std::sin(phi_nodes[j]), radius * std::cos(th_nodes[i])};
      z += th_weights[i] * phi_weights[j] * st * std::exp(-beta * (energy_at(pos) - e0));
    }
  z *= radius * radius;
  return e0 - std::log(z) / beta;
}

}  // namespace

std::vector<double> free_energy_quadrature(const ForceField& ff, const CGMap& map,
                                           const std::vector<Vec>& r_grid, double beta) {
  if (r_grid.empty()) throw EmptyInput("free_energy_quadrature: empty grid");
  if (cg_dim(map) == 1) {
    for (std::size_t i = 1; i < r_grid.size(); ++i)
      if (r_grid[i][0] <= r_grid[i - 1][0])
        throw ValidationError("free_energy_quadrature: grid must be strictly increasing");
  }

  std::vector<double> out;
  out.reserve(r_grid.size());
  if (const auto* lin = std::get_if<LinearCGMap>(&map)) {
    for (const Vec& r : r_grid) out.push_back(slice_free_energy_linear(ff, *lin, r, beta));
    return out;
  }
  const auto& nl = std::get<NonlinearCGMap>(map);
  if (!std::holds_alternative<RadialFromPinnedMap>(nl.kind))
    throw UnsupportedMap("free_energy_quadrature: only linear and radial maps are supported");
  for (const Vec& r : r_grid) out.push_back(slice_free_energy_radial(ff, nl, r[0], beta));
  return out;
}

}  // namespace hm
