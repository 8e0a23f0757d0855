#include "hessmatch/cg_map.hpp"

#include <cmath>

namespace hm {
namespace {

constexpr double kSingularDistance = 1e-8;

Vec atom_block(const Vec& r, int atom, int dim) {
  Vec v(dim);
  for (int c = 0; c < dim; ++c) v[c] = r[atom * dim + c];
  return v;
}

struct PairGeom {
  Vec unit;
  double dist = 0.0;
};

PairGeom pair_geom(const Vec& r, int i, int j, int dim) {
  PairGeom g;
  g.unit.resize(dim);
  double d2 = 0.0;
  for (int c = 0; c < dim; ++c) {
    g.unit[c] = r[i * dim + c] - r[j * dim + c];
    d2 += g.unit[c] * g.unit[c];
  }
  g.dist = std::sqrt(d2);
  if (g.dist < kSingularDistance)
    throw SingularGeometry("pair distance below singular threshold");
  for (double& x : g.unit) x /= g.dist;
  return g;
}

Mat fd_jacobian(const CallbackMap& cb, const Vec& r, double step = 1e-5) {
  const Vec base = cb.xi(r);
  Mat j(cb.out_dim, r.size());
  Vec p = r;
  for (std::size_t c = 0; c < r.size(); ++c) {
    p[c] = r[c] + step;
    const Vec fp = cb.xi(p);
    p[c] = r[c] - step;
    const Vec fm = cb.xi(p);
    p[c] = r[c];
    for (int o = 0; o < cb.out_dim; ++o) j(o, c) = (fp[o] - fm[o]) / (2.0 * step);
  }
  return j;
}

}  // namespace

int cg_dim(const CGMap& map) {
  if (const auto* lin = std::get_if<LinearCGMap>(&map))
    return static_cast<int>(lin->xi_r.rows());
  const auto& nl = std::get<NonlinearCGMap>(map);
  return std::visit(
      [](const auto& k) -> int {
        using T = std::decay_t<decltype(k)>;
        if constexpr (std::is_same_v<T, CallbackMap>) return k.out_dim;
        else return 1;
      },
      nl.kind);
}

int aa_dim(const CGMap& map, int fallback) {
  if (const auto* lin = std::get_if<LinearCGMap>(&map))
    return static_cast<int>(lin->xi_r.cols());
  const auto& nl = std::get<NonlinearCGMap>(map);
  if (nl.n_atoms > 0) return nl.n_atoms * nl.dim;
  return fallback;
}

bool is_linear(const CGMap& map) { return std::holds_alternative<LinearCGMap>(map); }

Vec project_positions(const CGMap& map, const Vec& r) {
  if (const auto* lin = std::get_if<LinearCGMap>(&map)) return matvec(lin->xi_r, r);
  const auto& nl = std::get<NonlinearCGMap>(map);
  return std::visit(
      [&](const auto& k) -> Vec {
        using T = std::decay_t<decltype(k)>;
        if constexpr (std::is_same_v<T, BondLengthMap>) {
          return {pair_geom(r, k.i, k.j, nl.dim).dist};
        } else if constexpr (std::is_same_v<T, RadialFromPinnedMap>) {
          const Vec x = atom_block(r, k.i, nl.dim);
          const double d = norm2(x);
          if (d < kSingularDistance)
            throw SingularGeometry("radial map at the origin");
          return {d};
        } else {
          return k.xi(r);
        }
      },
      nl.kind);
}

Mat map_jacobian(const CGMap& map, const Vec& r) {
  if (const auto* lin = std::get_if<LinearCGMap>(&map)) return lin->xi_r;
  const auto& nl = std::get<NonlinearCGMap>(map);
  const int nd = nl.n_atoms * nl.dim;
  return std::visit(
      [&](const auto& k) -> Mat {
        using T = std::decay_t<decltype(k)>;
        if constexpr (std::is_same_v<T, BondLengthMap>) {
          const PairGeom g = pair_geom(r, k.i, k.j, nl.dim);
          Mat j(1, nd);
          for (int c = 0; c < nl.dim; ++c) {
            j(0, k.i * nl.dim + c) = g.unit[c];
            j(0, k.j * nl.dim + c) = -g.unit[c];
          }
          return j;
        } else if constexpr (std::is_same_v<T, RadialFromPinnedMap>) {
          const Vec x = atom_block(r, k.i, nl.dim);
          const double d = norm2(x);
          if (d < kSingularDistance)
            throw SingularGeometry("radial map at the origin");
          Mat j(1, nd);
          for (int c = 0; c < nl.dim; ++c) j(0, k.i * nl.dim + c) = x[c] / d;
          return j;
        } else {
          if (k.jacobian) return k.jacobian(r);
          return fd_jacobian(k, r);
        }
      },
      nl.kind);
}

Mat force_projection(const CGMap& map, const Vec& r) {
  const Mat j = map_jacobian(map, r);
  const Mat gram = matmul(j, j.transpose());
  // Solve (J J^T) X = J column by column.
  Mat xf(j.rows(), j.cols());
  Vec col(j.rows());
  for (std::size_t c = 0; c < j.cols(); ++c) {
    for (std::size_t i = 0; i < j.rows(); ++i) col[i] = j(i, c);
    const Vec x = solve_spd(gram, col);
    for (std::size_t i = 0; i < j.rows(); ++i) xf(i, c) = x[i];
  }
  return xf;
}

Vec xi_divergence(const CGMap& map, const Vec& r) {
  if (is_linear(map)) return Vec(cg_dim(map), 0.0);
  const auto& nl = std::get<NonlinearCGMap>(map);
  return std::visit(
      [&](const auto& k) -> Vec {
        using T = std::decay_t<decltype(k)>;
        if constexpr (std::is_same_v<T, BondLengthMap>) {
          // Xi_F = J/2; each atom block contributes (dim-1)/(2 d).
          const PairGeom g = pair_geom(r, k.i, k.j, nl.dim);
          return {(nl.dim - 1) / g.dist};
        } else if constexpr (std::is_same_v<T, RadialFromPinnedMap>) {
          const Vec x = atom_block(r, k.i, nl.dim);
          const double d = norm2(x);
          if (d < kSingularDistance)
            throw SingularGeometry("radial map at the origin");
          return {(nl.dim - 1) / d};
        } else {
          return xi_divergence_fd(map, r);
        }
      },
      nl.kind);
}

Vec xi_divergence_fd(const CGMap& map, const Vec& r, double step) {
  const int nd = static_cast<int>(r.size());
  const int cd = cg_dim(map);
  Vec div(cd, 0.0);
  Vec p = r;
  for (int i = 0; i < nd; ++i) {
    p[i] = r[i] + step;
    const Mat xp = force_projection(map, p);
    p[i] = r[i] - step;
    const Mat xm = force_projection(map, p);
    p[i] = r[i];
    for (int I = 0; I < cd; ++I) div[I] += (xp(I, i) - xm(I, i)) / (2.0 * step);
  }
  return div;
}

Mat xi_t_matrix(const CGMap& map, const Vec& r, const Vec& f_aa) {
  const int cd = cg_dim(map);
  if (is_linear(map)) return Mat(cd, cd);
  const int nd = static_cast<int>(r.size());
  const Mat xf = force_projection(map, r);
  const double step = 1e-5;
  Mat t(cd, cd);
  Vec p = r;
  for (int j = 0; j < nd; ++j) {
    p[j] = r[j] + step;
    const Mat xp = force_projection(map, p);
    p[j] = r[j] - step;
    const Mat xm = force_projection(map, p);
    p[j] = r[j];
    // D_{Ji} = d(Xi_F)_{Ji} / dr_j at fixed j.
    for (int I = 0; I < cd; ++I)
      for (int J = 0; J < cd; ++J) {
        double acc = 0.0;
        for (int i = 0; i < nd; ++i)
          acc += f_aa[i] * (xp(J, i) - xm(J, i)) / (2.0 * step);
        t(I, J) += xf(I, j) * acc;
      }
  }
  return t;
}

Mat xi_grad_divergence(const CGMap& map, const Vec& r, double step) {
  const int nd = static_cast<int>(r.size());
  const int cd = cg_dim(map);
  Mat d(nd, cd);
  if (is_linear(map)) return d;
  Vec p = r;
  for (int i = 0; i < nd; ++i) {
    p[i] = r[i] + step;
    const Vec dp = xi_divergence(map, p);
    p[i] = r[i] - step;
    const Vec dm = xi_divergence(map, p);
    p[i] = r[i];
    for (int J = 0; J < cd; ++J) d(i, J) = (dp[J] - dm[J]) / (2.0 * step);
  }
  return d;
}

}  // namespace hm
