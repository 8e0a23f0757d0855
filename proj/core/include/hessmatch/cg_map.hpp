#ifndef HESSMATCH_CG_MAP_HPP
#define HESSMATCH_CG_MAP_HPP

#include <functional>
#include <variant>

#include "hessmatch/numerics.hpp"

namespace hm {

// R = Xi_r * r. Full row rank, checked via Cholesky of Xi_r Xi_r^T.
struct LinearCGMap {
  Mat xi_r;
};

// xi(r) = |r_i - r_j|
struct BondLengthMap {
  int i = 0, j = 0;
};

// xi(r) = |r_i|, measured from the origin. The remaining particles (if
// any) are expected to be confined by the force field; the map itself
// depends only on particle i.
struct RadialFromPinnedMap {
  int i = 0;
};

// Arbitrary user map; the Jacobian falls back to central finite
// differences (step 1e-5) when no analytic callback is given.
struct CallbackMap {
  int out_dim = 0;
  std::function<Vec(const Vec&)> xi;
  std::function<Mat(const Vec&)> jacobian;  // optional
};

struct NonlinearCGMap {
  int n_atoms = 0;
  int dim = 1;
  std::variant<BondLengthMap, RadialFromPinnedMap, CallbackMap> kind;
};

using CGMap = std::variant<LinearCGMap, NonlinearCGMap>;

int cg_dim(const CGMap& map);                       // N*dim
int aa_dim(const CGMap& map, int fallback = -1);    // n*dim (linear: from matrix)
bool is_linear(const CGMap& map);

Vec project_positions(const CGMap& map, const Vec& r);

// J_xi(r); for linear maps this is Xi_r (r ignored).
Mat map_jacobian(const CGMap& map, const Vec& r);

// Xi_F = (J J^T)^{-1} J. Linear maps ignore r and may pass an empty Vec.
Mat force_projection(const CGMap& map, const Vec& r = {});

// (div Xi_F)_I = sum_i d(Xi_F)_{Ii} / dr_i. Analytic for the shipped
// nonlinear kinds; FD (step 1e-5) otherwise; exactly zero for linear maps.
Vec xi_divergence(const CGMap& map, const Vec& r);

// FD realization of the divergence, used as a cross-check of the
// analytic forms.
Vec xi_divergence_fd(const CGMap& map, const Vec& r, double step = 1e-5);

// T_{IJ} = sum_{i,j} (F_AA)_i (Xi_F)_{Ij} d(Xi_F)_{Ji}/dr_j, via FD of
// Xi_F (step 1e-5). Zero matrix for linear maps.
Mat xi_t_matrix(const CGMap& map, const Vec& r, const Vec& f_aa);

// D_{iJ} = d(div Xi_F)_J / dr_i via FD of xi_divergence, returned as the
// (n*dim) x (N*dim) matrix grad_r (div Xi_F)^T.
Mat xi_grad_divergence(const CGMap& map, const Vec& r, double step = 1e-5);

}  // namespace hm

#endif
