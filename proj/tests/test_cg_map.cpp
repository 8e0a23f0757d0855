#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "hessmatch/cg_map.hpp"

using namespace hm;

namespace {

CGMap selection_map_4to1() {
  Mat xi(1, 4);
  xi(0, 0) = 1.0;
  return LinearCGMap{xi};
}

CGMap com_map() {
  Mat xi(1, 2);
  xi(0, 0) = 0.5;
  xi(0, 1) = 0.5;
  return LinearCGMap{xi};
}

}  // namespace

TEST_CASE("project_positions hand cases") {
  CHECK(project_positions(selection_map_4to1(), {1.0, 2.0, 3.0, 4.0}) == Vec{1.0});
  CHECK(project_positions(com_map(), {0.0, 2.0}) == Vec{1.0});

  const CGMap bond = NonlinearCGMap{2, 2, BondLengthMap{0, 1}};
  CHECK(project_positions(bond, {3.0, 4.0, 0.0, 0.0})[0] == doctest::Approx(5.0));
  CHECK_THROWS_AS(project_positions(bond, {0.0, 0.0, 0.0, 0.0}), SingularGeometry);
}

TEST_CASE("force projection hand cases") {
  const Mat xf_sel = force_projection(selection_map_4to1());
  CHECK(xf_sel(0, 0) == doctest::Approx(1.0));
  CHECK(xf_sel(0, 1) == doctest::Approx(0.0));

  const Mat xf_com = force_projection(com_map());
  CHECK(xf_com(0, 0) == doctest::Approx(1.0));
  CHECK(xf_com(0, 1) == doctest::Approx(1.0));

  const CGMap radial = NonlinearCGMap{1, 2, RadialFromPinnedMap{0}};
  const Mat xf_rad = force_projection(radial, {3.0, 4.0});
  CHECK(xf_rad(0, 0) == doctest::Approx(0.6));
  CHECK(xf_rad(0, 1) == doctest::Approx(0.8));
}

TEST_CASE("force projection is a right inverse of the jacobian transpose") {
  RngState rng{14};
  std::vector<CGMap> maps;
  {
    Mat xi(2, 6);
    xi.data() = standard_normals(rng, 12);
    maps.push_back(LinearCGMap{xi});
  }
  maps.push_back(NonlinearCGMap{2, 3, BondLengthMap{0, 1}});
  maps.push_back(NonlinearCGMap{1, 3, RadialFromPinnedMap{0}});

  for (const CGMap& map : maps) {
    const int n = aa_dim(map, 6);
    for (int rep = 0; rep < 100; ++rep) {
      Vec r = standard_normals(rng, n);
      r[0] += 2.0;  // keep away from map singularities
      const Mat xf = force_projection(map, r);
      const Mat j = map_jacobian(map, r);
      const Mat prod = matmul(xf, j.transpose());
      for (std::size_t i = 0; i < prod.rows(); ++i)
        for (std::size_t c = 0; c < prod.cols(); ++c)
          REQUIRE(std::abs(prod(i, c) - (i == c ? 1.0 : 0.0)) <= 1e-10);
    }
  }
}

TEST_CASE("divergence: linear maps are exactly zero") {
  RngState rng{3};
  Mat xi(2, 6);
  xi.data() = standard_normals(rng, 12);
  const CGMap map = LinearCGMap{xi};
  const Vec div = xi_divergence(map, standard_normals(rng, 6));
  for (double x : div) CHECK(x == 0.0);
}

TEST_CASE("divergence closed forms") {
  const CGMap radial = NonlinearCGMap{1, 2, RadialFromPinnedMap{0}};
  // div of r/|r| in 2-dim is (dim-1)/|r|
  CHECK(xi_divergence(radial, {2.0, 0.0})[0] == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(xi_divergence(radial, {0.0, -2.0})[0] == doctest::Approx(0.5).epsilon(1e-12));

  // both atom blocks contribute (dim-1)/(2 d) each, total (dim-1)/d
  const CGMap bond = NonlinearCGMap{2, 2, BondLengthMap{0, 1}};
  const Vec div = xi_divergence(bond, {0.0, 0.0, 2.0, 0.0});
  CHECK(div[0] == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("analytic divergence matches finite differences") {
  RngState rng{41};
  const std::vector<CGMap> maps = {NonlinearCGMap{1, 3, RadialFromPinnedMap{0}},
                                   NonlinearCGMap{2, 3, BondLengthMap{0, 1}}};
  for (const CGMap& map : maps) {
    const int n = aa_dim(map, -1);
    for (int rep = 0; rep < 25; ++rep) {
      Vec r = standard_normals(rng, n);
      r[0] += 2.0;
      const Vec an = xi_divergence(map, r);
      const Vec fd = xi_divergence_fd(map, r);
      for (std::size_t i = 0; i < an.size(); ++i)
        REQUIRE(std::abs(an[i] - fd[i]) <= 1e-5 * std::max(std::abs(an[i]), 1.0));
    }
  }
}

TEST_CASE("t-matrix vanishes for linear maps and scales in the force") {
  RngState rng{58};
  Mat xi(1, 4);
  xi.data() = standard_normals(rng, 4);
  const Vec r = standard_normals(rng, 4);
  const Vec f = standard_normals(rng, 4);
  const Mat t_lin = xi_t_matrix(LinearCGMap{xi}, r, f);
  CHECK(mat_norm_inf(t_lin) == 0.0);

  const CGMap bond = NonlinearCGMap{2, 2, BondLengthMap{0, 1}};
  const Vec rb = {0.1, -0.3, 1.4, 0.6};
  const Vec fb = standard_normals(rng, 4);
  Vec fb2 = fb;
  for (double& x : fb2) x *= 3.0;
  const Mat t1 = xi_t_matrix(bond, rb, fb);
  const Mat t2 = xi_t_matrix(bond, rb, fb2);
  CHECK(t2(0, 0) == doctest::Approx(3.0 * t1(0, 0)).epsilon(1e-8));
}

TEST_CASE("radial t-matrix with force along the radius is zero") {
  // dXi_F/dr is orthogonal to the unit radial direction, so the
  // contraction annihilates radial forces.
  const CGMap radial = NonlinearCGMap{1, 2, RadialFromPinnedMap{0}};
  const Vec r = {1.2, 0.9};
  const double nr = std::sqrt(dot(r, r));
  Vec f = r;
  for (double& x : f) x *= 2.5 / nr;
  const Mat t = xi_t_matrix(radial, r, f);
  CHECK(std::abs(t(0, 0)) <= 1e-6);
}

TEST_CASE("nonlinear machinery on a linear map degenerates exactly") {
  RngState rng{77};
  Mat xi(1, 4);
  xi.data() = standard_normals(rng, 4);
  const CGMap lin = LinearCGMap{xi};
  const Vec r = standard_normals(rng, 4);
  CHECK(norm_inf(xi_divergence(lin, r)) == 0.0);
  CHECK(mat_norm_inf(xi_t_matrix(lin, r, standard_normals(rng, 4))) == 0.0);
  CHECK(mat_norm_inf(xi_grad_divergence(lin, r)) == 0.0);
}

TEST_CASE("callback map falls back to finite differences") {
  // same geometry as BondLengthMap, expressed through the callback kind
  CallbackMap cb;
  cb.out_dim = 1;
  cb.xi = [](const Vec& r) {
    const double dx = r[0] - r[2], dy = r[1] - r[3];
    return Vec{std::sqrt(dx * dx + dy * dy)};
  };
  const CGMap map = NonlinearCGMap{2, 2, cb};
  const CGMap oracle = NonlinearCGMap{2, 2, BondLengthMap{0, 1}};
  const Vec r = {0.2, 0.1, 1.5, -0.4};
  const Mat xf = force_projection(map, r);
  const Mat xo = force_projection(oracle, r);
  for (std::size_t i = 0; i < xf.cols(); ++i)
    CHECK(xf(0, i) == doctest::Approx(xo(0, i)).epsilon(1e-6));
  const Vec dv = xi_divergence(map, r);
  const Vec dvo = xi_divergence(oracle, r);
  CHECK(dv[0] == doctest::Approx(dvo[0]).epsilon(1e-4));
}
