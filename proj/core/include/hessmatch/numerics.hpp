#ifndef HESSMATCH_NUMERICS_HPP
#define HESSMATCH_NUMERICS_HPP

#include <cstddef>
#include <cstdint>
#include <vector>

#include "hessmatch/errors.hpp"

namespace hm {

using Vec = std::vector<double>;

// Dense row-major binary64 matrix.
class Mat {
 public:
  Mat() = default;
  Mat(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  static Mat identity(std::size_t n) {
    Mat m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
  }

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }

  double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
  double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }

  const std::vector<double>& data() const { return data_; }
  std::vector<double>& data() { return data_; }

  Mat transpose() const;

  Mat& operator+=(const Mat& o);
  Mat& operator-=(const Mat& o);
  Mat& operator*=(double s);

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

Mat operator+(Mat a, const Mat& b);
Mat operator-(Mat a, const Mat& b);
Mat operator*(Mat a, double s);
Mat operator*(double s, Mat a);
Mat matmul(const Mat& a, const Mat& b);
Vec matvec(const Mat& a, const Vec& x);

double dot(const Vec& a, const Vec& b);
double norm2(const Vec& v);
double norm_inf(const Vec& v);
double mat_norm_inf(const Mat& m);   // max |entry|
double mat_norm_fro(const Mat& m);
Vec axpy(double a, const Vec& x, const Vec& y);  // a*x + y
Mat outer(const Vec& a, const Vec& b);
bool all_finite(const Vec& v);
bool all_finite(const Mat& m);

// Deterministic SplitMix64 stream. State is a value type; pass copies
// to decorrelate, never share mutably.
struct RngState {
  std::uint64_t state = 0;
};

std::uint64_t splitmix64_next(RngState& rng);

// uniform in (0,1] via u = 1 - (raw >> 11) * 2^-53
double uniform01(RngState& rng);

// Box-Muller standard normals; the excess value of the final pair is
// discarded for odd counts.
Vec standard_normals(RngState& rng, std::size_t count);

// Cholesky solve for symmetric positive definite A.
// Throws NotPositiveDefinite when a pivot <= 1e-12 * trace(A) / rows.
Vec solve_spd(const Mat& a, const Vec& b);
Mat cholesky_factor(const Mat& a);  // lower-triangular L with A = L L^T

struct EigResult {
  Vec eigenvalues;   // descending
  Mat eigenvectors;  // columns, orthonormal
};

// Cyclic Jacobi eigensolver for symmetric A, capped at 100 sweeps.
EigResult sym_eig(const Mat& a);

// Gauss-Legendre nodes/weights on [a, b].
void gauss_legendre(int n, double a, double b, Vec& nodes, Vec& weights);

}  // namespace hm

#endif
