#pragma once

#include <Eigen/Dense>

#include <complex>
#include <functional>
#include <span>
#include <vector>

namespace utori {

using Complex = std::complex<double>;
using MultiIndex = Eigen::VectorXi;

// Truncated multivariate Fourier series
//
//   h(theta) = sum_k c_k exp(i <k, theta>),   |k_j| <= N for every axis j,
//
// representing a 2pi-periodic holomorphic function on a strip |Im theta_j| < r.
// Through z_j = exp(i theta_j) the same object stores Laurent data on the
// annulus exp(-r) < |z_j| < exp(r); the Laurent exponent equals the Fourier index.
//
// Coefficients are stored densely in a vector of length (2N+1)^n with axis 0
// varying fastest. Axes are numbered from 0 in this API.
class PeriodicSeries {
 public:
  PeriodicSeries() = default;
  PeriodicSeries(int dim, int degree, bool real = false);
  PeriodicSeries(int dim, int degree, Eigen::VectorXcd coeffs, bool real);

  static PeriodicSeries constant(int dim, int degree, Complex value);
  static PeriodicSeries monomial(int dim, int degree, const MultiIndex& k, Complex c = 1.0);
  // c exp(i<k,theta>) + conj(c) exp(-i<k,theta>), flagged real.
  static PeriodicSeries real_mode(int dim, int degree, const MultiIndex& k, Complex c);

  int dim() const { return dim_; }
  int degree() const { return degree_; }
  int side() const { return 2 * degree_ + 1; }
  bool is_real() const { return real_; }
  Eigen::Index size() const { return coeffs_.size(); }

  const Eigen::VectorXcd& coeffs() const { return coeffs_; }
  Complex coeff(const MultiIndex& k) const;
  Complex constant_term() const;
  void set_coeff(const MultiIndex& k, Complex c);

  bool in_range(const MultiIndex& k) const;
  Eigen::Index linear_index(const MultiIndex& k) const;
  MultiIndex multi_index(Eigen::Index linear) const;

  // Projection onto c_{-k} = conj(c_k); the result carries the real flag.
  PeriodicSeries as_real() const;
  PeriodicSeries as_complex() const;
  // max_k |c_{-k} - conj(c_k)|
  double reality_defect() const;
  bool is_zero() const;

  PeriodicSeries& operator+=(const PeriodicSeries& other);
  PeriodicSeries& operator-=(const PeriodicSeries& other);
  PeriodicSeries& operator*=(Complex s);

 private:
  int dim_ = 0;
  int degree_ = 0;
  bool real_ = false;
  Eigen::VectorXcd coeffs_;
};

PeriodicSeries operator+(PeriodicSeries a, const PeriodicSeries& b);
PeriodicSeries operator-(PeriodicSeries a, const PeriodicSeries& b);
PeriodicSeries operator-(PeriodicSeries a);
PeriodicSeries operator*(Complex s, PeriodicSeries a);
PeriodicSeries operator*(PeriodicSeries a, Complex s);

// Calls fn(linear_index, k) for every stored index in storage order.
void for_each_index(int dim, int degree, const std::function<void(Eigen::Index, const MultiIndex&)>& fn);

// ---------------------------------------------------------------------------
// Evaluation and norms

Complex eval(const PeriodicSeries& h, const Eigen::Ref<const Eigen::VectorXcd>& theta);
Complex eval(const PeriodicSeries& h, const Eigen::Ref<const Eigen::VectorXd>& theta);

// sum_k |c_k| exp(r sum_j |k_j|); majorizes sup |h| over the strip of width r.
double coeff_norm(const PeriodicSeries& h, double r);

struct NormEstimate {
  double coeff_bound = 0.0;
  double sampled_sup = 0.0;
};

// Both norms of h on the strip of half-width r, 0 < r < 1. The sampled value is
// the maximum modulus over a uniform grid on the distinguished boundary
// Im theta_j = +-r; it is an estimate, the coefficient bound is a majorant.
NormEstimate strip_norm(const PeriodicSeries& h, double r, int grid = 0);

// ---------------------------------------------------------------------------
// Coefficient-level operators

// Mean over each listed axis: drops every index with a nonzero entry on one of them.
PeriodicSeries average(const PeriodicSeries& h, std::span<const int> axes);
PeriodicSeries average_all(const PeriodicSeries& h);

// Largest |c_k| over indices with k_axis = 0, i.e. the size of the axis mean.
double axis_mean_size(const PeriodicSeries& h, int axis);

// h = L_0 h + L_1 h + ... + L_n h where L_0 h is constant, L_j h depends on the
// first j variables only and has zero mean in variable j. Entry j of the result
// is L_j h.
std::vector<PeriodicSeries> l_decompose(const PeriodicSeries& h);

PeriodicSeries derivative(const PeriodicSeries& h, int axis);

// The anti-derivative in `axis` with zero mean in that axis. Requires the axis
// mean of h to vanish to within `tol` on every coefficient.
PeriodicSeries antiderivative(const PeriodicSeries& h, int axis, double tol = 1e-12);

// h(theta + a) for a real translation a.
PeriodicSeries translate(const PeriodicSeries& h, const Eigen::Ref<const Eigen::VectorXd>& a);

// Coefficients weighted by exp(-<k, s>): the series of theta -> h(theta + i s).
PeriodicSeries imaginary_shift(const PeriodicSeries& h, const Eigen::Ref<const Eigen::VectorXd>& s);

// Zero-pads or truncates to the new degree bound; `dropped` receives the l1 mass removed.
PeriodicSeries resize(const PeriodicSeries& h, int degree, double* dropped = nullptr);

// Zeroes every coefficient with |c_k| <= tol.
PeriodicSeries chop(const PeriodicSeries& h, double tol);

// Smallest degree bound that keeps every coefficient with |c_k| > tol.
PeriodicSeries trim(const PeriodicSeries& h, double tol);

// Keeps the coefficients supported on the first `keep` axes and views them as a
// series in `keep` variables (or the reverse embedding for `extend_dim`).
PeriodicSeries restrict_leading(const PeriodicSeries& h, int keep);
PeriodicSeries extend_dim(const PeriodicSeries& h, int dim);

// ---------------------------------------------------------------------------
// Uniform grids theta_j = 2 pi i_j / M, axis 0 fastest.

// Smallest integer >= min_points with no prime factors above 5.
int fft_size(int min_points);
// Composition grid: 2(2N+1) points per axis, rounded up to a fast size.
int default_grid(int degree);

Eigen::VectorXd grid_axis(int M);
// Coordinates of grid point `linear` (optionally offset by `offset` in units of 2pi/M).
Eigen::VectorXd grid_point(int dim, int M, Eigen::Index linear, double offset = 0.0);
Eigen::Index grid_count(int dim, int M);

// Exact values of h on the grid (indices beyond the Nyquist band are folded).
Eigen::VectorXcd to_grid(const PeriodicSeries& h, int M);
// Values on the grid shifted by `offset` cells along every axis.
Eigen::VectorXcd to_grid(const PeriodicSeries& h, int M, double offset);

struct Reexpanded {
  PeriodicSeries series;
  // l1 mass of the resolvable coefficients beyond the requested degree.
  double dropped_mass = 0.0;
};

// Discrete Fourier re-expansion of grid values; requires M >= 2 degree + 1.
Reexpanded from_grid(const Eigen::VectorXcd& values, int dim, int M, int degree, bool real);

// Pointwise map of several series through `fn` on a grid, re-expanded to `degree`.
using PointwiseFn = std::function<Complex(std::span<const Complex>)>;
Reexpanded apply_pointwise(std::span<const PeriodicSeries> inputs, const PointwiseFn& fn, int degree,
                           bool real, int grid = 0);

Reexpanded multiply(const PeriodicSeries& a, const PeriodicSeries& b, int degree, int grid = 0);
// a / b; throws ComputationError when |b| < min_denominator somewhere on the grid.
Reexpanded quotient(const PeriodicSeries& a, const PeriodicSeries& b, int degree, int grid = 0,
                    double min_denominator = 1e-8);

double max_abs_on_grid(const PeriodicSeries& h, int M);

namespace detail {
// In-place multidimensional DFT over an M^dim array (axis 0 fastest), unscaled.
// forward: X_k = sum_m x_m exp(-2 pi i k.m / M); backward uses the + sign.
void fft_nd(Eigen::VectorXcd& data, int dim, int M, bool forward);
}  // namespace detail

}  // namespace utori
