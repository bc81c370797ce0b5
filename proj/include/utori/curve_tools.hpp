#pragma once

#include "utori/periodic_series.hpp"

namespace utori {

// A closed curve S^1 -> C is a one-variable complex series f(theta); its
// derivative f' = rho exp(i mu) is sampled on a uniform grid.

constexpr int kCurveSamples = 4096;

// Winding number of f' around 0 by phase unwrapping. Refuses "(immersion)"
// when |f'| vanishes on the grid.
int gauss_degree(const PeriodicSeries& f, int samples = kCurveSamples);

struct PhaseDerivative {
  Eigen::VectorXd dmu;  // mu'(theta_g) = Im(f'' / f')
  double min_abs = 0.0;
  bool noncritical = false;  // min |mu'| > tol
};

PhaseDerivative noncritical_phase(const PeriodicSeries& f, int samples = kCurveSamples, double tol = 1e-8);

// f o psi^{-1} for psi(theta) = mu(theta) / d, so that the new derivative is
// rho~(s) exp(i d s) with rho~ > 0; mean removed, re-expanded to `degree`.
// Requires a non-critical immersion of nonzero degree.
PeriodicSeries reparametrize_by_phase(const PeriodicSeries& f, int degree = 64, double* dropped = nullptr);

// f_t with f_t' = ((1 - t) rho~_0 + t rho~_1) exp(i d s) and zero mean, after both
// inputs are reparametrized by phase. Refuses "(degree)" when the Gauss degrees
// differ or vanish and "(noncritical)" for critical inputs.
PeriodicSeries whitney_homotopy(const PeriodicSeries& f0, const PeriodicSeries& f1, double t, int degree = 64);

struct EmbeddingReport {
  int degree = 0;
  int I_f = 0;  // d - sign d
  bool is_embedding = false;  // |d| = 1
  // min |f(x) - f(y)| over sample pairs at least 1/64 turn apart
  double min_separated_distance = 0.0;
  bool grid_injective = false;
};

// Requires a non-critical immersion, tagged "(noncritical)".
EmbeddingReport embedding_check(const PeriodicSeries& f, int samples = 512);

}  // namespace utori
