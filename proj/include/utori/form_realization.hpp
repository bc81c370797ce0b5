#pragma once

#include "utori/flows.hpp"
#include "utori/kam_fibering.hpp"
#include "utori/periodic_series.hpp"
#include "utori/torus_map.hpp"

#include <cmath>
#include <string>
#include <vector>

namespace utori {

// Functions on the annulus are stored through z = exp(i theta): the Laurent
// coefficient of z^i is the Fourier coefficient at index i. Such series carry
// no reality flag.

// z'_j = z_j g_j(z) with g_j = exp(i f_j(theta)), where theta' = theta + f(theta)
// is the lift in strip coordinates.
struct AnnulusMap {
  TorusMapLift lift;

  int dim() const { return lift.dim(); }
  // log g_j = i f_j
  PeriodicSeries log_g(int j) const;
  Eigen::VectorXcd operator()(const Eigen::Ref<const Eigen::VectorXcd>& z) const;
};

// v = sum_j q_j d/dz_j
struct HoloVectorField {
  std::vector<PeriodicSeries> q;

  int dim() const { return static_cast<int>(q.size()); }
  // The same field in strip coordinates, p_j(theta) = -i exp(-i theta_j) q_j(z).
  PeriodicVectorField theta_field() const;
};

// K_1 a, ..., K_n a, K_{n+1} a. K_j keeps the Laurent terms with
// i_1 = ... = i_{j-1} = -1 and i_j != -1; K_{n+1} a is the monomial a_{-1,...,-1} / (z_1 ... z_n).
std::vector<PeriodicSeries> k_decompose(const PeriodicSeries& a);

struct MeanCheck {
  bool ok = true;
  double defect = 0.0;  // |a_{-1,...,-1}|
};

// The obstruction coefficient must vanish within 1e-12.
MeanCheck mean_zero_check(const PeriodicSeries& a);

// q_j = i D_j^{-1}(z_j K_j a): the solution of sum_j dq_j/dz_j = a without
// monomials having i_j = 0. Refuses "(kn)" when the mean check fails.
HoloVectorField build_divergence_vector_field(const PeriodicSeries& a);

// sum_j dq_j/dz_j as a Laurent series.
PeriodicSeries holo_divergence(const HoloVectorField& v);

struct RealizationStep {
  AnnulusMap psi;          // time -1 flow of the field of a
  PeriodicSeries a_next;   // 1 + a^ = (1 + a o psi) det Dpsi
  double a_norm = 0.0;      // ||a||_r
  double a_next_norm = 0.0; // ||a^||_{(1 - 2 delta) r}
  double p_norm = 0.0;      // ||p||_r of the strip field
  double flow_defect = 0.0;
  double dropped_mass = 0.0;
  // sup |(1 + a o psi) det Dpsi - (1 + a^)| on the offset grid, det Dpsi from the re-expanded map
  double reconstruction = 0.0;
};

// One step. Requires 0 < delta < 1/2, the mean condition "(kn)" and the flow
// condition ||p||_r <= r delta on the strip field, tagged "(f4)".
RealizationStep realization_step(const PeriodicSeries& a, double r, double delta, int degree);

// r_{m+1} = (1 - 2 delta_m) r_m,  delta_m = e^{-2} / (2 n (m+2)^2).
struct RealizationSchedule {
  double r0 = 0.5;
  int max_iter = 20;
  double stop_tol = 1e-12;

  static double delta(int m, int n) { return std::exp(-2.0) / (2.0 * n * (m + 2.0) * (m + 2.0)); }
  double r(int m, int n) const;
};

struct RealizationOptions {
  // Working degree; 0 selects max(4 deg a, 16).
  int degree = 0;
  // Smallness constant of ||a||_{r0} <= eps r0.
  double eps = 1e-3;
  bool check_small = true;
  KamConstants constants;
};

struct RealizationResult {
  AnnulusMap phi;  // det Dphi = 1 + a, so phi^* Omega = omega
  AnnulusMap psi;  // composite psi_0 o ... o psi_M with psi^* omega = Omega
  KamTrace trace;
  bool converged = false;
  std::string failed_bound;
  std::string failure;
  std::vector<std::string> warnings;

  double det_residual = 0.0;        // sup |det Dphi - (1 + a)| on the offset real grid
  double inverse_residual = 0.0;    // sup |psi(phi(z)) - z| on A_{r0/8} sample tori
  double inverse_contraction = 0.0; // largest ratio of successive fixed-point corrections
  double min_abs_det = 0.0;         // totally real iff positive
  double min_phase_gradient = 0.0;  // min |grad mu| for the phase mu of omega_phi
  double injectivity_margin = 0.0;  // min |phi(x) - phi(y)| / |x - y| over a sample grid
  bool totally_real = false;
  bool noncritical = false;
  bool embedding = false;
};

// Newton scheme on the schedule followed by inversion of the composite with
// T: xi -> z - psi(xi) + xi. Refuses "(strip)", "(kn)" and "(smalla)" up front;
// later failures are reported in the result.
RealizationResult realize_form(const PeriodicSeries& a, const RealizationSchedule& schedule,
                               const RealizationOptions& opts = {});

}  // namespace utori
