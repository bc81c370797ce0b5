#pragma once

#include "utori/curve_tools.hpp"
#include "utori/form_realization.hpp"
#include "utori/kam_fibering.hpp"
#include "utori/periodic_series.hpp"
#include "utori/torus_map.hpp"

#include <string>
#include <vector>

namespace utori {

// phi: A_{r0} -> C^n as n Laurent series phi_j(z), stored like every annulus
// function through z = exp(i theta).
struct TorusEmbedding {
  std::vector<PeriodicSeries> phi;
  double r0 = 0.5;

  int dim() const { return static_cast<int>(phi.size()); }
  int degree() const;
  // max_j ||phi_j - z_j|| in the coefficient norm at width r
  double closeness(double r) const;
  Eigen::VectorXcd operator()(const Eigen::Ref<const Eigen::VectorXcd>& z) const;

  static TorusEmbedding identity(int n, double r0 = 0.5);
};

// z_j exp(i f_j(theta)) re-expanded to `degree`; `dropped` receives the largest l1 mass removed.
TorusEmbedding embedding_from_map(const AnnulusMap& psi, double r0, int degree, double* dropped = nullptr);

// phi o chi for a real near-identity chi: the same torus in new angles.
TorusEmbedding reparametrize_embedding(const TorusEmbedding& e, const TorusMapLift& chi, int degree);

// Phi o phi for Phi(x) = x + c x_source^power e_target, target != source: a unimodular shear.
TorusEmbedding apply_unimodular_shear(const TorusEmbedding& e, int target, int source, int power, Complex c,
                                      int degree);

// U o phi o T with T(z) = (-z_1 z_n^2, z_2, ..., 1/z_n) and the unimodular
// U(x) = (-x_1 x_n^2, x_2, ..., 1/x_n). The image is U(M), the result stays near
// the identity, and its pulled-back form has the phase of k(theta_1 + pi).
TorusEmbedding reflect_embedding(const TorusEmbedding& e, int degree);

struct JacobianDensity {
  PeriodicSeries a;  // det D_z phi - 1
  double norm_half = 0.0;  // ||a|| at r0 / 2
  double min_abs_det = 0.0;
  double dropped_mass = 0.0;
};

// D_z phi_jk = D_k phi_j / (i z_k) evaluated on the grid. Refuses "(totally-real)"
// when det D phi vanishes on the grid.
JacobianDensity jacobian_density(const TorusEmbedding& e, int degree);

struct PolarSplit {
  PeriodicSeries b1;  // |1 + a| - 1 on R^n
  PeriodicSeries h1;  // arg(1 + a) on R^n
  // sup |(1 + b1) exp(i h1) - (1 + a)| on the offset grid
  double reconstruction = 0.0;
  double dropped_mass = 0.0;
};

// Refuses "(branch)" when |a| >= 1/2 somewhere on the grid.
PolarSplit polar_split(const PeriodicSeries& a, int degree);

struct PipelineOptions {
  // Working degree; 0 selects max(16, min(2 deg phi, 32)) (16 for a bare density).
  int degree = 0;
  int max_iter = 20;
  double stop_tol = 1e-12;
  // Every stage must leave a residual below this before the next runs.
  double stage_tol = 1e-8;
  KamConstants constants;
  int curve_degree = 64;
};

struct InvariantReport {
  int n = 0;
  double r0 = 0.0;
  double rho0 = 1.0;            // 1 + [b]
  Complex one_plus_mean_a = 1.0;  // 1 + [a]
  double total_volume = 0.0;    // (2 pi)^n rho0
  PeriodicSeries k;             // one variable, [k] = 0
  double translation = 0.0;     // constant removed by the fibering stage
  TorusMapLift normalizer;      // phi_0^{-1} phi_1^{-1} phi_2 phi_0
  PeriodicSeries g;             // d/dtheta g = rho0 exp(i (theta + k))
  int g_degree = 0;
  double min_one_plus_dk = 0.0;
  // sup |mu_1 o phi - s - k(s)|, s = theta_1 + ... + theta_n, on the offset grid
  double phase_residual = 0.0;
  // sup |(1 + b_1 o phi) det Dphi - rho0| on the offset grid
  double volume_residual = 0.0;
  double exactness_defect = 0.0;  // 2 pi |[exp(i (theta + k))]|
  double closeness = 0.0;         // ||phi - Id||_{r0}
  double a_norm = 0.0;            // ||a||_{r0 / 2}
  // stage name and its residual, in order
  std::vector<std::pair<std::string, double>> stages;
  KamTrace fibering_trace;
  std::vector<std::string> warnings;
};

// The normal form of the torus phi(T^n). Stage failures throw HypothesisError
// with the violated bound or ComputationError naming the stage.
InvariantReport theorem_m_normalize(const TorusEmbedding& e, const PipelineOptions& opts = {});

// The same pipeline started from the form (1 + a) dz_1 ... dz_n on A_{r0}.
InvariantReport normalize_density(const PeriodicSeries& a, double r0, const PipelineOptions& opts = {});

// 2 pi |mean of exp(i (theta + k(theta)))| by quadrature.
double exactness_defect(const PeriodicSeries& k);

// Refuses "(exact)" when the exactness defect exceeds 1e-8 and "(noncritical)"
// when 1 + k' <= 0 somewhere on the grid.
PeriodicSeries build_g(const PeriodicSeries& k, double rho0, int degree = 64);

struct NormalFormEmbedding {
  TorusEmbedding psi;
  // sup over the grid of |det D_z psi - rho0 exp(i k(s))| with rho0 exp(i (s + k(s))) = d/ds g
  double form_residual = 0.0;
};

// psi(z_1, z') = (i zeta^{-1} g(zeta z_1), z'), zeta = z_2 ... z_n. The factor i
// makes psi the identity for g = -i exp(i theta). Refuses "(dim)" for n < 2 and
// "(embedding)" unless g is non-critical of degree 1.
NormalFormEmbedding normal_form_embedding(const PeriodicSeries& g, int n, double r0 = 0.5);

}  // namespace utori
