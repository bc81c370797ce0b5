#pragma once

#include "utori/flows.hpp"
#include "utori/periodic_series.hpp"
#include "utori/torus_map.hpp"

#include <algorithm>
#include <string>
#include <vector>

namespace utori {

// r_m = (1 + 1/(m+1)) r0 / 2,  delta_m = 1 / (4 (m+2)^2),  r_{m+1} = (1 - 4 delta_m) r_m.
struct KamSchedule {
  double r0 = 0.5;
  int max_iter = 20;
  double stop_tol = 1e-12;

  double r(int m) const { return 0.5 * (1.0 + 1.0 / (m + 1)) * r0; }
  static double delta(int m) { return 1.0 / (4.0 * (m + 2.0) * (m + 2.0)); }
};

// One record per level. For the fibering loop b = max_{j>=2} ||L_j h||_{r_m} and
// B = max(|L_0 h|, ||D_1 L_1 h||_{r_m}); the realization loop stores ||a_m|| in b.
struct KamRecord {
  int m = 0;
  double r = 0.0;
  double delta = 0.0;
  double b = 0.0;
  double B = 0.0;
  // truncation mass dropped while building the step
  double residual = 0.0;
  // b_{m+1} r_m^3 delta_m^3 / b_m^2 (fibering) or a_{m+1} r_m delta_m / a_m^2 (realization)
  double contraction = 0.0;
};

using KamTrace = std::vector<KamRecord>;

// Operational constants of the step estimates, fitted on random admissible
// data; the checks use these values, which carry a safety factor of 2 over the
// largest measured ones.
struct KamConstants {
  double c2 = 0.1;    // ||p||_{(1-delta) r} <= c2 b / (r delta)
  double c4 = 1e-3;   // b~ <= c4 b^2 / (r^3 delta^3)
  double c7 = 0.02;    // ||a^||_{(1-2 delta) r} <= c7 ||a||_r^2 / (r delta)

  double c6(int n) const { return std::max(n * c2, 27.0 * c4); }
};

struct FiberingOptions {
  // Working degree of every series in the loop; 0 selects max(4 deg h, 16).
  int degree = 0;
  // Smallness constant of ||h||_{r0} <= eps r0^3.
  double eps = 1e-3;
  bool check_smallh = true;
  KamConstants constants;
};

struct FiberingStep {
  TorusMapLift phi;  // time -1 flow of p
  PeriodicVectorField p;
  PeriodicSeries k_next;  // theta_1 + k_next(theta) = theta'_1 + h(theta')
  double b = 0.0, B = 0.0;                // at r
  double b_next = 0.0, B_next = 0.0;      // at (1 - 4 delta) r
  double divergence = 0.0;                // coefficient norm of div p
  double dropped_mass = 0.0;
  double flow_defect = 0.0;
};

struct FiberingResult {
  TorusMapLift Phi;     // mu o Phi = theta_1 + k(theta_1)
  PeriodicSeries k;     // one variable, [k] = 0
  KamTrace trace;
  double residual = 0.0;        // sup |mu(Phi(theta)) - theta_1 - k(theta_1)| on the real grid
  double volume_defect = 0.0;   // sup |det DPhi - 1| on the real grid
  double translation = 0.0;     // L_0 of the last iterate, removed by theta_1 -> theta_1 - c
  bool converged = false;
  // Set when a step precondition failed mid-run; the trace is partial.
  std::string failed_bound;
  std::string failure;
  std::vector<std::string> warnings;
};

// B and b of h at width r.
std::pair<double, double> fibering_sizes(const PeriodicSeries& h, double r);

// One KAM step for mu = theta_1 + h. Requires 0 < delta < 1/4, B_r <= 1/2 "(p4)"
// and b_r <= r^2 delta^2 / (n c2) "(b)".
FiberingStep fibering_step(const PeriodicSeries& h, double r, double delta, int degree,
                           const KamConstants& constants = {});

// Full loop on the schedule. Refuses "(smallh)" up front; a step failure
// mid-run is reported in the result together with the partial trace.
FiberingResult fibering_normalize(const PeriodicSeries& h, const KamSchedule& schedule,
                                  const FiberingOptions& opts = {});

// min over shifts s in {0} (or {0, pi}) of sup_theta |khat(theta + s) - k(theta)|.
// Both series must have zero mean, tagged "(mean)".
double k_uniqueness_residual(const PeriodicSeries& k, const PeriodicSeries& khat, bool allow_half_turn);

}  // namespace utori
