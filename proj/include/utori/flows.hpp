#pragma once

#include "utori/periodic_series.hpp"
#include "utori/torus_map.hpp"

#include <vector>

namespace utori {

// dtheta_j/dt = p_j(theta); components share dimension and degree.
struct PeriodicVectorField {
  std::vector<PeriodicSeries> p;

  PeriodicVectorField() = default;
  explicit PeriodicVectorField(std::vector<PeriodicSeries> components);

  int dim() const { return static_cast<int>(p.size()); }
  int degree() const;
  bool is_real() const;
  // max_j ||p_j||_r in the coefficient norm
  double norm(double r) const;
};

// sum_j D_j p_j
PeriodicSeries divergence(const PeriodicVectorField& v);

struct FlowOptions {
  // Degree of the re-expanded flow map; 0 selects the field degree.
  int degree = 0;
  int grid = 0;
  // Refuse unless ||p||_{r1} <= r1 delta.
  bool check_hypothesis = true;
  // Also integrate  L' = div p (theta(t))  for the log-determinant.
  bool log_det = false;
  // Largest accepted verification defect.
  double defect_tol = 1e-9;
  // Step count override (0: the default rule).
  int steps = 0;
};

struct FlowResult {
  TorusMapLift map;  // identity linear part, theta' = theta + f(theta, t)
  double t = 0.0;
  int step_count = 0;
  // max deviation between the re-expanded map and a twice-finer integration
  // on an offset verification grid
  double defect = 0.0;
  double dropped_mass = 0.0;
  PeriodicSeries log_det;  // set when requested
};

// Time-t flow by fixed-step RK4 with max(32, ceil(8 ||p||_{r1} / (r1 delta)))
// steps, integrated from the nodes of the real grid and re-expanded.
FlowResult flow(const PeriodicVectorField& v, double t, double r1, double delta, const FlowOptions& opts = {});

// log det D_theta phi_t = int_0^t (div p)(phi_s) ds
PeriodicSeries log_det_jacobian(const PeriodicVectorField& v, double t, double r1, double delta,
                                const FlowOptions& opts = {});

}  // namespace utori
