#pragma once

#include "utori/periodic_series.hpp"
#include "utori/torus_map.hpp"

namespace utori {

struct MoserOptions {
  // Degree of the periodic parts f_j; 0 selects max(3 deg b, 12).
  int degree = 0;
};

struct MoserResult {
  // theta'_j = theta_j + f_j(theta_1, ..., theta_j), [f_j]_j = 0
  TorusMapLift map;
  // [b]
  double mean = 0.0;
  // sup over an offset grid of |(1 + [b]) prod_j (1 + D_j f_j) - (1 + b)|
  double residual = 0.0;
  // grid mean of prod_j (1 + D_j f_j) - 1
  double volume_balance = 0.0;
  double b_norm = 0.0;  // ||b||_r
  double f_norm = 0.0;  // max_j ||f_j||_r
  double dropped_mass = 0.0;
};

// Transports the density (1 + b) dtheta to the constant (1 + [b]) dtheta by a
// triangular map:  1 + b = (1 + [b]) det Dphi.  Requires b real on R^n and
// ||b||_r <= r / (32 n pi), tagged "(na)".
MoserResult moser_normalize(const PeriodicSeries& b, double r, const MoserOptions& opts = {});

}  // namespace utori
