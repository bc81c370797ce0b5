#pragma once

#include "utori/periodic_series.hpp"

#include <vector>

namespace utori {

// Lift of a self-map of the torus:  theta'_k = sum_l D_kl theta_l + f_k(theta).
// It descends to a diffeomorphism of T^n only if det D = +-1.
class TorusMapLift {
 public:
  TorusMapLift() = default;
  TorusMapLift(Eigen::MatrixXi D, std::vector<PeriodicSeries> f);

  static TorusMapLift identity(int dim, int degree = 0);
  static TorusMapLift linear(const Eigen::MatrixXi& D, int degree = 0);
  // theta -> theta + a
  static TorusMapLift translation(const Eigen::VectorXd& a, int degree = 0);

  int dim() const { return static_cast<int>(D_.rows()); }
  int degree() const;
  const Eigen::MatrixXi& linear_part() const { return D_; }
  const std::vector<PeriodicSeries>& periodic() const { return f_; }
  const PeriodicSeries& periodic(int k) const { return f_[k]; }
  bool has_identity_linear_part() const;
  bool is_real() const;

  Eigen::VectorXcd operator()(const Eigen::Ref<const Eigen::VectorXcd>& theta) const;
  Eigen::VectorXd operator()(const Eigen::Ref<const Eigen::VectorXd>& theta) const;

  // Largest coefficient norm of the periodic components on the strip of width r.
  double perturbation_norm(double r) const;

 private:
  Eigen::MatrixXi D_;
  std::vector<PeriodicSeries> f_;
};

// h(D theta) as an exact coefficient remap k -> D^T k.
PeriodicSeries compose_linear(const PeriodicSeries& h, const Eigen::MatrixXi& D);

// Values of h(phi(theta)) on the M^n grid (offset by `offset` cells).
Eigen::VectorXcd compose_values(const PeriodicSeries& h, const TorusMapLift& phi, int M, double offset = 0.0);

// h o phi re-expanded to `degree` from a grid of `grid` points per axis
// (default 2(2 degree + 1)). Refuses degree < deg h. The dropped mass reports
// the resolvable part beyond `degree`.
Reexpanded compose(const PeriodicSeries& h, const TorusMapLift& phi, int degree, int grid = 0);

// outer o inner; the periodic part is re-expanded to `degree`.
TorusMapLift compose_maps(const TorusMapLift& outer, const TorusMapLift& inner, int degree, int grid = 0,
                          double* dropped = nullptr);

struct InversionResult {
  TorusMapLift map;
  // sup over the grid of |phi(phi^{-1}(theta)) - theta| for the re-expanded inverse
  double residual = 0.0;
  int iterations = 0;
  // largest observed ratio of successive fixed-point corrections
  double contraction = 0.0;
};

// Inverse of a near-identity map by the fixed point theta' <- theta - f(theta')
// per grid point, then re-expansion. Requires ||f||_r <= r/(4n); a unimodular
// linear part is inverted exactly first.
InversionResult invert_map(const TorusMapLift& phi, double r, int degree, int grid = 0);

// det Dphi on the M^n grid.
Eigen::VectorXcd jacobian_det_on_grid(const TorusMapLift& phi, int M, double offset = 0.0);

// Inverse of a unimodular integer matrix; throws DimensionError otherwise.
Eigen::MatrixXi unimodular_inverse(const Eigen::MatrixXi& D);

}  // namespace utori
