#pragma once

#include "utori/periodic_series.hpp"

#include <vector>

namespace utori {

// Evaluates a fixed family of series at points  x_g + i s + d,  where x_g is a
// node of the uniform M^n grid (shifted by `offset` cells), s a fixed imaginary
// shift and d a small complex displacement.
//
// Within `radius` (max_j |d_j|) values come from Taylor tables of the scaled
// derivatives D^a h / a! on the grid; the order is the smallest one whose
// coefficient-weighted remainder bound is below 1e-16 of the coefficient mass. Points outside the radius, or
// families for which the tables would be too large, use direct summation.
class DisplacedEvaluator {
 public:
  DisplacedEvaluator(std::vector<PeriodicSeries> components, int M, double radius,
                     Eigen::VectorXd imag_shift = Eigen::VectorXd(), double offset = 0.0);

  int dim() const { return dim_; }
  int grid() const { return M_; }
  int count() const { return static_cast<int>(components_.size()); }
  Eigen::Index nodes() const { return nodes_; }
  double radius() const { return radius_; }
  int taylor_order() const { return order_; }

  // Undisplaced base point of node g (complex when an imaginary shift is set).
  Eigen::VectorXcd base_point(Eigen::Index g) const;

  // out[c] = component c at base_point(g) + d, for c < count().
  void eval(Eigen::Index g, const Complex* d, Complex* out) const;

 private:
  void direct(Eigen::Index g, const Complex* d, Complex* out) const;

  std::vector<PeriodicSeries> components_;
  int dim_ = 0;
  int M_ = 0;
  Eigen::Index nodes_ = 0;
  Eigen::VectorXd shift_;
  double offset_ = 0.0;
  double radius_ = 0.0;
  int order_ = -1;  // -1: direct summation only
  std::vector<std::vector<int>> alphas_;
  std::vector<int> parent_, axis_;  // alpha_a = alpha_{parent} + e_{axis}
  // layout: ((g * count + c) * terms + a)
  std::vector<Complex> table_;
};

}  // namespace utori
