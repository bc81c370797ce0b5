#include "utori/displaced_eval.hpp"

#include "utori/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace utori {

namespace {

constexpr int kMaxOrder = 20;
constexpr double kRemainder = 1e-16;
constexpr double kTableBudget = 16.0 * 1024 * 1024;  // complex entries

void enumerate_alphas(int dim, int order, std::vector<int>& cur, int axis, int left,
                      std::vector<std::vector<int>>& out) {
  if (axis == dim) {
    out.push_back(cur);
    return;
  }
  for (int e = 0; e <= left; ++e) {
    cur[axis] = e;
    enumerate_alphas(dim, order, cur, axis + 1, left - e, out);
  }
  cur[axis] = 0;
}

}  // namespace

DisplacedEvaluator::DisplacedEvaluator(std::vector<PeriodicSeries> components, int M, double radius,
                                       Eigen::VectorXd imag_shift, double offset)
    : components_(std::move(components)), M_(M), shift_(std::move(imag_shift)), offset_(offset) {
  if (components_.empty()) throw DimensionError("evaluator needs at least one component");
  dim_ = components_.front().dim();
  for (const auto& c : components_)
    if (c.dim() != dim_) throw DimensionError("evaluator components differ in dimension");
  if (shift_.size() == 0) shift_ = Eigen::VectorXd::Zero(dim_);
  if (shift_.size() != dim_) throw DimensionError("imaginary shift has the wrong dimension");
  nodes_ = grid_count(dim_, M_);

  // Remainder of order K: sum_k |c_k| R_K(|k|_1 radius), R_K(x) = sum_{m>K} x^m/m!.
  std::vector<std::vector<double>> level_mass;
  double total_mass = 0.0;
  for (const auto& c : components_) {
    std::vector<double> mass(static_cast<std::size_t>(dim_) * c.degree() + 1, 0.0);
    for_each_index(dim_, c.degree(), [&](Eigen::Index lin, const MultiIndex& k) {
      mass[k.cwiseAbs().sum()] += std::abs(c.coeffs()(lin));
    });
    for (double m : mass) total_mass = std::max(total_mass, m);
    level_mass.push_back(std::move(mass));
  }
  const double R = std::max(radius, 0.0);
  for (int K = 0; K <= kMaxOrder && total_mass > 0.0; ++K) {
    double worst = 0.0;
    for (const auto& mass : level_mass) {
      double rem = 0.0;
      for (std::size_t s = 1; s < mass.size(); ++s) {
        if (mass[s] == 0.0) continue;
        const double x = static_cast<double>(s) * R;
        double term = 1.0, tail = 0.0;
        for (int m = 1; m <= K; ++m) term *= x / m;
        for (int m = K + 1; m < K + 200; ++m) {
          term *= x / m;
          tail += term;
          if (term < 1e-30 * tail) break;
        }
        rem += mass[s] * tail;
      }
      worst = std::max(worst, rem);
    }
    if (worst <= kRemainder * total_mass) {
      order_ = K;
      break;
    }
  }
  if (total_mass == 0.0) order_ = 0;
  if (order_ < 0) return;
  std::vector<int> cur(dim_, 0);
  enumerate_alphas(dim_, order_, cur, 0, order_, alphas_);
  std::stable_sort(alphas_.begin(), alphas_.end(), [](const std::vector<int>& a, const std::vector<int>& b) {
    int sa = 0, sb = 0;
    for (int x : a) sa += x;
    for (int x : b) sb += x;
    return sa < sb;
  });
  // Each nonzero multi-index is a parent times one coordinate.
  parent_.assign(alphas_.size(), 0);
  axis_.assign(alphas_.size(), 0);
  for (std::size_t a = 1; a < alphas_.size(); ++a) {
    int j = 0;
    while (alphas_[a][j] == 0) ++j;
    std::vector<int> p = alphas_[a];
    --p[j];
    const auto it = std::find(alphas_.begin(), alphas_.begin() + a, p);
    parent_[a] = static_cast<int>(it - alphas_.begin());
    axis_[a] = j;
  }
  const double entries = static_cast<double>(alphas_.size()) * count() * static_cast<double>(nodes_);
  if (entries > kTableBudget) {
    order_ = -1;
    alphas_.clear();
    return;
  }
  radius_ = radius;

  const int T = static_cast<int>(alphas_.size());
  table_.assign(static_cast<std::size_t>(nodes_) * count() * T, Complex(0.0));
  Eigen::VectorXd cell = Eigen::VectorXd::Constant(dim_, 2.0 * std::numbers::pi * offset_ / M_);
  for (int c = 0; c < count(); ++c) {
    PeriodicSeries base = imaginary_shift(components_[c], shift_);
    if (offset_ != 0.0) base = translate(base, cell);
    for (int a = 0; a < T; ++a) {
      const auto& al = alphas_[a];
      Eigen::VectorXcd coeffs = base.coeffs();
      for_each_index(dim_, base.degree(), [&](Eigen::Index lin, const MultiIndex& k) {
        Complex w = 1.0;
        for (int j = 0; j < dim_; ++j)
          for (int e = 1; e <= al[j]; ++e) w *= Complex(0.0, static_cast<double>(k(j))) / static_cast<double>(e);
        coeffs(lin) *= w;
      });
      const Eigen::VectorXcd vals = to_grid(PeriodicSeries(dim_, base.degree(), std::move(coeffs), false), M_);
      for (Eigen::Index g = 0; g < nodes_; ++g) table_[(g * count() + c) * T + a] = vals(g);
    }
  }
}

Eigen::VectorXcd DisplacedEvaluator::base_point(Eigen::Index g) const {
  Eigen::VectorXcd p = grid_point(dim_, M_, g, offset_).cast<Complex>();
  p += Complex(0.0, 1.0) * shift_.cast<Complex>();
  return p;
}

void DisplacedEvaluator::direct(Eigen::Index g, const Complex* d, Complex* out) const {
  Eigen::VectorXcd p = base_point(g);
  for (int j = 0; j < dim_; ++j) p(j) += d[j];
  for (int c = 0; c < count(); ++c) out[c] = utori::eval(components_[c], p);
}

void DisplacedEvaluator::eval(Eigen::Index g, const Complex* d, Complex* out) const {
  double size = 0.0;
  for (int j = 0; j < dim_; ++j) size = std::max(size, std::abs(d[j]));
  if (order_ < 0 || size > radius_) {
    direct(g, d, out);
    return;
  }
  const int T = static_cast<int>(alphas_.size());
  thread_local std::vector<Complex> mono;
  mono.resize(T);
  mono[0] = 1.0;
  for (int a = 1; a < T; ++a) mono[a] = mono[parent_[a]] * d[axis_[a]];
  for (int c = 0; c < count(); ++c) {
    const Complex* row = &table_[(g * count() + c) * T];
    Complex s = 0.0;
    for (int a = 0; a < T; ++a) s += row[a] * mono[a];
    out[c] = s;
  }
}

}  // namespace utori
