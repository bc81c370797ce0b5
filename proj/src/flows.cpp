#include "utori/flows.hpp"

#include "utori/displaced_eval.hpp"
#include "utori/errors.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace utori {

namespace {

constexpr int kVerifyPoints = 16;

// Classical RK4 for y' = F(y) with y = (displacement, optional log-det).
class Rk4 {
 public:
  explicit Rk4(std::size_t m) : k1_(m), k2_(m), k3_(m), k4_(m), tmp_(m) {}

  template <class Rhs>
  void run(std::vector<Complex>& y, int steps, double dt, const Rhs& rhs) {
    const std::size_t m = y.size();
    for (int s = 0; s < steps; ++s) {
      rhs(y.data(), k1_.data());
      for (std::size_t i = 0; i < m; ++i) tmp_[i] = y[i] + 0.5 * dt * k1_[i];
      rhs(tmp_.data(), k2_.data());
      for (std::size_t i = 0; i < m; ++i) tmp_[i] = y[i] + 0.5 * dt * k2_[i];
      rhs(tmp_.data(), k3_.data());
      for (std::size_t i = 0; i < m; ++i) tmp_[i] = y[i] + dt * k3_[i];
      rhs(tmp_.data(), k4_.data());
      for (std::size_t i = 0; i < m; ++i) y[i] += dt / 6.0 * (k1_[i] + 2.0 * k2_[i] + 2.0 * k3_[i] + k4_[i]);
    }
  }

 private:
  std::vector<Complex> k1_, k2_, k3_, k4_, tmp_;
};

}  // namespace

PeriodicVectorField::PeriodicVectorField(std::vector<PeriodicSeries> components) : p(std::move(components)) {
  if (p.empty()) throw DimensionError("vector field needs at least one component");
  const int n = static_cast<int>(p.size());
  int deg = 0;
  for (const auto& c : p) {
    if (c.dim() != n) throw DimensionError("vector field component has the wrong dimension");
    deg = std::max(deg, c.degree());
  }
  for (auto& c : p) c = resize(c, deg);
}

int PeriodicVectorField::degree() const { return p.empty() ? 0 : p.front().degree(); }

bool PeriodicVectorField::is_real() const {
  return std::all_of(p.begin(), p.end(), [](const PeriodicSeries& c) { return c.is_real(); });
}

double PeriodicVectorField::norm(double r) const {
  double m = 0.0;
  for (const auto& c : p) m = std::max(m, coeff_norm(c, r));
  return m;
}

PeriodicSeries divergence(const PeriodicVectorField& v) {
  PeriodicSeries s(v.dim(), v.degree(), v.is_real());
  for (int j = 0; j < v.dim(); ++j) s += derivative(v.p[j], j);
  return s;
}

FlowResult flow(const PeriodicVectorField& v, double t, double r1, double delta, const FlowOptions& opts) {
  const int n = v.dim();
  if (!(delta > 0.0 && delta < 0.5)) throw HypothesisError("(z1)", "flow needs 0 < delta < 1/2");
  if (!(r1 > 0.0 && r1 < 1.0)) throw HypothesisError("(strip)", "flow needs 0 < r1 < 1");
  if (std::abs(t) > 1.0) throw DimensionError("flow time must lie in [-1, 1]");
  const double size = v.norm(r1);
  if (opts.check_hypothesis && size > r1 * delta)
    throw HypothesisError("(z1)", "flow needs ||p||_r1 <= r1 delta; got " + std::to_string(size) + " > " +
                                      std::to_string(r1 * delta));

  const int degree = opts.degree > 0 ? opts.degree : v.degree();
  const int M = opts.grid > 0 ? opts.grid : default_grid(std::max(degree, v.degree()));
  const Eigen::Index G = grid_count(n, M);
  const int steps =
      opts.steps > 0 ? opts.steps : std::max(32, static_cast<int>(std::ceil(8.0 * size / (r1 * delta))));
  const double dt = t / steps;
  const bool real = v.is_real();

  std::vector<PeriodicSeries> comps = v.p;
  if (opts.log_det) comps.push_back(divergence(v));
  const int width = static_cast<int>(comps.size());

  FlowResult out;
  out.t = t;
  out.step_count = steps;

  std::vector<Eigen::VectorXcd> disp(width, Eigen::VectorXcd::Zero(G));
  if (t != 0.0 && v.norm(0.0) > 0.0) {
    const double radius = 2.0 * std::abs(t) * v.norm(0.0) + 1e-300;
    const DisplacedEvaluator ev(comps, M, radius);
    std::vector<Complex> y(width);
    Rk4 rk(width);
    for (Eigen::Index g = 0; g < G; ++g) {
      std::fill(y.begin(), y.end(), Complex(0.0));
      rk.run(y, steps, dt, [&](const Complex* s, Complex* dy) { ev.eval(g, s, dy); });
      for (int c = 0; c < width; ++c) disp[c](g) = y[c];
    }
  }

  std::vector<PeriodicSeries> f;
  for (int j = 0; j < n; ++j) {
    Reexpanded r = from_grid(disp[j], n, M, degree, real);
    out.dropped_mass = std::max(out.dropped_mass, r.dropped_mass);
    f.push_back(std::move(r.series));
  }
  out.map = TorusMapLift(Eigen::MatrixXi::Identity(n, n), std::move(f));
  if (opts.log_det) {
    Reexpanded r = from_grid(disp[n], n, M, degree, real);
    out.dropped_mass = std::max(out.dropped_mass, r.dropped_mass);
    out.log_det = std::move(r.series);
  }

  // Verification: twice the steps, direct summation, half-cell offset nodes.
  if (t != 0.0) {
    const int P = static_cast<int>(std::min<Eigen::Index>(G, kVerifyPoints));
    std::vector<Complex> y(width);
    Rk4 rk(width);
    for (int i = 0; i < P; ++i) {
      const Eigen::Index g = (static_cast<Eigen::Index>(i) * 7919) % G;
      const Eigen::VectorXcd x = grid_point(n, M, g, 0.5).cast<Complex>();
      std::fill(y.begin(), y.end(), Complex(0.0));
      rk.run(y, 2 * steps, dt / 2.0, [&](const Complex* s, Complex* dy) {
        Eigen::VectorXcd q = x;
        for (int j = 0; j < n; ++j) q(j) += s[j];
        for (int c = 0; c < width; ++c) dy[c] = eval(comps[c], q);
      });
      for (int j = 0; j < n; ++j) out.defect = std::max(out.defect, std::abs(eval(out.map.periodic(j), x) - y[j]));
      if (opts.log_det) out.defect = std::max(out.defect, std::abs(eval(out.log_det, x) - y[n]));
    }
    if (out.defect > opts.defect_tol)
      throw ComputationError("flow verification defect " + std::to_string(out.defect) + " exceeds tolerance");
  }
  return out;
}

PeriodicSeries log_det_jacobian(const PeriodicVectorField& v, double t, double r1, double delta,
                                const FlowOptions& opts) {
  FlowOptions o = opts;
  o.log_det = true;
  return flow(v, t, r1, delta, o).log_det;
}

}  // namespace utori
