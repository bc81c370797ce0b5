#include "utori/kam_fibering.hpp"

#include "utori/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>
#include <string>

namespace utori {

namespace {

std::string fmt(double x) {
  std::ostringstream s;
  s.precision(6);
  s << x;
  return s.str();
}

PeriodicSeries one_variable_inverse(const PeriodicSeries& den, int degree) {
  // den depends on theta_1 only; 1/den is computed in one variable.
  const PeriodicSeries d1 = restrict_leading(den, 1);
  return quotient(PeriodicSeries::constant(1, 0, 1.0), d1, degree, default_grid(std::max(degree, d1.degree())), 1e-3)
      .series.as_real();
}

}  // namespace

std::pair<double, double> fibering_sizes(const PeriodicSeries& h, double r) {
  const auto L = l_decompose(h);
  double B = std::abs(L[0].constant_term());
  if (h.dim() >= 1) B = std::max(B, coeff_norm(derivative(L[1], 0), r));
  double b = 0.0;
  for (int j = 2; j <= h.dim(); ++j) b = std::max(b, coeff_norm(L[j], r));
  return {B, b};
}

FiberingStep fibering_step(const PeriodicSeries& h_in, double r, double delta, int degree,
                           const KamConstants& constants) {
  const int n = h_in.dim();
  if (!(delta > 0.0 && delta < 0.25)) throw HypothesisError("(delta)", "step needs 0 < delta < 1/4");
  if (!(r > 0.0 && r < 1.0)) throw HypothesisError("(strip)", "step needs 0 < r < 1");
  if (degree < h_in.degree()) throw DimensionError("working degree below the phase degree");
  const PeriodicSeries h = resize(h_in, degree).as_real();

  FiberingStep out;
  std::tie(out.B, out.b) = fibering_sizes(h, r);
  if (out.B > 0.5) throw HypothesisError("(p4)", "B_r = " + fmt(out.B) + " exceeds 1/2");
  const double bmax = r * r * delta * delta / (n * constants.c2);
  if (out.b > bmax) throw HypothesisError("(b)", "b_r = " + fmt(out.b) + " exceeds r^2 delta^2/(n c2) = " + fmt(bmax));

  // Transform roundoff sits near machine epsilon times the l1 mass; it is
  // removed so that exact cancellations stay exact at positive width.
  const double floor = 64.0 * std::numeric_limits<double>::epsilon() * coeff_norm(h, 0.0);
  const auto L = l_decompose(h);
  const PeriodicSeries inv = extend_dim(
      one_variable_inverse(PeriodicSeries::constant(n, 0, 1.0) + derivative(L[1], 0), degree), n);

  std::vector<PeriodicSeries> p(n, PeriodicSeries(n, degree, true));
  if (n >= 2) {
    PeriodicSeries tail(n, degree, true);
    for (int j = 2; j <= n; ++j) tail += L[j];
    Reexpanded p1 = multiply(tail, inv, degree);
    out.dropped_mass = p1.dropped_mass;
    p[0] = chop(p1.series.as_real(), floor);
    for (int j = 2; j <= n; ++j) {
      Reexpanded q = multiply(L[j], inv, degree);
      out.dropped_mass = std::max(out.dropped_mass, q.dropped_mass);
      p[j - 1] = antiderivative(derivative(-chop(q.series.as_real(), floor), 0), j - 1);
    }
  }
  out.p = PeriodicVectorField(std::move(p));
  out.divergence = coeff_norm(divergence(out.p), 0.0);

  FlowOptions fo;
  fo.degree = degree;
  const FlowResult fr = flow(out.p, -1.0, (1.0 - delta) * r, delta, fo);
  out.flow_defect = fr.defect;
  out.dropped_mass = std::max(out.dropped_mass, fr.dropped_mass);
  out.phi = fr.map;

  Reexpanded pulled = compose(h, out.phi, degree);
  out.dropped_mass = std::max(out.dropped_mass, pulled.dropped_mass);
  out.k_next = chop((out.phi.periodic(0) + pulled.series).as_real(), floor);
  std::tie(out.B_next, out.b_next) = fibering_sizes(out.k_next, (1.0 - 4.0 * delta) * r);
  return out;
}

FiberingResult fibering_normalize(const PeriodicSeries& h_in, const KamSchedule& schedule,
                                  const FiberingOptions& opts) {
  const int n = h_in.dim();
  const double r0 = schedule.r0;
  if (!(r0 > 0.0 && r0 < 1.0)) throw HypothesisError("(strip)", "r0 must satisfy 0 < r0 < 1");
  if (h_in.reality_defect() > 1e-12)
    throw HypothesisError("(real)", "phase perturbation is not real on R^n (defect " +
                                        fmt(h_in.reality_defect()) + ")");
  const double size = coeff_norm(h_in, r0);
  const double limit = opts.eps * r0 * r0 * r0;
  if (opts.check_smallh && size > limit * (1.0 + 1e-12))
    throw HypothesisError("(smallh)", "||h||_r0 = " + fmt(size) + " exceeds eps r0^3 = " + fmt(limit));

  const int W = opts.degree > 0 ? std::max(opts.degree, h_in.degree()) : std::max(4 * h_in.degree(), 16);
  PeriodicSeries h = resize(h_in, W).as_real();
  FiberingResult out;
  out.Phi = TorusMapLift::identity(n, W);
  const double c6 = opts.constants.c6(n);
  bool warned = false;

  for (int m = 0;; ++m) {
    const double rm = schedule.r(m);
    const double dm = KamSchedule::delta(m);
    KamRecord rec;
    rec.m = m;
    rec.r = rm;
    rec.delta = dm;
    std::tie(rec.B, rec.b) = fibering_sizes(h, rm);
    if (!out.trace.empty() && out.trace.back().b > 0.0)
      out.trace.back().contraction =
          rec.b * std::pow(out.trace.back().r * out.trace.back().delta, 3) / (out.trace.back().b * out.trace.back().b);
    if (rec.b <= schedule.stop_tol) {
      out.trace.push_back(rec);
      out.converged = true;
      break;
    }
    if (m >= schedule.max_iter) {
      out.trace.push_back(rec);
      out.failure = "schedule exhausted after " + std::to_string(m) + " steps with b_m = " + fmt(rec.b);
      break;
    }
    if (!warned && rec.b > std::pow(rm * dm, 3) / c6) {
      warned = true;
      out.warnings.push_back("level " + std::to_string(m) + ": b_m = " + fmt(rec.b) +
                             " is above r_m^3 delta_m^3 / c6 = " + fmt(std::pow(rm * dm, 3) / c6));
    }
    FiberingStep step;
    try {
      step = fibering_step(h, rm, dm, W, opts.constants);
    } catch (const HypothesisError& e) {
      out.trace.push_back(rec);
      out.failed_bound = e.bound();
      out.failure = std::string("level ") + std::to_string(m) + ": " + e.what();
      break;
    }
    rec.residual = step.dropped_mass;
    out.trace.push_back(rec);
    double cut = 0.0;
    out.Phi = m == 0 ? step.phi : compose_maps(out.Phi, step.phi, W, 0, &cut);
    out.trace.back().residual = std::max(out.trace.back().residual, cut);
    h = step.k_next;
  }

  // k = L_1 of the last iterate, recentred by theta_1 -> theta_1 - c with c = L_0.
  const auto L = l_decompose(h);
  const double c = L[0].constant_term().real();
  out.translation = c;
  Eigen::VectorXd shift1 = Eigen::VectorXd::Zero(1);
  shift1(0) = -c;
  out.k = translate(restrict_leading(L[1], 1), shift1).as_real();
  Eigen::VectorXd shift = Eigen::VectorXd::Zero(n);
  shift(0) = -c;
  std::vector<PeriodicSeries> F;
  for (int j = 0; j < n; ++j) {
    PeriodicSeries fj = translate(out.Phi.periodic(j), shift);
    if (j == 0) fj += PeriodicSeries::constant(n, 0, -c);
    F.push_back(resize(fj, W).as_real());
  }
  out.Phi = TorusMapLift(Eigen::MatrixXi::Identity(n, n), std::move(F));

  const int M = default_grid(W);
  const Eigen::VectorXcd mu = compose_values(h_in, out.Phi, M, 0.5) + to_grid(out.Phi.periodic(0), M, 0.5) -
                              to_grid(extend_dim(out.k, n), M, 0.5);
  out.residual = mu.cwiseAbs().maxCoeff();
  out.volume_defect = (jacobian_det_on_grid(out.Phi, M, 0.5).array() - 1.0).abs().maxCoeff();
  return out;
}

double k_uniqueness_residual(const PeriodicSeries& k, const PeriodicSeries& khat, bool allow_half_turn) {
  if (k.dim() != 1 || khat.dim() != 1) throw DimensionError("invariant functions depend on theta_1 only");
  if (std::abs(k.constant_term()) > 1e-12 || std::abs(khat.constant_term()) > 1e-12)
    throw HypothesisError("(mean)", "invariant functions must have zero mean");
  const int M = std::max(256, 8 * std::max(k.degree(), khat.degree()) + 8);
  const Eigen::VectorXcd base = to_grid(k, M);
  double best = (to_grid(khat, M) - base).cwiseAbs().maxCoeff();
  if (allow_half_turn) {
    Eigen::VectorXd s(1);
    s << std::numbers::pi;
    best = std::min(best, (to_grid(translate(khat, s), M) - base).cwiseAbs().maxCoeff());
  }
  return best;
}

}  // namespace utori
