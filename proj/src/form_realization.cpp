#include "utori/form_realization.hpp"

#include "utori/displaced_eval.hpp"
#include "utori/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

namespace utori {

namespace {

constexpr double kMeanTol = 1e-12;
constexpr double kInverseTol = 1e-13;
constexpr int kInverseMaxIter = 200;
const Complex kI(0.0, 1.0);

std::string fmt(double x) {
  std::ostringstream s;
  s.precision(6);
  s << x;
  return s.str();
}

// log(1 + w) and exp(w) - 1 without cancellation for small |w|.
Complex log1p_c(Complex w) {
  if (std::abs(w) > 0.1) return std::log(1.0 + w);
  Complex sum = 0.0, term = w;
  for (int k = 1; k < 60; ++k) {
    sum += (k % 2 ? 1.0 : -1.0) * term / static_cast<double>(k);
    term *= w;
    if (std::abs(term) <= 1e-18 * std::abs(w)) break;
  }
  return sum;
}

Complex expm1_c(Complex w) {
  if (std::abs(w) > 0.1) return std::exp(w) - 1.0;
  Complex sum = 0.0, term = w;
  for (int k = 1; k < 60; ++k) {
    sum += term;
    term *= w / static_cast<double>(k + 1);
    if (std::abs(term) <= 1e-18 * std::abs(w)) break;
  }
  return sum;
}

MultiIndex all_minus_one(int n) { return MultiIndex::Constant(n, -1); }

// First position whose exponent differs from -1, or n for the obstruction monomial.
int k_slot(const MultiIndex& k) {
  for (int j = 0; j < k.size(); ++j)
    if (k(j) != -1) return j;
  return static_cast<int>(k.size());
}

void require_mean_zero(const PeriodicSeries& a) {
  const MeanCheck mc = mean_zero_check(a);
  if (!mc.ok)
    throw HypothesisError("(kn)", "coefficient of 1/(z_1...z_n) is " + fmt(mc.defect) +
                                      "; the form has nonzero integral over the torus");
}

// sum_j f_j on the grid
Eigen::VectorXcd trace_values(const TorusMapLift& m, int M, double offset) {
  Eigen::VectorXcd s = Eigen::VectorXcd::Zero(grid_count(m.dim(), M));
  for (const auto& f : m.periodic()) s += to_grid(f, M, offset);
  return s;
}

// det D_z of z -> z exp(i f(theta)) on the grid: exp(i sum f_j) det(I + Df).
Eigen::VectorXcd z_jacobian_det(const TorusMapLift& m, int M, double offset) {
  const Eigen::VectorXcd s = trace_values(m, M, offset);
  return jacobian_det_on_grid(m, M, offset).array() * (kI * s.array()).exp();
}

}  // namespace

PeriodicSeries AnnulusMap::log_g(int j) const { return kI * lift.periodic(j); }

Eigen::VectorXcd AnnulusMap::operator()(const Eigen::Ref<const Eigen::VectorXcd>& z) const {
  const int n = dim();
  if (z.size() != n) throw DimensionError("point dimension differs from the map dimension");
  Eigen::VectorXcd theta(n);
  for (int j = 0; j < n; ++j) theta(j) = -kI * std::log(z(j));
  Eigen::VectorXcd out(n);
  for (int j = 0; j < n; ++j) out(j) = z(j) * std::exp(kI * eval(lift.periodic(j), theta));
  return out;
}

PeriodicVectorField HoloVectorField::theta_field() const {
  const int n = dim();
  std::vector<PeriodicSeries> p;
  for (int j = 0; j < n; ++j) {
    const PeriodicSeries& qj = q[j];
    PeriodicSeries pj(n, qj.degree(), false);
    Eigen::VectorXcd c = Eigen::VectorXcd::Zero(pj.size());
    for_each_index(n, qj.degree(), [&](Eigen::Index lin, const MultiIndex& k) {
      const Complex v = qj.coeffs()(lin);
      if (v == Complex(0.0)) return;
      MultiIndex s = k;
      s(j) -= 1;
      if (pj.in_range(s)) c(pj.linear_index(s)) = -kI * v;
    });
    p.emplace_back(n, qj.degree(), std::move(c), false);
  }
  return PeriodicVectorField(std::move(p));
}

std::vector<PeriodicSeries> k_decompose(const PeriodicSeries& a) {
  const int n = a.dim();
  std::vector<Eigen::VectorXcd> parts(n + 1, Eigen::VectorXcd::Zero(a.size()));
  for_each_index(n, a.degree(), [&](Eigen::Index lin, const MultiIndex& k) { parts[k_slot(k)](lin) = a.coeffs()(lin); });
  std::vector<PeriodicSeries> out;
  for (auto& c : parts) out.emplace_back(n, a.degree(), std::move(c), false);
  return out;
}

MeanCheck mean_zero_check(const PeriodicSeries& a) {
  MeanCheck out;
  const MultiIndex m = all_minus_one(a.dim());
  if (a.in_range(m)) out.defect = std::abs(a.coeff(m));
  out.ok = out.defect <= kMeanTol;
  return out;
}

HoloVectorField build_divergence_vector_field(const PeriodicSeries& a) {
  require_mean_zero(a);
  const int n = a.dim();
  const int N = a.degree() + 1;
  std::vector<Eigen::VectorXcd> q(n, Eigen::VectorXcd::Zero(PeriodicSeries(n, N).size()));
  const PeriodicSeries shape(n, N);
  for_each_index(n, a.degree(), [&](Eigen::Index lin, const MultiIndex& k) {
    const Complex v = a.coeffs()(lin);
    const int j = k_slot(k);
    if (v == Complex(0.0) || j == n) return;
    // d/dz_j of z^{k + e_j} / (k_j + 1) is z^k
    MultiIndex s = k;
    s(j) += 1;
    q[j](shape.linear_index(s)) = v / static_cast<double>(k(j) + 1);
  });
  HoloVectorField out;
  for (auto& c : q) out.q.emplace_back(n, N, std::move(c), false);
  return out;
}

PeriodicSeries holo_divergence(const HoloVectorField& v) {
  const int n = v.dim();
  int N = 0;
  for (const auto& q : v.q) N = std::max(N, q.degree());
  PeriodicSeries out(n, N, false);
  Eigen::VectorXcd c = Eigen::VectorXcd::Zero(out.size());
  for (int j = 0; j < n; ++j) {
    const PeriodicSeries& qj = v.q[j];
    for_each_index(n, qj.degree(), [&](Eigen::Index lin, const MultiIndex& k) {
      const Complex x = qj.coeffs()(lin);
      if (x == Complex(0.0) || k(j) == 0) return;
      MultiIndex s = k;
      s(j) -= 1;
      if (out.in_range(s)) c(out.linear_index(s)) += static_cast<double>(k(j)) * x;
    });
  }
  return PeriodicSeries(n, N, std::move(c), false);
}

RealizationStep realization_step(const PeriodicSeries& a_in, double r, double delta, int degree) {
  const int n = a_in.dim();
  if (!(delta > 0.0 && delta < 0.5)) throw HypothesisError("(delta)", "step needs 0 < delta < 1/2");
  if (!(r > 0.0 && r < 1.0)) throw HypothesisError("(strip)", "step needs 0 < r < 1");
  if (degree < a_in.degree()) throw DimensionError("working degree below the form degree");
  const PeriodicSeries a = resize(a_in.as_complex(), degree);

  RealizationStep out;
  out.a_norm = coeff_norm(a, r);
  const HoloVectorField v = build_divergence_vector_field(a);
  std::vector<PeriodicSeries> pc;
  for (const auto& pj : v.theta_field().p) pc.push_back(resize(pj, degree));
  const PeriodicVectorField p(std::move(pc));
  out.p_norm = p.norm(r);
  if (out.p_norm > r * delta)
    throw HypothesisError("(f4)", "||p||_r = " + fmt(out.p_norm) + " exceeds r delta = " + fmt(r * delta));

  FlowOptions fo;
  fo.degree = degree;
  fo.log_det = true;
  fo.check_hypothesis = false;
  const FlowResult fr = flow(p, -1.0, r, delta, fo);
  out.flow_defect = fr.defect;
  out.dropped_mass = fr.dropped_mass;
  out.psi.lift = fr.map;

  // log det D_z psi = log det D_theta psi + i sum_j f_j
  const int M = default_grid(degree);
  const Eigen::VectorXcd A = compose_values(a, fr.map, M);
  const Eigen::VectorXcd L = to_grid(fr.log_det, M) + kI * trace_values(fr.map, M, 0.0);
  Eigen::VectorXcd vals(A.size());
  for (Eigen::Index g = 0; g < A.size(); ++g) vals(g) = expm1_c(log1p_c(A(g)) + L(g));
  Reexpanded ah = from_grid(vals, n, M, degree, false);
  out.dropped_mass = std::max(out.dropped_mass, ah.dropped_mass);
  // Transform roundoff sits near machine epsilon times the l1 mass.
  out.a_next = chop(ah.series, 64.0 * std::numeric_limits<double>::epsilon() * coeff_norm(a, 0.0));
  out.a_next_norm = coeff_norm(out.a_next, (1.0 - 2.0 * delta) * r);

  const Eigen::VectorXcd lhs =
      (compose_values(a, fr.map, M, 0.5).array() + 1.0) * z_jacobian_det(fr.map, M, 0.5).array();
  out.reconstruction = (lhs - (to_grid(out.a_next, M, 0.5).array() + 1.0).matrix()).cwiseAbs().maxCoeff();
  return out;
}

double RealizationSchedule::r(int m, int n) const {
  double rm = r0;
  for (int k = 0; k < m; ++k) rm *= 1.0 - 2.0 * delta(k, n);
  return rm;
}

namespace {

// Solves psi(xi) = z at every node z = exp(i theta_g) with T: xi -> z - psi(xi) + xi,
// xi = z exp(i d). Returns the displacements d as series.
TorusMapLift invert_in_z(const TorusMapLift& psi, int degree, RealizationResult& res) {
  const int n = psi.dim();
  const int M = default_grid(degree);
  const Eigen::Index G = grid_count(n, M);
  const DisplacedEvaluator ev(psi.periodic(), M, 1.5 * psi.perturbation_norm(0.0) + 1e-300);
  std::vector<Eigen::VectorXcd> fv;
  for (const auto& f : psi.periodic()) fv.push_back(to_grid(f, M));

  std::vector<Eigen::VectorXcd> dv(n, Eigen::VectorXcd(G));
  std::vector<Complex> d(n), val(n), z(n), xi(n);
  for (Eigen::Index g = 0; g < G; ++g) {
    const Eigen::VectorXd th = grid_point(n, M, g);
    for (int j = 0; j < n; ++j) {
      z[j] = std::exp(kI * th(j));
      d[j] = -fv[j](g);
    }
    double prev = 0.0;
    int it = 0;
    for (; it < kInverseMaxIter; ++it) {
      ev.eval(g, d.data(), val.data());
      double step = 0.0;
      for (int j = 0; j < n; ++j) {
        xi[j] = z[j] * std::exp(kI * d[j]);
        const Complex image = xi[j] * std::exp(kI * val[j]);
        const Complex next = z[j] - image + xi[j];
        const Complex dn = -kI * std::log(next / z[j]);
        step = std::max(step, std::abs(next - xi[j]));
        d[j] = dn;
      }
      if (prev > 1e-15 && step > 1e-15) res.inverse_contraction = std::max(res.inverse_contraction, step / prev);
      if (prev > 1e-15 && step >= prev && step > kInverseTol)
        throw ComputationError("inverse map T is not contracting (ratio " + fmt(step / prev) + ")");
      prev = step;
      if (step <= kInverseTol) break;
    }
    if (it == kInverseMaxIter) throw ComputationError("inverse map T did not converge in 200 iterations");
    for (int j = 0; j < n; ++j) dv[j](g) = d[j];
  }
  std::vector<PeriodicSeries> gs;
  for (int j = 0; j < n; ++j) gs.push_back(from_grid(dv[j], n, M, degree, false).series);
  return TorusMapLift(Eigen::MatrixXi::Identity(n, n), std::move(gs));
}

// sup |psi(phi(z)) - z| on the torus |z_j| = exp(-s) sampled on the offset grid.
double round_trip(const TorusMapLift& psi, const TorusMapLift& phi, int M, double s) {
  const int n = psi.dim();
  const Eigen::VectorXd shift = Eigen::VectorXd::Constant(n, s);
  std::vector<Eigen::VectorXcd> gv;
  double rad = 0.0;
  for (const auto& g : phi.periodic()) {
    gv.push_back(to_grid(imaginary_shift(g, shift), M, 0.5));
    rad = std::max(rad, gv.back().cwiseAbs().maxCoeff());
  }
  const DisplacedEvaluator ev(psi.periodic(), M, 1.5 * rad + 1e-300, shift, 0.5);
  std::vector<Complex> d(n), val(n);
  double worst = 0.0;
  for (Eigen::Index g = 0; g < ev.nodes(); ++g) {
    for (int j = 0; j < n; ++j) d[j] = gv[j](g);
    ev.eval(g, d.data(), val.data());
    for (int j = 0; j < n; ++j)
      worst = std::max(worst, std::exp(-s) * std::abs(expm1_c(kI * (d[j] + val[j]))));
  }
  return worst;
}

double injectivity(const TorusMapLift& phi) {
  const int n = phi.dim();
  const int M = std::max(4, static_cast<int>(std::floor(std::pow(2000.0, 1.0 / n))));
  const Eigen::Index G = grid_count(n, M);
  std::vector<Eigen::VectorXcd> x(G), y(G);
  for (Eigen::Index g = 0; g < G; ++g) {
    const Eigen::VectorXd th = grid_point(n, M, g);
    x[g] = (kI * th.cast<Complex>()).array().exp();
    y[g] = (kI * phi(th.cast<Complex>()).array()).exp();
  }
  double margin = std::numeric_limits<double>::infinity();
  for (Eigen::Index a = 0; a < G; ++a)
    for (Eigen::Index b = a + 1; b < G; ++b) margin = std::min(margin, (y[a] - y[b]).norm() / (x[a] - x[b]).norm());
  return margin;
}

}  // namespace

RealizationResult realize_form(const PeriodicSeries& a_in, const RealizationSchedule& schedule,
                               const RealizationOptions& opts) {
  const int n = a_in.dim();
  const double r0 = schedule.r0;
  if (!(r0 > 0.0 && r0 < 1.0)) throw HypothesisError("(strip)", "r0 must satisfy 0 < r0 < 1");
  require_mean_zero(a_in);
  const double size = coeff_norm(a_in, r0);
  if (opts.check_small && size > opts.eps * r0 * (1.0 + 1e-12))
    throw HypothesisError("(smalla)", "||a||_r0 = " + fmt(size) + " exceeds eps r0 = " + fmt(opts.eps * r0));

  const int W = opts.degree > 0 ? std::max(opts.degree, a_in.degree()) : std::max(4 * a_in.degree(), 16);
  PeriodicSeries a = resize(a_in.as_complex(), W);
  RealizationResult out;
  TorusMapLift Psi = TorusMapLift::identity(n, W);
  const double c8 = std::max(opts.constants.c7, 4.0 * std::exp(n + 2.0) * std::numbers::pi);
  bool warned = false;

  for (int m = 0;; ++m) {
    KamRecord rec;
    rec.m = m;
    rec.r = schedule.r(m, n);
    rec.delta = RealizationSchedule::delta(m, n);
    rec.b = coeff_norm(a, rec.r);
    if (!out.trace.empty() && out.trace.back().b > 0.0) {
      const auto& prev = out.trace.back();
      out.trace.back().contraction = rec.b * prev.r * prev.delta / (prev.b * prev.b);
    }
    if (rec.b <= schedule.stop_tol) {
      out.trace.push_back(rec);
      out.converged = true;
      break;
    }
    if (m >= schedule.max_iter) {
      out.trace.push_back(rec);
      out.failure = "schedule exhausted after " + std::to_string(m) + " steps with a_m = " + fmt(rec.b);
      break;
    }
    const double regime = rec.r * rec.delta * rec.delta / c8;
    if (!warned && rec.b > regime) {
      warned = true;
      out.warnings.push_back("level " + std::to_string(m) + ": a_m = " + fmt(rec.b) +
                             " is above r_m delta_m^2 / c8 = " + fmt(regime));
    }
    RealizationStep step;
    try {
      step = realization_step(a, rec.r, rec.delta, W);
    } catch (const HypothesisError& e) {
      out.trace.push_back(rec);
      out.failed_bound = e.bound();
      out.failure = "level " + std::to_string(m) + ": " + e.what();
      break;
    }
    rec.residual = step.dropped_mass;
    out.trace.push_back(rec);
    double cut = 0.0;
    Psi = m == 0 ? step.psi.lift : compose_maps(Psi, step.psi.lift, W, 0, &cut);
    out.trace.back().residual = std::max(out.trace.back().residual, cut);
    a = step.a_next;
  }
  out.psi.lift = Psi;
  if (!out.converged) return out;

  try {
    out.phi.lift = Psi.perturbation_norm(0.0) == 0.0 ? TorusMapLift::identity(n, W) : invert_in_z(Psi, W, out);
  } catch (const ComputationError& e) {
    out.converged = false;
    out.failure = std::string("inversion: ") + e.what() + " (contraction estimate " + fmt(out.inverse_contraction) + ")";
    return out;
  }

  const int M = default_grid(W);
  const PeriodicSeries aw = resize(a_in.as_complex(), W);
  const Eigen::VectorXcd det = z_jacobian_det(out.phi.lift, M, 0.5);
  out.det_residual = (det - (to_grid(aw, M, 0.5).array() + 1.0).matrix()).cwiseAbs().maxCoeff();
  out.min_abs_det = det.cwiseAbs().minCoeff();
  out.totally_real = out.min_abs_det > 0.0;

  for (double s : {-r0 / 8.0, 0.0, r0 / 8.0})
    out.inverse_residual = std::max(out.inverse_residual, round_trip(Psi, out.phi.lift, M, s));

  // Phase of omega_phi = (1 + a) i^n exp(i sum theta_j) dtheta: d mu_j = 1 + Im(D_j a / (1 + a)).
  const Eigen::VectorXcd one_a = to_grid(aw, M, 0.5).array() + 1.0;
  Eigen::VectorXd grad2 = Eigen::VectorXd::Zero(one_a.size());
  for (int j = 0; j < n; ++j) {
    const Eigen::VectorXcd dj = to_grid(derivative(aw, j), M, 0.5);
    grad2.array() += (1.0 + (dj.array() / one_a.array()).imag()).square();
  }
  out.min_phase_gradient = grad2.cwiseSqrt().minCoeff();
  out.noncritical = out.min_phase_gradient > 0.0;
  out.injectivity_margin = injectivity(out.phi.lift);
  out.embedding = out.totally_real && out.injectivity_margin > 0.5;
  return out;
}

}  // namespace utori
