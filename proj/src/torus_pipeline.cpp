#include "utori/torus_pipeline.hpp"

#include "utori/errors.hpp"
#include "utori/moser.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

namespace utori {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;
const Complex kI(0.0, 1.0);

std::string num(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3e", x);
  return buf;
}

PeriodicSeries z_coordinate(int n, int j) {
  MultiIndex e = MultiIndex::Zero(n);
  e(j) = 1;
  return PeriodicSeries::monomial(n, 1, e);
}

// Row 0 sums the angles: theta'_1 = theta_1 + ... + theta_n.
Eigen::MatrixXi sum_shear(int n) {
  Eigen::MatrixXi D = Eigen::MatrixXi::Identity(n, n);
  D.row(0).setOnes();
  return D;
}

// exp(-i theta_j) at every grid point.
Eigen::VectorXcd inverse_coordinate(int n, int M, int j, double offset = 0.0) {
  const Eigen::Index G = grid_count(n, M);
  Eigen::VectorXcd out(G);
  for (Eigen::Index g = 0; g < G; ++g) out(g) = std::exp(-kI * grid_point(n, M, g, offset)(j));
  return out;
}

double roundoff_floor(const PeriodicSeries& h) {
  return 64.0 * std::numeric_limits<double>::epsilon() * coeff_norm(h, 0.0);
}

// Drops roundoff-level tails, then caps the degree at W; `dropped` gets the mass removed by the cap.
PeriodicSeries fit_degree(const PeriodicSeries& h, int W, double* dropped) {
  const PeriodicSeries t = trim(chop(h, roundoff_floor(h)), 0.0);
  return resize(t, std::min(t.degree(), W), dropped);
}

void check_stage(InvariantReport& rep, const std::string& name, double residual, double tol) {
  rep.stages.emplace_back(name, residual);
  if (!(residual < tol))
    throw ComputationError(name + " stage: residual " + num(residual) + " is not below " + num(tol));
}

template <class Fn>
auto run_stage(const std::string& name, Fn&& fn) {
  try {
    return fn();
  } catch (const HypothesisError& e) {
    throw HypothesisError(e.bound(), name + " stage: " + e.what());
  } catch (const ComputationError& e) {
    throw ComputationError(name + " stage: " + e.what());
  }
}

int pipeline_degree(const PipelineOptions& opts, int input_degree) {
  if (opts.degree > 0) return opts.degree;
  return std::max(16, std::min(2 * input_degree, 32));
}

// Everything after the density a of the pulled-back form is known.
void normalize_from_density(const PeriodicSeries& a, double r0, int W, const PipelineOptions& opts,
                            InvariantReport& rep) {
  const int n = a.dim();
  if (n < 2) throw HypothesisError("(dim)", "the torus pipeline needs n >= 2");
  rep.n = n;
  rep.r0 = r0;
  rep.one_plus_mean_a = 1.0 + a.constant_term();
  const double r = r0 / 2.0;

  const PolarSplit ps = run_stage("polar", [&] { return polar_split(a, W); });
  check_stage(rep, "polar", ps.reconstruction + ps.dropped_mass, opts.stage_tol);

  // mu_2 = mu_1 o phi_0^{-1} = theta_1 + h_2 in the sheared angles
  const Eigen::MatrixXi D0 = sum_shear(n);
  const Eigen::MatrixXi D0inv = unimodular_inverse(D0);
  double drop_b = 0.0, drop_h = 0.0;
  const PeriodicSeries b2 = fit_degree(compose_linear(ps.b1, D0inv), W, &drop_b);
  const PeriodicSeries h2 = fit_degree(compose_linear(ps.h1, D0inv), W, &drop_h);
  check_stage(rep, "shear", drop_b + drop_h, opts.stage_tol);

  MoserOptions mo;
  mo.degree = W;
  const MoserResult mr = run_stage("moser", [&] { return moser_normalize(b2.as_real(), r, mo); });
  check_stage(rep, "moser", mr.residual, opts.stage_tol);
  rep.rho0 = 1.0 + mr.mean;
  rep.total_volume = std::pow(kTwoPi, n) * rep.rho0;

  const InversionResult inv = run_stage("moser-inverse", [&] { return invert_map(mr.map, r, W); });
  check_stage(rep, "moser-inverse", inv.residual, opts.stage_tol);

  // h_3 = (phi_1^{-1})_1 - theta_1 + h_2 o phi_1^{-1}
  const Reexpanded hc = run_stage("phase", [&] { return compose(h2, inv.map, W); });
  const PeriodicSeries h3 = (inv.map.periodic(0) + hc.series).as_real();
  check_stage(rep, "phase", hc.dropped_mass, opts.stage_tol);

  KamSchedule ks;
  ks.r0 = r;
  ks.max_iter = opts.max_iter;
  ks.stop_tol = opts.stop_tol;
  FiberingOptions fo;
  fo.degree = W;
  fo.check_smallh = false;
  fo.constants = opts.constants;
  const FiberingResult fr = run_stage("fibering", [&] { return fibering_normalize(h3, ks, fo); });
  rep.fibering_trace = fr.trace;
  for (const auto& w : fr.warnings) rep.warnings.push_back("fibering: " + w);
  if (!fr.converged) {
    if (!fr.failed_bound.empty()) throw HypothesisError(fr.failed_bound, "fibering stage: " + fr.failure);
    throw ComputationError("fibering stage: " + fr.failure);
  }
  check_stage(rep, "fibering", std::max(fr.residual, fr.volume_defect), opts.stage_tol);
  rep.k = fr.k;
  rep.translation = fr.translation;

  // phi_0^{-1} phi_1^{-1} phi_2 phi_0
  const int Wn = 2 * W;
  const TorusMapLift inner = compose_maps(fr.Phi, TorusMapLift::linear(D0), Wn);
  const TorusMapLift mid = compose_maps(inv.map, inner, Wn);
  const TorusMapLift outer = compose_maps(TorusMapLift::linear(D0inv), mid, Wn);
  std::vector<PeriodicSeries> f;
  for (const auto& c : outer.periodic()) f.push_back(fit_degree(c, Wn, nullptr));
  rep.normalizer = TorusMapLift(outer.linear_part(), std::move(f));

  const int M = fft_size(2 * (2 * W + 1));
  const Eigen::VectorXcd h1_phi = compose_values(ps.h1, rep.normalizer, M, 0.5);
  const Eigen::VectorXcd b1_phi = compose_values(ps.b1, rep.normalizer, M, 0.5);
  const Eigen::VectorXcd det = jacobian_det_on_grid(rep.normalizer, M, 0.5);
  const Eigen::VectorXcd ks_vals = to_grid(compose_linear(extend_dim(rep.k, n), D0), M, 0.5);
  Eigen::VectorXcd phase = h1_phi - ks_vals;
  for (int j = 0; j < n; ++j) phase += to_grid(rep.normalizer.periodic(j), M, 0.5);
  rep.phase_residual = phase.cwiseAbs().maxCoeff();
  rep.volume_residual =
      ((Eigen::VectorXcd::Ones(det.size()) + b1_phi).cwiseProduct(det).array() - rep.rho0).abs().maxCoeff();
  if (!(rep.phase_residual < opts.stage_tol)) rep.warnings.push_back("phase residual " + num(rep.phase_residual));
  if (!(rep.volume_residual < opts.stage_tol)) rep.warnings.push_back("volume residual " + num(rep.volume_residual));

  rep.exactness_defect = exactness_defect(rep.k);
  const Eigen::VectorXcd dk = to_grid(derivative(rep.k, 0), fft_size(std::max(8 * rep.k.degree(), 512)));
  rep.min_one_plus_dk = 1.0 + dk.real().minCoeff();
  rep.g = run_stage("curve", [&] { return build_g(rep.k, rep.rho0, opts.curve_degree); });
  rep.g_degree = gauss_degree(rep.g);
}

}  // namespace

int TorusEmbedding::degree() const {
  int d = 0;
  for (const auto& c : phi) d = std::max(d, c.degree());
  return d;
}

double TorusEmbedding::closeness(double r) const {
  double out = 0.0;
  for (int j = 0; j < dim(); ++j) out = std::max(out, coeff_norm(phi[j] - z_coordinate(dim(), j), r));
  return out;
}

Eigen::VectorXcd TorusEmbedding::operator()(const Eigen::Ref<const Eigen::VectorXcd>& z) const {
  if (z.size() != dim()) throw DimensionError("point and embedding dimensions differ");
  Eigen::VectorXcd theta(dim());
  for (int j = 0; j < dim(); ++j) theta(j) = -kI * std::log(z(j));
  Eigen::VectorXcd out(dim());
  for (int j = 0; j < dim(); ++j) out(j) = eval(phi[j], theta);
  return out;
}

TorusEmbedding TorusEmbedding::identity(int n, double r0) {
  TorusEmbedding e;
  e.r0 = r0;
  for (int j = 0; j < n; ++j) e.phi.push_back(z_coordinate(n, j));
  return e;
}

TorusEmbedding embedding_from_map(const AnnulusMap& psi, double r0, int degree, double* dropped) {
  const int n = psi.dim();
  const int M = default_grid(std::max(degree, psi.lift.degree()));
  TorusEmbedding e;
  e.r0 = r0;
  double worst = 0.0;
  for (int j = 0; j < n; ++j) {
    const Eigen::VectorXcd f = to_grid(psi.lift.periodic(j), M);
    const Eigen::VectorXcd zj = inverse_coordinate(n, M, j).cwiseInverse();
    const Eigen::VectorXcd v = zj.cwiseProduct((kI * f).array().exp().matrix());
    Reexpanded r = from_grid(v, n, M, degree, false);
    worst = std::max(worst, r.dropped_mass);
    e.phi.push_back(std::move(r.series));
  }
  if (dropped) *dropped = worst;
  return e;
}

TorusEmbedding reparametrize_embedding(const TorusEmbedding& e, const TorusMapLift& chi, int degree) {
  const int n = e.dim();
  if (chi.dim() != n || !chi.has_identity_linear_part() || !chi.is_real())
    throw DimensionError("a reparametrization is a real near-identity map of the same torus");
  const int M = default_grid(std::max({degree, e.degree(), chi.degree()}));
  TorusEmbedding out;
  out.r0 = e.r0;
  for (const auto& c : e.phi) out.phi.push_back(from_grid(compose_values(c, chi, M), n, M, degree, false).series);
  return out;
}

TorusEmbedding apply_unimodular_shear(const TorusEmbedding& e, int target, int source, int power, Complex c,
                                      int degree) {
  const int n = e.dim();
  if (target == source || target < 0 || source < 0 || target >= n || source >= n || power < 0)
    throw DimensionError("a shear adds a power of another coordinate");
  const int M = fft_size(std::max(2 * (2 * degree + 1), (power + 1) * e.degree() + degree + 1));
  const Eigen::VectorXcd xs = to_grid(e.phi[source], M);
  const Eigen::VectorXcd v = to_grid(e.phi[target], M) + c * xs.array().pow(static_cast<double>(power)).matrix();
  TorusEmbedding out = e;
  out.phi[target] = from_grid(v, n, M, degree, false).series;
  return out;
}

TorusEmbedding reflect_embedding(const TorusEmbedding& e, int degree) {
  const int n = e.dim();
  if (n < 2) throw HypothesisError("(dim)", "the reflection uses the last coordinate, n >= 2");
  // y = phi o T: theta_1 -> theta_1 + pi + 2 theta_n, theta_n -> -theta_n
  Eigen::MatrixXi DT = Eigen::MatrixXi::Identity(n, n);
  DT(0, n - 1) = 2;
  DT(n - 1, n - 1) = -1;
  Eigen::VectorXd shift = Eigen::VectorXd::Zero(n);
  shift(0) = std::numbers::pi;
  std::vector<PeriodicSeries> y;
  int Dy = 0;
  for (const auto& c : e.phi) {
    y.push_back(compose_linear(translate(c, shift), DT));
    Dy = std::max(Dy, y.back().degree());
  }
  const int M = fft_size(std::max(2 * (2 * degree + 1), 3 * Dy + degree + 1));
  const Eigen::VectorXcd y1 = to_grid(y[0], M);
  const Eigen::VectorXcd yn = to_grid(y[n - 1], M);
  if (yn.cwiseAbs().minCoeff() < 1e-8) throw ComputationError("reflection: the last component vanishes");
  TorusEmbedding out;
  out.r0 = e.r0;
  for (int j = 0; j < n; ++j) {
    Eigen::VectorXcd v;
    if (j == 0)
      v = -(y1.array() * yn.array() * yn.array()).matrix();
    else if (j == n - 1)
      v = yn.cwiseInverse();
    else
      v = to_grid(y[j], M);
    out.phi.push_back(from_grid(v, n, M, degree, false).series);
  }
  return out;
}

JacobianDensity jacobian_density(const TorusEmbedding& e, int degree) {
  const int n = e.dim();
  if (n == 0) throw DimensionError("empty embedding");
  const int M = fft_size(std::max(n * (e.degree() + 1) + degree + 1, 2 * (2 * degree + 1)));
  const Eigen::Index G = grid_count(n, M);
  std::vector<Eigen::VectorXcd> entries(n * n);
  for (int k = 0; k < n; ++k) {
    const Eigen::VectorXcd inv_z = inverse_coordinate(n, M, k) / kI;
    for (int j = 0; j < n; ++j) entries[j * n + k] = to_grid(derivative(e.phi[j], k), M).cwiseProduct(inv_z);
  }
  Eigen::VectorXcd det(G);
  Eigen::MatrixXcd J(n, n);
  for (Eigen::Index g = 0; g < G; ++g) {
    for (int j = 0; j < n; ++j)
      for (int k = 0; k < n; ++k) J(j, k) = entries[j * n + k](g);
    det(g) = J.determinant();
  }
  JacobianDensity out;
  out.min_abs_det = det.cwiseAbs().minCoeff();
  if (!(out.min_abs_det > 1e-12))
    throw HypothesisError("(totally-real)", "det Dphi vanishes on the grid (min " + num(out.min_abs_det) + ")");
  Reexpanded r = from_grid((det.array() - Complex(1.0)).matrix(), n, M, degree, false);
  // det D phi is of unit size: its roundoff is absolute
  out.a = chop(r.series, 64.0 * std::numeric_limits<double>::epsilon());
  out.dropped_mass = r.dropped_mass;
  out.norm_half = coeff_norm(out.a, e.r0 / 2.0);
  return out;
}

PolarSplit polar_split(const PeriodicSeries& a, int degree) {
  const int n = a.dim();
  const int M = default_grid(std::max(degree, a.degree()));
  const Eigen::VectorXcd v = to_grid(a, M);
  const double worst = v.cwiseAbs().maxCoeff();
  if (!(worst < 0.5)) throw HypothesisError("(branch)", "|a| reaches " + num(worst) + " on the grid");
  const Eigen::ArrayXcd w = v.array() + Complex(1.0);
  const Eigen::VectorXcd mod = (w.abs() - 1.0).cast<Complex>().matrix();
  const Eigen::VectorXcd arg = w.arg().cast<Complex>().matrix();
  Reexpanded b = from_grid(mod, n, M, degree, true);
  Reexpanded h = from_grid(arg, n, M, degree, true);
  PolarSplit out;
  out.b1 = std::move(b.series);
  out.h1 = std::move(h.series);
  out.dropped_mass = std::max(b.dropped_mass, h.dropped_mass);
  const Eigen::ArrayXcd lhs = (to_grid(out.b1, M, 0.5).array() + Complex(1.0)) * (kI * to_grid(out.h1, M, 0.5).array()).exp();
  out.reconstruction = (lhs - (to_grid(a, M, 0.5).array() + Complex(1.0))).abs().maxCoeff();
  return out;
}

InvariantReport theorem_m_normalize(const TorusEmbedding& e, const PipelineOptions& opts) {
  const int W = pipeline_degree(opts, e.degree());
  InvariantReport rep;
  if (e.dim() < 2) throw HypothesisError("(dim)", "the torus pipeline needs n >= 2");
  rep.closeness = e.closeness(e.r0);
  const JacobianDensity jd = run_stage("jacobian", [&] { return jacobian_density(e, W); });
  check_stage(rep, "jacobian", jd.dropped_mass, opts.stage_tol);
  rep.a_norm = jd.norm_half;
  normalize_from_density(jd.a, e.r0, W, opts, rep);
  return rep;
}

InvariantReport normalize_density(const PeriodicSeries& a, double r0, const PipelineOptions& opts) {
  const int W = opts.degree > 0 ? opts.degree : std::max(16, std::min(a.degree(), 32));
  InvariantReport rep;
  double dropped = 0.0;
  const PeriodicSeries aw = resize(a, W, &dropped);
  check_stage(rep, "density", dropped, opts.stage_tol);
  rep.a_norm = coeff_norm(aw, r0 / 2.0);
  normalize_from_density(aw, r0, W, opts, rep);
  return rep;
}

double exactness_defect(const PeriodicSeries& k) {
  if (k.dim() != 1) throw DimensionError("k is a series in one variable");
  const int M = fft_size(std::max(8 * k.degree(), 512));
  const Eigen::VectorXcd kv = to_grid(k, M);
  Complex sum = 0.0;
  for (int g = 0; g < M; ++g) sum += std::exp(kI * (kTwoPi * g / M + kv(g)));
  return kTwoPi * std::abs(sum) / M;
}

PeriodicSeries build_g(const PeriodicSeries& k, double rho0, int degree) {
  if (k.dim() != 1) throw DimensionError("k is a series in one variable");
  if (std::abs(k.constant_term()) > 1e-12) throw HypothesisError("(mean)", "[k] = " + num(std::abs(k.constant_term())));
  if (!(rho0 > 0.0)) throw HypothesisError("(rho0)", "rho0 must be positive");
  const int M = fft_size(std::max(8 * std::max(degree, k.degree()), 512));
  const Eigen::VectorXcd kv = to_grid(k, M);
  const double low = 1.0 + to_grid(derivative(k, 0), M).real().minCoeff();
  if (!(low > 0.0)) throw HypothesisError("(noncritical)", "1 + k' reaches " + num(low));
  const double defect = exactness_defect(k);
  if (defect > 1e-8) throw HypothesisError("(exact)", "exactness defect " + num(defect));
  Eigen::VectorXcd v(M);
  for (int g = 0; g < M; ++g) v(g) = rho0 * std::exp(kI * (kTwoPi * g / M + kv(g)));
  Eigen::VectorXcd c = from_grid(v, 1, M, degree, false).series.coeffs();
  for (int m = -degree; m <= degree; ++m)
    c(m + degree) = m == 0 ? Complex(0.0) : c(m + degree) / (kI * static_cast<double>(m));
  const PeriodicSeries g(1, degree, std::move(c), false);
  return trim(g, roundoff_floor(g));
}

NormalFormEmbedding normal_form_embedding(const PeriodicSeries& g, int n, double r0) {
  if (n < 2) throw HypothesisError("(dim)", "the normal form needs n >= 2");
  if (g.dim() != 1) throw DimensionError("g is a series in one variable");
  const EmbeddingReport er = embedding_check(g);
  if (er.degree != 1) throw HypothesisError("(embedding)", "g has Gauss degree " + std::to_string(er.degree));

  // i zeta^{-1} g(zeta z_1) = sum_m i g_m z_1^m zeta^{m-1}
  const int G = g.degree();
  PeriodicSeries psi1(n, G + 1, false);
  for (int m = -G; m <= G; ++m) {
    MultiIndex src(1);
    src(0) = m;
    MultiIndex k = MultiIndex::Constant(n, m - 1);
    k(0) = m;
    psi1.set_coeff(k, kI * g.coeff(src));
  }
  NormalFormEmbedding out;
  out.psi = TorusEmbedding::identity(n, r0);
  out.psi.phi[0] = psi1;

  // det D_z psi = d psi_1 / dz_1 against exp(-i s) dg/ds at s = theta_1 + ... + theta_n
  const int M = fft_size(2 * (G + 2));
  const Eigen::VectorXcd det =
      to_grid(derivative(psi1, 0), M).cwiseProduct(inverse_coordinate(n, M, 0)) / kI;
  const PeriodicSeries gs = compose_linear(extend_dim(derivative(g, 0), n), sum_shear(n));
  const PeriodicSeries e_minus_s = compose_linear(
      extend_dim(PeriodicSeries::monomial(1, 1, MultiIndex::Constant(1, -1)), n), sum_shear(n));
  const Eigen::VectorXcd target = to_grid(gs, M).cwiseProduct(to_grid(e_minus_s, M));
  out.form_residual = (det - target).cwiseAbs().maxCoeff();
  if (!(out.form_residual <= 1e-8))
    throw ComputationError("normal form check failed: residual " + num(out.form_residual));
  return out;
}

}  // namespace utori
