#include "utori/torus_map.hpp"

#include "utori/displaced_eval.hpp"
#include "utori/errors.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace utori {

namespace {

constexpr double kInverseTol = 1e-13;
constexpr int kInverseMaxIter = 200;

// Grid values of every periodic component.
std::vector<Eigen::VectorXcd> component_values(const TorusMapLift& phi, int M, double offset) {
  std::vector<Eigen::VectorXcd> out;
  out.reserve(phi.dim());
  for (const auto& f : phi.periodic()) out.push_back(to_grid(f, M, offset));
  return out;
}

}  // namespace

TorusMapLift::TorusMapLift(Eigen::MatrixXi D, std::vector<PeriodicSeries> f) : D_(std::move(D)), f_(std::move(f)) {
  if (D_.rows() != D_.cols()) throw DimensionError("linear part must be square");
  if (static_cast<Eigen::Index>(f_.size()) != D_.rows()) throw DimensionError("one periodic component per axis");
  for (const auto& c : f_)
    if (c.dim() != D_.rows()) throw DimensionError("periodic component has the wrong dimension");
}

TorusMapLift TorusMapLift::identity(int dim, int degree) { return linear(Eigen::MatrixXi::Identity(dim, dim), degree); }

TorusMapLift TorusMapLift::linear(const Eigen::MatrixXi& D, int degree) {
  std::vector<PeriodicSeries> f(D.rows(), PeriodicSeries(static_cast<int>(D.rows()), degree, true));
  return TorusMapLift(D, std::move(f));
}

TorusMapLift TorusMapLift::translation(const Eigen::VectorXd& a, int degree) {
  const int n = static_cast<int>(a.size());
  std::vector<PeriodicSeries> f;
  for (int k = 0; k < n; ++k) f.push_back(PeriodicSeries::constant(n, degree, a(k)));
  return TorusMapLift(Eigen::MatrixXi::Identity(n, n), std::move(f));
}

int TorusMapLift::degree() const {
  int d = 0;
  for (const auto& c : f_) d = std::max(d, c.degree());
  return d;
}

bool TorusMapLift::has_identity_linear_part() const { return D_ == Eigen::MatrixXi::Identity(dim(), dim()); }

bool TorusMapLift::is_real() const {
  return std::all_of(f_.begin(), f_.end(), [](const PeriodicSeries& c) { return c.is_real(); });
}

Eigen::VectorXcd TorusMapLift::operator()(const Eigen::Ref<const Eigen::VectorXcd>& theta) const {
  Eigen::VectorXcd out = D_.cast<Complex>() * theta;
  for (int k = 0; k < dim(); ++k) out(k) += eval(f_[k], theta);
  return out;
}

Eigen::VectorXd TorusMapLift::operator()(const Eigen::Ref<const Eigen::VectorXd>& theta) const {
  const Eigen::VectorXcd t = theta.cast<Complex>();
  return (*this)(t).real();
}

double TorusMapLift::perturbation_norm(double r) const {
  double m = 0.0;
  for (const auto& c : f_) m = std::max(m, coeff_norm(c, r));
  return m;
}

// ---------------------------------------------------------------------------

PeriodicSeries compose_linear(const PeriodicSeries& h, const Eigen::MatrixXi& D) {
  const int n = h.dim();
  if (D.rows() != n || D.cols() != n) throw DimensionError("linear map has the wrong size");
  const Eigen::MatrixXi Dt = D.transpose();
  int deg = 0;
  const auto& c = h.coeffs();
  for_each_index(n, h.degree(), [&](Eigen::Index lin, const MultiIndex& k) {
    if (c(lin) != Complex(0.0)) deg = std::max(deg, (Dt * k).cwiseAbs().maxCoeff());
  });
  PeriodicSeries out(n, std::max(deg, h.degree()), h.is_real());
  Eigen::VectorXcd oc = Eigen::VectorXcd::Zero(out.size());
  for_each_index(n, h.degree(), [&](Eigen::Index lin, const MultiIndex& k) {
    if (c(lin) != Complex(0.0)) oc(out.linear_index(Dt * k)) += c(lin);
  });
  return PeriodicSeries(n, out.degree(), std::move(oc), h.is_real());
}

Eigen::VectorXcd compose_values(const PeriodicSeries& h, const TorusMapLift& phi, int M, double offset) {
  const int n = phi.dim();
  if (h.dim() != n) throw DimensionError("series and map dimensions differ");
  const bool plain = phi.has_identity_linear_part();
  // h(D theta + f) = (h o D)(theta + D^{-1} f): nodes stay nodes.
  const PeriodicSeries base = plain ? h : compose_linear(h, phi.linear_part());
  auto disp = component_values(phi, M, offset);
  const Eigen::Index G = grid_count(n, M);
  if (!plain) {
    const Eigen::MatrixXcd Dinv = unimodular_inverse(phi.linear_part()).cast<Complex>();
    Eigen::VectorXcd v(n);
    for (Eigen::Index g = 0; g < G; ++g) {
      for (int j = 0; j < n; ++j) v(j) = disp[j](g);
      v = Dinv * v;
      for (int j = 0; j < n; ++j) disp[j](g) = v(j);
    }
  }
  double radius = 0.0;
  for (const auto& v : disp) radius = std::max(radius, v.cwiseAbs().maxCoeff());
  const DisplacedEvaluator ev({base}, M, radius, Eigen::VectorXd(), offset);
  Eigen::VectorXcd out(G);
  std::vector<Complex> d(n);
  for (Eigen::Index g = 0; g < G; ++g) {
    for (int j = 0; j < n; ++j) d[j] = disp[j](g);
    ev.eval(g, d.data(), &out(g));
  }
  return out;
}

Reexpanded compose(const PeriodicSeries& h, const TorusMapLift& phi, int degree, int grid) {
  if (degree < h.degree())
    throw DimensionError("composition degree " + std::to_string(degree) + " is below the input degree " +
                         std::to_string(h.degree()));
  const int M = grid > 0 ? grid : default_grid(degree);
  if (M < 2 * degree + 1) throw DimensionError("composition grid too coarse for the requested degree");
  if (phi.has_identity_linear_part() && std::all_of(phi.periodic().begin(), phi.periodic().end(),
                                                    [](const PeriodicSeries& f) { return f.is_zero(); }))
    return {resize(h, degree), 0.0};
  return from_grid(compose_values(h, phi, M), h.dim(), M, degree, h.is_real() && phi.is_real());
}

TorusMapLift compose_maps(const TorusMapLift& outer, const TorusMapLift& inner, int degree, int grid,
                          double* dropped) {
  const int n = outer.dim();
  if (inner.dim() != n) throw DimensionError("map dimensions differ");
  double mass = 0.0;
  std::vector<PeriodicSeries> f;
  f.reserve(n);
  for (int k = 0; k < n; ++k) {
    const PeriodicSeries& fo = outer.periodic(k);
    Reexpanded part = compose(resize(fo, std::max(fo.degree(), degree)), inner, std::max(fo.degree(), degree), grid);
    PeriodicSeries sum = part.series;
    for (int l = 0; l < n; ++l) {
      const int d = outer.linear_part()(k, l);
      if (d != 0) sum += static_cast<double>(d) * inner.periodic(l);
    }
    double cut = 0.0;
    f.push_back(resize(sum, degree, &cut));
    mass = std::max(mass, part.dropped_mass + cut);
  }
  if (dropped) *dropped = mass;
  return TorusMapLift(outer.linear_part() * inner.linear_part(), std::move(f));
}

Eigen::MatrixXi unimodular_inverse(const Eigen::MatrixXi& D) {
  const Eigen::MatrixXd Dd = D.cast<double>();
  const double det = Dd.determinant();
  if (std::abs(std::abs(det) - 1.0) > 1e-9) throw DimensionError("linear part is not unimodular");
  const Eigen::MatrixXd inv = Dd.inverse();
  Eigen::MatrixXi out = inv.array().round().cast<int>();
  if ((D * out - Eigen::MatrixXi::Identity(D.rows(), D.cols())).cwiseAbs().maxCoeff() != 0)
    throw ComputationError("integer inverse failed");
  return out;
}

InversionResult invert_map(const TorusMapLift& phi, double r, int degree, int grid) {
  const int n = phi.dim();
  if (!phi.has_identity_linear_part()) {
    // phi = (id + f o D^{-1}) o D, so phi^{-1} = D^{-1} o (id + f o D^{-1})^{-1}.
    const Eigen::MatrixXi Dinv = unimodular_inverse(phi.linear_part());
    std::vector<PeriodicSeries> fh;
    for (const auto& f : phi.periodic()) fh.push_back(compose_linear(f, Dinv));
    int deg = degree;
    for (const auto& f : fh) deg = std::max(deg, f.degree());
    for (auto& f : fh) f = resize(f, deg);
    InversionResult inner = invert_map(TorusMapLift(Eigen::MatrixXi::Identity(n, n), std::move(fh)), r, deg, grid);
    std::vector<PeriodicSeries> g;
    for (int k = 0; k < n; ++k) {
      PeriodicSeries s(n, deg, inner.map.is_real());
      for (int l = 0; l < n; ++l)
        if (Dinv(k, l) != 0) s += static_cast<double>(Dinv(k, l)) * inner.map.periodic(l);
      g.push_back(resize(s, degree));
    }
    inner.map = TorusMapLift(Dinv, std::move(g));
    return inner;
  }

  const double size = phi.perturbation_norm(r);
  if (size > r / (4.0 * n))
    throw HypothesisError("(nf)", "inverse needs ||f||_r <= r/(4n); got " + std::to_string(size) + " > " +
                                      std::to_string(r / (4.0 * n)));
  const int M = grid > 0 ? grid : default_grid(degree);
  const Eigen::Index G = grid_count(n, M);
  const auto fv = component_values(phi, M, 0.0);
  const DisplacedEvaluator ev(phi.periodic(), M, 1.5 * phi.perturbation_norm(0.0) + 1e-300);

  InversionResult out;
  std::vector<Eigen::VectorXcd> g(n, Eigen::VectorXcd(G));
  std::vector<Complex> d(n), val(n), next(n);
  for (Eigen::Index p = 0; p < G; ++p) {
    for (int j = 0; j < n; ++j) d[j] = -fv[j](p);
    double prev_step = 0.0;
    int it = 0;
    for (; it < kInverseMaxIter; ++it) {
      ev.eval(p, d.data(), val.data());
      double step = 0.0;
      for (int j = 0; j < n; ++j) {
        next[j] = -val[j];
        step = std::max(step, std::abs(next[j] - d[j]));
      }
      d = next;
      if (prev_step > 1e-15 && step > 1e-15) out.contraction = std::max(out.contraction, step / prev_step);
      if (prev_step > 1e-15 && step >= prev_step && step > kInverseTol)
        throw ComputationError("inverse fixed point is not contracting (ratio " + std::to_string(step / prev_step) +
                               ")");
      prev_step = step;
      if (step <= kInverseTol) break;
    }
    out.iterations = std::max(out.iterations, it + 1);
    if (it == kInverseMaxIter) throw ComputationError("inverse fixed point did not converge in 200 iterations");
    for (int j = 0; j < n; ++j) g[j](p) = d[j];
  }

  std::vector<PeriodicSeries> gs;
  for (int j = 0; j < n; ++j) gs.push_back(from_grid(g[j], n, M, degree, phi.is_real()).series);
  out.map = TorusMapLift(Eigen::MatrixXi::Identity(n, n), std::move(gs));

  // Round trip on the half-cell offset grid, away from the fitting nodes.
  const auto gv = component_values(out.map, M, 0.5);
  double resid = 0.0;
  for (int k = 0; k < n; ++k) {
    const Eigen::VectorXcd fk = compose_values(phi.periodic(k), out.map, M, 0.5);
    resid = std::max(resid, (gv[k] + fk).cwiseAbs().maxCoeff());
  }
  out.residual = resid;
  return out;
}

Eigen::VectorXcd jacobian_det_on_grid(const TorusMapLift& phi, int M, double offset) {
  const int n = phi.dim();
  const Eigen::Index G = grid_count(n, M);
  std::vector<Eigen::VectorXcd> J(n * n);
  for (int k = 0; k < n; ++k)
    for (int l = 0; l < n; ++l) J[k * n + l] = to_grid(derivative(phi.periodic(k), l), M, offset);
  Eigen::VectorXcd det(G);
  Eigen::MatrixXcd A(n, n);
  const Eigen::MatrixXcd D = phi.linear_part().cast<Complex>();
  for (Eigen::Index g = 0; g < G; ++g) {
    for (int k = 0; k < n; ++k)
      for (int l = 0; l < n; ++l) A(k, l) = D(k, l) + J[k * n + l](g);
    det(g) = A.determinant();
  }
  return det;
}

}  // namespace utori
