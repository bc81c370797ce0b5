// Batch front end. Exit codes: 0 success, 1 internal failure, 2 refused
// hypothesis (bound tag on stderr), 3 malformed input or arguments.

#include "CLI11.hpp"
#include "utori/curve_tools.hpp"
#include "utori/errors.hpp"
#include "utori/form_realization.hpp"
#include "utori/io.hpp"
#include "utori/kam_fibering.hpp"
#include "utori/moser.hpp"
#include "utori/torus_pipeline.hpp"

#include <filesystem>
#include <iostream>
#include <numbers>
#include <string>

namespace {

using namespace utori;

constexpr int kSamples = 256;

struct Config {
  std::string in, in2, out = ".";
  double r = 0.5;
  int N = 0;
  double tol = 1e-12;
  int max_iter = 20;
  int grid = 0;
  double eps = 0.0;  // 0 keeps the library default
  bool allow_half_turn = false;
};

// A refusal that carries no library exception, e.g. a failed bound recorded in a result.
struct Refusal {
  std::string bound, detail;
};

std::string out_path(const Config& c, const std::string& name) {
  return (std::filesystem::path(c.out) / name).string();
}

void emit(const Config& c, const std::string& name, const std::string& content) {
  write_file(out_path(c, name), content);
}

void check_config(const Config& c) {
  if (!(c.r > 0.0 && c.r < 1.0)) throw SchemaError("--r", "expected 0 < r < 1");
  if (c.N != 0 && c.N < 2) throw SchemaError("--N", "expected N >= 2");
  if (!(c.tol > 0.0)) throw SchemaError("--tol", "expected tol > 0");
  if (c.max_iter < 1) throw SchemaError("--max-iter", "expected at least one iteration");
  if (c.grid < 0) throw SchemaError("--grid", "expected a nonnegative grid size");
  if (c.eps < 0.0) throw SchemaError("--eps", "expected eps >= 0");
  if (c.in.empty()) throw SchemaError("--in", "an input file is required");
  std::filesystem::create_directories(c.out);
}

Json series_list(const std::vector<PeriodicSeries>& v) {
  Json a = Json::array();
  for (const auto& h : v) a.push_back(to_json(h));
  return a;
}

Json string_list(const std::vector<std::string>& v) {
  Json a = Json::array();
  for (const auto& s : v) a.push_back(s);
  return a;
}

std::string k_samples_csv(const PeriodicSeries& k) {
  const Eigen::VectorXcd v = to_grid(k, kSamples);
  std::string s = "theta,k\n";
  for (int g = 0; g < kSamples; ++g)
    s += format_number(2.0 * std::numbers::pi * g / kSamples) + "," + format_number(v(g).real()) + "\n";
  return s;
}

void run_decompose(const Config& c) {
  const PeriodicSeries h = series_from_json(read_json_file(c.in));
  Json j;
  j["L"] = series_list(l_decompose(h));
  j["K"] = series_list(k_decompose(h));
  j["obstruction"] = std::abs(mean_zero_check(h).defect);
  emit(c, "decomposition.json", dump(j));
}

void run_moser(const Config& c) {
  const PeriodicSeries b = series_from_json(read_json_file(c.in));
  MoserOptions o;
  o.degree = c.N;
  const MoserResult m = moser_normalize(b, c.r, o);
  emit(c, "map.json", dump(to_json(m.map)));
  Json j;
  j["mean"] = m.mean;
  j["residual"] = m.residual;
  j["volume_balance"] = m.volume_balance;
  j["b_norm"] = m.b_norm;
  j["f_norm"] = m.f_norm;
  j["dropped_mass"] = m.dropped_mass;
  emit(c, "report.json", dump(j));
}

void run_fiber(const Config& c) {
  const PeriodicSeries h = series_from_json(read_json_file(c.in));
  KamSchedule s;
  s.r0 = c.r;
  s.max_iter = c.max_iter;
  s.stop_tol = c.tol;
  FiberingOptions o;
  o.degree = c.N;
  if (c.eps > 0.0) o.eps = c.eps;
  const FiberingResult f = fibering_normalize(h, s, o);
  emit(c, "trace.csv", fibering_trace_csv(f.trace));
  Json j;
  j["converged"] = f.converged;
  j["iterations"] = f.trace.size();
  j["residual"] = f.residual;
  j["volume_defect"] = f.volume_defect;
  j["translation"] = f.translation;
  j["failed_bound"] = f.failed_bound;
  j["failure"] = f.failure;
  j["warnings"] = string_list(f.warnings);
  emit(c, "report.json", dump(j));
  if (!f.converged) {
    if (!f.failed_bound.empty()) throw Refusal{f.failed_bound, f.failure};
    throw ComputationError(f.failure);
  }
  emit(c, "k.json", dump(to_json(f.k)));
  emit(c, "Phi.json", dump(to_json(f.Phi)));
  emit(c, "k_samples.csv", k_samples_csv(f.k));
}

void run_realize(const Config& c) {
  const PeriodicSeries a = series_from_json(read_json_file(c.in));
  RealizationSchedule s;
  s.r0 = c.r;
  s.max_iter = c.max_iter;
  s.stop_tol = c.tol;
  RealizationOptions o;
  o.degree = c.N;
  if (c.eps > 0.0) o.eps = c.eps;
  const RealizationResult res = realize_form(a, s, o);
  emit(c, "trace.csv", realization_trace_csv(res.trace));
  Json j;
  j["converged"] = res.converged;
  j["iterations"] = res.trace.size();
  j["failed_bound"] = res.failed_bound;
  j["failure"] = res.failure;
  j["warnings"] = string_list(res.warnings);
  j["det_residual"] = res.det_residual;
  j["inverse_residual"] = res.inverse_residual;
  j["inverse_contraction"] = res.inverse_contraction;
  j["min_abs_det"] = res.min_abs_det;
  j["min_phase_gradient"] = res.min_phase_gradient;
  j["injectivity_margin"] = res.injectivity_margin;
  j["totally_real"] = res.totally_real;
  j["noncritical"] = res.noncritical;
  j["embedding"] = res.embedding;
  emit(c, "report.json", dump(j));
  if (!res.converged) {
    if (!res.failed_bound.empty()) throw Refusal{res.failed_bound, res.failure};
    throw ComputationError(res.failure);
  }
  emit(c, "phi.json", dump(to_json(res.phi.lift, "log-map")));
  const int degree = c.N > 0 ? c.N : std::max(16, res.phi.lift.degree());
  emit(c, "embedding.json", dump(to_json(embedding_from_map(res.phi, c.r, degree))));
}

TorusEmbedding load_embedding(const std::string& path, const Config& c) {
  const Json j = read_json_file(path);
  const std::string type = j.is_object() && j.contains("type") ? j["type"].get<std::string>() : "series";
  if (type == "log-map") {
    const AnnulusMap m = log_map_from_json(j);
    return embedding_from_map(m, c.r, c.N > 0 ? c.N : std::max(16, m.lift.degree()));
  }
  return embedding_from_json(j);
}

Json report_json(const InvariantReport& r) {
  Json j;
  j["n"] = r.n;
  j["r0"] = r.r0;
  j["rho0"] = r.rho0;
  j["one_plus_mean_a"] = {{"re", r.one_plus_mean_a.real()}, {"im", r.one_plus_mean_a.imag()}};
  j["total_volume"] = r.total_volume;
  j["translation"] = r.translation;
  j["k_norm"] = coeff_norm(r.k, 0.0);
  j["min_one_plus_dk"] = r.min_one_plus_dk;
  j["g_degree"] = r.g_degree;
  j["phase_residual"] = r.phase_residual;
  j["volume_residual"] = r.volume_residual;
  j["exactness_defect"] = r.exactness_defect;
  j["closeness"] = r.closeness;
  j["a_norm"] = r.a_norm;
  Json stages = Json::array();
  for (const auto& [name, res] : r.stages) stages.push_back({{"stage", name}, {"residual", res}});
  j["stages"] = std::move(stages);
  j["gauge"] = "normal form i^n rho0 exp(i (s + k(s))) dtheta with s = theta_1 + ... + theta_n; "
               "psi_1 = i zeta^{-1} g(zeta z_1)";
  j["warnings"] = string_list(r.warnings);
  return j;
}

void run_invariants(const Config& c) {
  PipelineOptions o;
  o.degree = c.N;
  o.max_iter = c.max_iter;
  o.stop_tol = c.tol;
  const InvariantReport r = theorem_m_normalize(load_embedding(c.in, c), o);
  Json j = report_json(r);
  if (!c.in2.empty()) {
    const InvariantReport other = theorem_m_normalize(load_embedding(c.in2, c), o);
    j["comparison"] = {{"allow_half_turn", c.allow_half_turn},
                       {"k_residual", k_uniqueness_residual(r.k, other.k, c.allow_half_turn)},
                       {"rho0_difference", std::abs(r.rho0 - other.rho0)}};
  }
  emit(c, "report.json", dump(j));
  emit(c, "k.json", dump(to_json(r.k)));
  emit(c, "g.json", dump(to_json(r.g)));
  emit(c, "normalizer.json", dump(to_json(r.normalizer)));
  emit(c, "k_samples.csv", k_samples_csv(r.k));
}

void run_homotopy(const Config& c) {
  if (c.in2.empty()) throw SchemaError("--in2", "the homotopy needs a second curve");
  const PeriodicSeries f0 = series_from_json(read_json_file(c.in));
  const PeriodicSeries f1 = series_from_json(read_json_file(c.in2));
  const int steps = c.grid > 1 ? c.grid : 50;
  const int degree = c.N > 0 ? c.N : 64;
  std::string csv = "t,min_abs_dmu,noncritical,degree\n";
  double worst = std::numeric_limits<double>::infinity();
  for (int s = 0; s < steps; ++s) {
    const double t = static_cast<double>(s) / (steps - 1);
    const PeriodicSeries ft = whitney_homotopy(f0, f1, t, degree);
    const PhaseDerivative ph = noncritical_phase(ft);
    worst = std::min(worst, ph.min_abs);
    csv += format_number(t) + "," + format_number(ph.min_abs) + "," + (ph.noncritical ? "1" : "0") + "," +
           std::to_string(gauss_degree(ft)) + "\n";
  }
  emit(c, "homotopy.csv", csv);
  const EmbeddingReport e0 = embedding_check(f0), e1 = embedding_check(f1);
  Json j;
  j["samples"] = steps;
  j["min_abs_dmu"] = worst;
  j["degree"] = e0.degree;
  j["I_f"] = {e0.I_f, e1.I_f};
  j["is_embedding"] = {e0.is_embedding, e1.is_embedding};
  emit(c, "report.json", dump(j));
}

int run_validate(const Config& c) {
  const auto diags = validate_file(c.in);
  if (diags.empty()) {
    std::cout << "ok\n";
    return 0;
  }
  for (const auto& d : diags) std::cout << d.where << ": " << d.message << "\n";
  return 3;
}

void add_common(CLI::App* sub, Config& c) {
  sub->add_option("--in", c.in, "input JSON file");
  sub->add_option("--in2", c.in2, "second input (homotopy target, invariant comparison)");
  sub->add_option("--r,--r0", c.r, "strip width r or domain parameter r0");
  sub->add_option("--N", c.N, "working degree (0: automatic)");
  sub->add_option("--tol", c.tol, "stopping tolerance");
  sub->add_option("--max-iter", c.max_iter, "iteration budget");
  sub->add_option("--grid", c.grid, "grid or sample count");
  sub->add_option("--out", c.out, "output directory");
  sub->add_option("--eps", c.eps, "override of the smallness constant");
  sub->add_flag("--allow-half-turn", c.allow_half_turn, "compare k up to theta_1 -> theta_1 + pi");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Normal forms of real analytic tori in C^n"};
  app.require_subcommand(1);
  Config c;
  const std::vector<std::pair<std::string, std::string>> commands{
      {"decompose", "split an annulus function into K_1..K_{n+1}"},
      {"moser", "volume normalization of a density 1 + b"},
      {"fiber-normalize", "KAM fibering normal form of theta_1 + h"},
      {"realize", "holomorphic map with a prescribed Jacobian 1 + a"},
      {"invariants", "invariant pair (rho0, k) of a torus embedding"},
      {"homotopy", "Whitney-Graustein homotopy between two curves"},
      {"validate", "schema and invariant checks of an input file"}};
  for (const auto& [name, help] : commands) add_common(app.add_subcommand(name, help), c);
  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 3;
  }
  const std::string cmd = app.get_subcommands().front()->get_name();
  try {
    if (cmd == "validate") {
      if (c.in.empty()) throw SchemaError("--in", "an input file is required");
      return run_validate(c);
    }
    check_config(c);
    if (cmd == "decompose") run_decompose(c);
    else if (cmd == "moser") run_moser(c);
    else if (cmd == "fiber-normalize") run_fiber(c);
    else if (cmd == "realize") run_realize(c);
    else if (cmd == "invariants") run_invariants(c);
    else if (cmd == "homotopy") run_homotopy(c);
    return 0;
  } catch (const Refusal& e) {
    std::cerr << "refused " << e.bound << ": " << e.detail << "\n";
    return 2;
  } catch (const HypothesisError& e) {
    std::cerr << "refused " << e.what() << "\n";
    return 2;
  } catch (const SchemaError& e) {
    std::cerr << "invalid input: " << e.what() << "\n";
    return 3;
  } catch (const DimensionError& e) {
    std::cerr << "invalid input: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "failed: " << e.what() << "\n";
    return 1;
  }
}
