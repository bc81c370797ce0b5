#include "utori/io.hpp"

#include "utori/errors.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

namespace utori {

namespace {

constexpr double kRealityTol = 1e-12;
// Largest accepted coefficient count of one series.
constexpr double kMaxCoefficients = 1 << 24;

std::string join(const std::string& path, const std::string& field) {
  return path.empty() ? field : path + "." + field;
}

std::string index_text(const MultiIndex& k) {
  std::string s = "[";
  for (Eigen::Index j = 0; j < k.size(); ++j) s += (j ? "," : "") + std::to_string(k(j));
  return s + "]";
}

void dump_value(const Json& j, int indent, std::string& out);

void dump_inline(const Json& j, std::string& out) {
  if (j.is_array()) {
    out += '[';
    for (std::size_t i = 0; i < j.size(); ++i) {
      if (i) out += ", ";
      dump_inline(j[i], out);
    }
    out += ']';
  } else if (j.is_object()) {
    out += '{';
    bool first = true;
    for (const auto& [key, value] : j.items()) {
      if (!first) out += ", ";
      first = false;
      out += Json(key).dump() + ": ";
      dump_inline(value, out);
    }
    out += '}';
  } else {
    dump_value(j, 0, out);
  }
}

// Arrays of scalars and coefficient records stay on one line.
bool is_flat(const Json& j) {
  if (j.is_array()) {
    for (const auto& x : j)
      if (x.is_structured() && !(x.is_array() && is_flat(x))) return false;
    return true;
  }
  if (j.is_object() && j.contains("k") && j.size() <= 3) return true;
  return false;
}

void dump_value(const Json& j, int indent, std::string& out) {
  const std::string pad(indent + 2, ' ');
  if (j.is_number_float()) {
    out += format_number(j.get<double>());
  } else if (j.is_object() && !j.empty() && !is_flat(j)) {
    out += "{\n";
    bool first = true;
    for (const auto& [key, value] : j.items()) {
      if (!first) out += ",\n";
      first = false;
      out += pad + Json(key).dump() + ": ";
      dump_value(value, indent + 2, out);
    }
    out += "\n" + std::string(indent, ' ') + "}";
  } else if (j.is_array() && !j.empty() && !is_flat(j)) {
    out += "[\n";
    for (std::size_t i = 0; i < j.size(); ++i) {
      if (i) out += ",\n";
      out += pad;
      dump_value(j[i], indent + 2, out);
    }
    out += "\n" + std::string(indent, ' ') + "]";
  } else if (j.is_structured()) {
    dump_inline(j, out);
  } else {
    out += j.dump();
  }
}

std::string csv_row(std::initializer_list<double> values, int m) {
  std::string s = std::to_string(m);
  for (double v : values) s += "," + format_number(v);
  return s + "\n";
}

const Json* member(const Json& j, const char* key) {
  if (!j.is_object()) return nullptr;
  const auto it = j.find(key);
  return it == j.end() ? nullptr : &*it;
}

void require_no_errors(const std::vector<Diagnostic>& d) {
  if (!d.empty()) throw SchemaError(d.front().where, d.front().message);
}

// Components array of series sharing one dimension; `n_expected` < 0 accepts any.
std::vector<Diagnostic> validate_components(const Json& j, int n_expected) {
  std::vector<Diagnostic> out;
  const Json* c = member(j, "components");
  if (!c || !c->is_array() || c->empty()) {
    out.push_back({"components", "expected a non-empty array of series"});
    return out;
  }
  const int n = n_expected >= 0 ? n_expected : static_cast<int>(c->size());
  if (static_cast<int>(c->size()) != n)
    out.push_back({"components", "expected " + std::to_string(n) + " components, found " + std::to_string(c->size())});
  for (std::size_t i = 0; i < c->size(); ++i) {
    const std::string path = "components[" + std::to_string(i) + "]";
    auto d = validate_series((*c)[i], path);
    out.insert(out.end(), d.begin(), d.end());
    const Json* dim = member((*c)[i], "n");
    if (d.empty() && dim && dim->get<int>() != static_cast<int>(c->size()))
      out.push_back({join(path, "n"), "component dimension " + std::to_string(dim->get<int>()) +
                                          " differs from the component count " + std::to_string(c->size())});
  }
  return out;
}

std::vector<Diagnostic> validate_matrix(const Json& j, int n) {
  std::vector<Diagnostic> out;
  const Json* D = member(j, "D");
  if (!D) return out;  // identity by default
  bool shape = D->is_array() && static_cast<int>(D->size()) == n;
  if (shape)
    for (const auto& row : *D) {
      if (!row.is_array() || static_cast<int>(row.size()) != n) shape = false;
      else
        for (const auto& x : row)
          if (!x.is_number_integer()) shape = false;
    }
  if (!shape) out.push_back({"D", "expected an " + std::to_string(n) + "x" + std::to_string(n) + " integer matrix"});
  return out;
}

std::vector<PeriodicSeries> components(const Json& j) {
  std::vector<PeriodicSeries> out;
  const Json& c = j.at("components");
  for (std::size_t i = 0; i < c.size(); ++i) out.push_back(series_from_json(c[i], "components[" + std::to_string(i) + "]"));
  return out;
}

Eigen::MatrixXi matrix(const Json& j, int n) {
  Eigen::MatrixXi D = Eigen::MatrixXi::Identity(n, n);
  if (const Json* m = member(j, "D"))
    for (int a = 0; a < n; ++a)
      for (int b = 0; b < n; ++b) D(a, b) = (*m)[a][b].get<int>();
  return D;
}

std::string type_of(const Json& j) {
  const Json* t = member(j, "type");
  return t && t->is_string() ? t->get<std::string>() : "series";
}

}  // namespace

std::string format_number(double x) {
  if (!std::isfinite(x)) return "null";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

std::string dump(const Json& j) {
  std::string out;
  dump_value(j, 0, out);
  return out + "\n";
}

Json parse_json(const std::string& text) {
  std::vector<std::set<std::string>> keys;
  std::string duplicate;
  const auto cb = [&](int /*depth*/, Json::parse_event_t event, Json& parsed) {
    if (event == Json::parse_event_t::object_start) keys.emplace_back();
    if (event == Json::parse_event_t::object_end && !keys.empty()) keys.pop_back();
    if (event == Json::parse_event_t::key && !keys.empty()) {
      const std::string key = parsed.get<std::string>();
      if (!keys.back().insert(key).second && duplicate.empty()) duplicate = key;
    }
    return true;
  };
  Json j;
  try {
    j = Json::parse(text, cb);
  } catch (const Json::parse_error& e) {
    const std::size_t pos = std::min<std::size_t>(e.byte == 0 ? 0 : e.byte - 1, text.size());
    int line = 1, col = 1;
    for (std::size_t i = 0; i < pos; ++i) {
      if (text[i] == '\n') {
        ++line;
        col = 1;
      } else {
        ++col;
      }
    }
    throw SchemaError("line " + std::to_string(line) + ", column " + std::to_string(col), "invalid JSON");
  }
  if (!duplicate.empty()) throw SchemaError(duplicate, "duplicate key \"" + duplicate + "\"");
  return j;
}

Json read_json_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw SchemaError(path, "cannot open file");
  std::stringstream ss;
  ss << in.rdbuf();
  try {
    return parse_json(ss.str());
  } catch (const SchemaError& e) {
    throw SchemaError(path + ", " + e.where(), std::string(e.what()).substr(e.where().size() + 2));
  }
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ComputationError("cannot write " + path);
  out << content;
}

Json to_json(const PeriodicSeries& h) {
  Json j;
  j["n"] = h.dim();
  j["N"] = h.degree();
  j["real"] = h.is_real();
  Json c = Json::array();
  for_each_index(h.dim(), h.degree(), [&](Eigen::Index lin, const MultiIndex& k) {
    const Complex v = h.coeffs()(lin);
    if (v == Complex(0.0)) return;
    Json e;
    e["k"] = std::vector<int>(k.data(), k.data() + k.size());
    e["re"] = v.real();
    e["im"] = v.imag();
    c.push_back(std::move(e));
  });
  j["coeffs"] = std::move(c);
  return j;
}

Json to_json(const TorusMapLift& phi, const std::string& type) {
  Json j;
  j["type"] = type;
  Json D = Json::array();
  for (int a = 0; a < phi.dim(); ++a) {
    Json row = Json::array();
    for (int b = 0; b < phi.dim(); ++b) row.push_back(phi.linear_part()(a, b));
    D.push_back(std::move(row));
  }
  j["D"] = std::move(D);
  Json c = Json::array();
  for (const auto& f : phi.periodic()) c.push_back(to_json(f));
  j["components"] = std::move(c);
  return j;
}

Json to_json(const PeriodicVectorField& v) {
  Json j;
  j["type"] = "field";
  Json c = Json::array();
  for (const auto& p : v.p) c.push_back(to_json(p));
  j["components"] = std::move(c);
  return j;
}

Json to_json(const TorusEmbedding& e) {
  Json j;
  j["type"] = "embedding";
  j["r0"] = e.r0;
  Json c = Json::array();
  for (const auto& p : e.phi) c.push_back(to_json(p));
  j["components"] = std::move(c);
  return j;
}

std::vector<Diagnostic> validate_series(const Json& j, const std::string& path) {
  std::vector<Diagnostic> out;
  if (!j.is_object()) return {{path.empty() ? "(root)" : path, "expected a series object"}};
  const Json* n = member(j, "n");
  const Json* N = member(j, "N");
  const Json* real = member(j, "real");
  const Json* coeffs = member(j, "coeffs");
  if (!n || !n->is_number_integer() || n->get<long long>() < 1)
    out.push_back({join(path, "n"), "expected an integer >= 1"});
  if (!N || !N->is_number_integer() || N->get<long long>() < 0)
    out.push_back({join(path, "N"), "expected an integer >= 0"});
  if (real && !real->is_boolean()) out.push_back({join(path, "real"), "expected a boolean"});
  if (!coeffs || !coeffs->is_array()) out.push_back({join(path, "coeffs"), "expected an array"});
  for (const auto& [key, value] : j.items())
    if (key != "n" && key != "N" && key != "real" && key != "coeffs")
      out.push_back({join(path, key), "unknown field"});
  if (!out.empty()) return out;

  const int dim = n->get<int>(), deg = N->get<int>();
  if (std::pow(2.0 * deg + 1.0, dim) > kMaxCoefficients) {
    out.push_back({join(path, "N"), "(2N+1)^n exceeds the supported size"});
    return out;
  }
  std::map<std::vector<int>, std::pair<std::size_t, Complex>> seen;
  for (std::size_t i = 0; i < coeffs->size(); ++i) {
    const Json& e = (*coeffs)[i];
    const std::string at = join(path, "coeffs[" + std::to_string(i) + "]");
    if (!e.is_object()) {
      out.push_back({at, "expected an object with k, re, im"});
      continue;
    }
    const Json* k = member(e, "k");
    const Json* re = member(e, "re");
    const Json* im = member(e, "im");
    bool ok = true;
    if (!k || !k->is_array() || static_cast<int>(k->size()) != dim) {
      out.push_back({at + ".k", "expected " + std::to_string(dim) + " integers"});
      ok = false;
    } else {
      for (const auto& x : *k)
        if (!x.is_number_integer()) {
          out.push_back({at + ".k", "expected integers"});
          ok = false;
          break;
        }
    }
    if (!re || !re->is_number()) {
      out.push_back({at + ".re", "expected a number"});
      ok = false;
    }
    if (im && !im->is_number()) {
      out.push_back({at + ".im", "expected a number"});
      ok = false;
    }
    for (const auto& [key, value] : e.items())
      if (key != "k" && key != "re" && key != "im") out.push_back({at + "." + key, "unknown field"});
    if (!ok) continue;
    const auto idx = k->get<std::vector<int>>();
    bool in_range = true;
    for (int x : idx)
      if (std::abs(x) > deg) in_range = false;
    if (!in_range) {
      out.push_back({at + ".k", "index outside the degree bound N = " + std::to_string(deg)});
      continue;
    }
    const Complex v(re->get<double>(), im ? im->get<double>() : 0.0);
    const auto [it, fresh] = seen.emplace(idx, std::make_pair(i, v));
    if (!fresh)
      out.push_back({at + ".k", "duplicate index " + index_text(Eigen::Map<const MultiIndex>(idx.data(), dim)) +
                                    " (first at coeffs[" + std::to_string(it->second.first) + "])"});
  }
  if (out.empty() && real && real->get<bool>()) {
    for (const auto& [idx, entry] : seen) {
      std::vector<int> neg(idx.size());
      for (std::size_t a = 0; a < idx.size(); ++a) neg[a] = -idx[a];
      if (neg < idx) continue;
      const auto it = seen.find(neg);
      const Complex partner = it == seen.end() ? Complex(0.0) : it->second.second;
      if (std::abs(partner - std::conj(entry.second)) > kRealityTol) {
        const MultiIndex kk = Eigen::Map<const MultiIndex>(idx.data(), dim);
        out.push_back({join(path, "coeffs"), "real flag violated: c_" + index_text(kk) + " and c_" +
                                                 index_text(-kk) + " are not conjugate"});
      }
    }
  }
  return out;
}

std::vector<Diagnostic> validate_document(const Json& j) {
  const std::string type = type_of(j);
  if (type == "series") return validate_series(j);
  if (!j.is_object()) return {{"(root)", "expected an object"}};
  std::vector<Diagnostic> out;
  if (type == "map" || type == "log-map" || type == "field") {
    out = validate_components(j, -1);
    if (out.empty() && type != "field") {
      auto d = validate_matrix(j, static_cast<int>(j.at("components").size()));
      out.insert(out.end(), d.begin(), d.end());
    }
  } else if (type == "embedding") {
    const Json* r0 = member(j, "r0");
    if (!r0 || !r0->is_number() || !(r0->get<double>() > 0.0 && r0->get<double>() < 1.0))
      out.push_back({"r0", "expected a number in (0, 1)"});
    auto d = validate_components(j, -1);
    out.insert(out.end(), d.begin(), d.end());
  } else {
    out.push_back({"type", "unknown document type \"" + type + "\""});
  }
  return out;
}

std::vector<Diagnostic> validate_file(const std::string& path) {
  try {
    return validate_document(read_json_file(path));
  } catch (const SchemaError& e) {
    return {{e.where(), std::string(e.what()).substr(e.where().size() + 2)}};
  }
}

PeriodicSeries series_from_json(const Json& j, const std::string& path) {
  require_no_errors(validate_series(j, path));
  const int n = j.at("n").get<int>(), N = j.at("N").get<int>();
  const bool real = j.contains("real") && j.at("real").get<bool>();
  PeriodicSeries h(n, N, false);
  for (const auto& e : j.at("coeffs")) {
    const auto idx = e.at("k").get<std::vector<int>>();
    const Complex v(e.at("re").get<double>(), e.contains("im") ? e.at("im").get<double>() : 0.0);
    h.set_coeff(Eigen::Map<const MultiIndex>(idx.data(), n), v);
  }
  // the reality check passed, so the projection only fixes roundoff
  return real ? h.as_real() : h;
}

TorusMapLift map_from_json(const Json& j) {
  if (type_of(j) != "map" && type_of(j) != "log-map") throw SchemaError("type", "expected a map document");
  require_no_errors(validate_document(j));
  auto f = components(j);
  const int n = static_cast<int>(f.size());
  return TorusMapLift(matrix(j, n), std::move(f));
}

AnnulusMap log_map_from_json(const Json& j) {
  if (type_of(j) != "log-map") throw SchemaError("type", "expected a log-map document");
  AnnulusMap out{map_from_json(j)};
  if (!out.lift.has_identity_linear_part()) throw SchemaError("D", "a log-map has the identity linear part");
  return out;
}

PeriodicVectorField field_from_json(const Json& j) {
  if (type_of(j) != "field") throw SchemaError("type", "expected a field document");
  require_no_errors(validate_document(j));
  return PeriodicVectorField(components(j));
}

TorusEmbedding embedding_from_json(const Json& j) {
  if (type_of(j) != "embedding") throw SchemaError("type", "expected an embedding document");
  require_no_errors(validate_document(j));
  TorusEmbedding e;
  e.r0 = j.at("r0").get<double>();
  e.phi = components(j);
  return e;
}

std::string fibering_trace_csv(const KamTrace& trace) {
  std::string s = "m,r_m,delta_m,b_m,B_m,residual\n";
  for (const auto& t : trace) s += csv_row({t.r, t.delta, t.b, t.B, t.residual}, t.m);
  return s;
}

std::string realization_trace_csv(const KamTrace& trace) {
  std::string s = "m,r_m,delta_m,a_m,residual\n";
  for (const auto& t : trace) s += csv_row({t.r, t.delta, t.b, t.residual}, t.m);
  return s;
}

}  // namespace utori
