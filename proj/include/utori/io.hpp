#pragma once

#include "json.hpp"
#include "utori/flows.hpp"
#include "utori/form_realization.hpp"
#include "utori/kam_fibering.hpp"
#include "utori/periodic_series.hpp"
#include "utori/torus_map.hpp"
#include "utori/torus_pipeline.hpp"

#include <stdexcept>
#include <string>
#include <vector>

namespace utori {

using Json = nlohmann::ordered_json;

// Malformed input. `where` is "line L, column C" for syntax errors and a field
// path such as "coeffs[3].k" otherwise.
class SchemaError : public std::runtime_error {
 public:
  SchemaError(std::string where, const std::string& message)
      : std::runtime_error(where + ": " + message), where_(std::move(where)) {}
  const std::string& where() const noexcept { return where_; }

 private:
  std::string where_;
};

struct Diagnostic {
  std::string where;
  std::string message;
};

// File formats. A series is
//   {"n": int, "N": int, "real": bool, "coeffs": [{"k": [..], "re": x, "im": y}, ...]}
// with unique indices, |k_j| <= N and omitted indices zero. The others wrap it:
//   map        {"type": "map", "D": [[..]], "components": [series, ...]}
//   log map    {"type": "log-map", ...}  z'_j = z_j exp(i f_j), identity D
//   field      {"type": "field", "components": [series, ...]}
//   embedding  {"type": "embedding", "r0": x, "components": [series, ...]}

// %.17g; non-finite values print as null.
std::string format_number(double x);

// Indented JSON with every float in %.17g and a trailing newline.
std::string dump(const Json& j);

// Syntax errors carry line and column; duplicate object keys are rejected.
Json parse_json(const std::string& text);
Json read_json_file(const std::string& path);
void write_file(const std::string& path, const std::string& content);

Json to_json(const PeriodicSeries& h);
Json to_json(const TorusMapLift& phi, const std::string& type = "map");
Json to_json(const PeriodicVectorField& v);
Json to_json(const TorusEmbedding& e);

// The first diagnostic of the matching validator is thrown as SchemaError.
PeriodicSeries series_from_json(const Json& j, const std::string& path = "");
TorusMapLift map_from_json(const Json& j);
AnnulusMap log_map_from_json(const Json& j);
PeriodicVectorField field_from_json(const Json& j);
TorusEmbedding embedding_from_json(const Json& j);

// Schema and invariant diagnostics without computing: reality pairs, degree
// bounds, duplicate indices, component dimensions.
std::vector<Diagnostic> validate_series(const Json& j, const std::string& path = "");
std::vector<Diagnostic> validate_document(const Json& j);
// Parses the file first; syntax errors become a single diagnostic.
std::vector<Diagnostic> validate_file(const std::string& path);

// m,r_m,delta_m,b_m,B_m,residual
std::string fibering_trace_csv(const KamTrace& trace);
// m,r_m,delta_m,a_m,residual
std::string realization_trace_csv(const KamTrace& trace);

}  // namespace utori
