#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "test_support.hpp"
#include "utori/io.hpp"

#include <cmath>

using namespace utori;

namespace {

bool mentions(const std::vector<Diagnostic>& d, const std::string& what) {
  for (const auto& x : d)
    if (x.message.find(what) != std::string::npos || x.where.find(what) != std::string::npos) return true;
  return false;
}

}  // namespace

TEST_CASE("number format") {
  CHECK(format_number(0.1) == "0.10000000000000001");
  CHECK(format_number(1.0) == "1");
  std::mt19937_64 rng(30);
  std::uniform_real_distribution<double> u(-300.0, 300.0);
  for (int i = 0; i < 1000; ++i) {
    const double x = std::copysign(std::pow(10.0, u(rng)), u(rng));
    CHECK(std::strtod(format_number(x).c_str(), nullptr) == x);
  }
  CHECK(format_number(std::nan("")) == "null");
}

TEST_CASE("series round trip is bit exact") {
  std::mt19937_64 rng(31);
  for (bool real : {false, true}) {
    const auto h = utori::testing::random_series(rng, 2, 3, real);
    const auto text = dump(to_json(h));
    const auto back = series_from_json(parse_json(text));
    CHECK(back.dim() == 2);
    CHECK(back.degree() == 3);
    CHECK(back.is_real() == real);
    CHECK((back.coeffs().array() == h.coeffs().array()).all());
    CHECK(dump(to_json(back)) == text);
  }
  // omitted indices are zero
  const auto z = series_from_json(parse_json(R"({"n": 1, "N": 2, "real": true, "coeffs": []})"));
  CHECK(z.is_zero());
}

TEST_CASE("maps, fields and embeddings") {
  std::mt19937_64 rng(32);
  Eigen::MatrixXi D(2, 2);
  D << 1, 1, 0, 1;
  std::vector<PeriodicSeries> f{utori::testing::random_series(rng, 2, 2, true),
                                utori::testing::random_series(rng, 2, 2, true)};
  const TorusMapLift phi(D, f);
  const auto back = map_from_json(parse_json(dump(to_json(phi))));
  CHECK(back.linear_part() == D);
  CHECK((back.periodic(1).coeffs().array() == f[1].coeffs().array()).all());

  const auto e = TorusEmbedding::identity(3, 0.4);
  const auto eb = embedding_from_json(parse_json(dump(to_json(e))));
  CHECK(eb.r0 == 0.4);
  CHECK(eb.closeness(0.4) == 0.0);

  const PeriodicVectorField v(f);
  CHECK(field_from_json(parse_json(dump(to_json(v)))).dim() == 2);
  CHECK_THROWS_AS(embedding_from_json(to_json(v)), SchemaError);
}

TEST_CASE("validation diagnostics") {
  CHECK(validate_document(parse_json(R"({"n": 1, "N": 1, "coeffs": [{"k": [1], "re": 1}]})")).empty());

  const auto dup = validate_document(parse_json(
      R"({"n": 1, "N": 2, "coeffs": [{"k": [1], "re": 1}, {"k": [1], "re": 2}]})"));
  REQUIRE(dup.size() == 1);
  CHECK(dup[0].where == "coeffs[1].k");
  CHECK(mentions(dup, "duplicate index [1]"));

  const auto pair = validate_document(parse_json(
      R"({"n": 2, "N": 1, "real": true, "coeffs": [{"k": [1, 0], "re": 1, "im": 1}, {"k": [-1, 0], "re": 1, "im": 1}]})"));
  REQUIRE(pair.size() == 1);
  CHECK(mentions(pair, "c_[-1,0] and c_[1,0]"));

  CHECK(mentions(validate_document(parse_json(R"({"n": 1, "N": 1, "coeffs": [{"k": [3], "re": 1}]})")),
                 "degree bound"));
  CHECK(mentions(validate_document(parse_json(R"({"n": 1, "N": 1, "coeffs": [{"k": [0, 1], "re": 1}]})")),
                 "expected 1 integers"));
  CHECK(mentions(validate_document(parse_json(R"({"n": 1, "coeffs": []})")), "N"));
  CHECK(mentions(validate_document(parse_json(R"({"type": "embedding", "r0": 2, "components": []})")), "r0"));
  CHECK(mentions(validate_document(parse_json(
                     R"({"type": "map", "components": [{"n": 1, "N": 0, "coeffs": []}, {"n": 1, "N": 0, "coeffs": []}]})")),
                 "component dimension"));

  try {
    parse_json("{\n  \"n\": 1,\n  \"N\": 1,\n  \"coeffs\": [\n}");
    FAIL("expected a syntax error");
  } catch (const SchemaError& e) {
    CHECK(e.where().rfind("line 5", 0) == 0);
  }
  try {
    parse_json(R"({"n": 1, "n": 2, "N": 0, "coeffs": []})");
    FAIL("expected a duplicate key");
  } catch (const SchemaError& e) {
    CHECK(std::string(e.what()).find("duplicate key") != std::string::npos);
  }
  CHECK_THROWS_AS(series_from_json(parse_json(R"({"n": 1, "N": 1, "coeffs": [{"k": [3], "re": 1}]})")),
                  SchemaError);
}

TEST_CASE("trace columns") {
  KamTrace t(2);
  t[0] = {0, 0.5, 0.0625, 1e-3, 2e-3, 0.0, 0.1};
  t[1] = {1, 0.375, 1.0 / 36, 1e-6, 1e-5, 1e-17, 0.0};
  const auto f = fibering_trace_csv(t);
  CHECK(f.rfind("m,r_m,delta_m,b_m,B_m,residual\n0,0.5,0.0625,0.001,0.002,0\n", 0) == 0);
  const auto r = realization_trace_csv(t);
  CHECK(r.rfind("m,r_m,delta_m,a_m,residual\n", 0) == 0);
  CHECK(r.find("\n1,0.375,0.027777777777777776,9.9999999999999995e-07,1.0000000000000001e-17\n") != std::string::npos);
}
