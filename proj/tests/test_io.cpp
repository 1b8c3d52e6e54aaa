#include "panto/io.hpp"

#include <doctest.h>

#include <cmath>
#include <fstream>
#include <sstream>

using namespace panto;

TEST_CASE("model JSON round trip for every builtin") {
  for (const auto& name : builtin_model_names()) {
    const auto m = *make_builtin<double>(name);
    const auto back = model_from_json(model_to_json(m));
    CHECK(back.id() == m.id());
    CHECK(back.dim() == m.dim());
    CHECK(back.theta_lower().value() == m.theta_lower().value());
    CHECK(back.coefficients().a == m.coefficients().a);
    CHECK(back.coefficients().beta == m.coefficients().beta);
    CHECK(back.coefficients().use_abs == m.coefficients().use_abs);
    CHECK(back.lambdas == m.lambdas);
    CHECK(back.theta_upper == m.theta_upper);
    REQUIRE(back.measure().atoms.size() == m.measure().atoms.size());
    for (std::size_t i = 0; i < m.measure().atoms.size(); ++i) {
      CHECK(back.measure().atoms[i].theta == m.measure().atoms[i].theta);
      CHECK(back.measure().atoms[i].weight == m.measure().atoms[i].weight);
    }
  }
}

TEST_CASE("model JSON: documented schema") {
  const auto m = model_from_json(Json::parse(R"({
    "dim": 1, "theta_lower": 0.75, "a": -1.1, "b": 0.04, "c": 0.2, "beta": 0.7, "use_abs": true,
    "measure": {"kind": "uniform", "support": [0.75, 1.0], "n_atoms": 8},
    "lambdas": [2.16, 0.08, 1.23, 0.17]})"));
  CHECK(m.measure().atoms.size() == 8);
  CHECK(m.lambdas->at(2) == 1.23);
  CHECK_FALSE(m.theta_upper);
  const auto atoms = model_from_json(Json::parse(R"({
    "theta_lower": 0.5, "a": -1, "b": 0, "c": 1,
    "measure": {"kind": "atoms", "support": [0.5, 1.0], "atoms": [[0.5, 0.25], [1.0, 0.75]]}})"));
  CHECK(atoms.measure().atoms[1].weight == 0.75);
  const auto over = model_from_json(Json::parse(R"({"builtin": "example42", "c": 0.5})"));
  CHECK(over.coefficients().c == 0.5);
  CHECK(over.coefficients().a == -0.4);
  CHECK(*over.theta_upper == 0.8);
}

TEST_CASE("model JSON: errors") {
  CHECK_THROWS_AS(model_from_json(Json::parse(R"({"builtin": "example41", "typo": 1})")), ConfigError);
  CHECK_THROWS_AS(model_from_json(Json::parse(R"({"theta_lower": 0.75, "a": 1, "b": 0, "c": 0})")), ConfigError);
  CHECK_THROWS_AS(model_from_json(Json::parse(R"({"builtin": "nope"})")), ConfigError);
  CHECK_THROWS_AS(model_from_json(Json::parse(R"({"builtin": "example41", "a": "x"})")), ConfigError);
  CHECK_THROWS_AS(model_from_json(Json::parse(R"({"builtin": "example41",
    "measure": {"kind": "atoms", "support": [0.75, 1], "atoms": [[0.8, 0.5]]}})")), ConfigError);
  CHECK_THROWS_AS(load_model("/nonexistent/model.json"), ConfigError);
  CHECK_THROWS_AS(load_model("{not json"), ConfigError);
}

TEST_CASE("load_model: builtin, inline and file") {
  CHECK(load_model("example41").id() == "example41");
  CHECK(load_model(R"( {"builtin": "linear", "id": "mine"})").id() == "mine");
  const std::string path = "test_io_model.json";
  {
    std::ofstream f(path);
    f << model_to_json(make_example_42()).dump();
  }
  CHECK(load_model(path).coefficients().c == 0.3);
}

TEST_CASE("stability report JSON") {
  const auto r = check_polynomial(StabilityParams::from_model(make_example_42()), 0.01);
  const Json j = to_json(r);
  CHECK(j["schema"] == 1);
  CHECK(j["mode"] == "poly");
  CHECK(j["pass"] == true);
  CHECK(j["conditions"].is_array());
  for (const auto& c : j["conditions"]) {
    CHECK(c.contains("name"));
    CHECK(c.contains("lhs"));
    CHECK(c.contains("bound"));
    CHECK(c.contains("pass"));
  }
  CHECK(j["delta_bounds"]["delta0"].get<double>() == doctest::Approx(0.25));
  CHECK(j["rate"].get<double>() == doctest::Approx(0.208).epsilon(0.003));
}

TEST_CASE("non-finite numbers survive JSON") {
  CHECK(json_number(-INFINITY) == "-inf");
  CHECK(std::isinf(number_from_json(json_number(-INFINITY))));
  CHECK(std::isnan(number_from_json(json_number(NAN))));
  CHECK(number_from_json(json_number(0.1)) == 0.1);
}

TEST_CASE("format_double round trips") {
  for (double x : {0.1, 1.0 / 3.0, -2.5e-300, 1e300, 0.0, 123456789.0}) {
    const auto s = format_double(x);
    CHECK(std::stod(s) == x);
    CHECK(s.find(',') == std::string::npos);
  }
}

TEST_CASE("path CSV round trip") {
  const auto m = make_example_41();
  auto p = simulate_path(m, Vector<double>(Vector<double>::Ones(1)), generate<double>(PathSeed{1, 0}, 1, 50, 0.01), 50);
  std::stringstream ss;
  write_path_csv(ss, p);
  const std::string text = ss.str();
  CHECK(text.rfind("k,t,y_1\n0,0,1\n", 0) == 0);
  CHECK(text.find('\r') == std::string::npos);
  const auto back = read_path_csv(ss);
  CHECK(back.states == p.states);
  CHECK(back.delta == p.delta);
}

TEST_CASE("summary CSV round trip") {
  const auto s = simulate_ensemble(make_example_41(), Vector<double>(Vector<double>::Ones(1)), 0.01, 100, 5, 2, EnsembleOptions{1, 10, true});
  std::stringstream ss;
  write_summary_csv(ss, s);
  const auto back = read_summary_csv(ss);
  CHECK(back.record_steps == s.record_steps);
  CHECK(back.delta == s.delta);
  CHECK(back.steps == s.steps);
  CHECK(Vector<double>(back.sq_norms.row(0).transpose()) == s.mean_sq());
}

TEST_CASE("ladder CSV round trip") {
  const std::vector<double> d{1.0 / 32, 1.0 / 64, 1.0 / 128}, e{0.3, 0.15, 0.075};
  std::stringstream ss;
  write_ladder_csv(ss, d, e);
  std::vector<double> d2, e2;
  read_ladder_csv(ss, d2, e2);
  CHECK(d2 == d);
  CHECK(e2 == e);
}

TEST_CASE("CSV parser errors") {
  std::stringstream ragged("a,b\n1,2\n3\n");
  CHECK_THROWS_AS(read_csv(ragged), ConfigError);
  std::stringstream junk("a\nx\n");
  CHECK_THROWS_AS(read_csv(junk), ConfigError);
  std::stringstream empty("");
  CHECK_THROWS_AS(read_csv(empty), ConfigError);
  std::stringstream crlf("a,b\r\n1,2\r\n");
  CHECK(read_csv(crlf).rows[0][1] == 2.0);
}
