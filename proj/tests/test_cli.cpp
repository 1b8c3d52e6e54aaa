#include "panto/cli.hpp"
#include "panto/io.hpp"

#include <doctest.h>

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <sstream>

using namespace panto;

namespace {

struct Result {
  int code;
  std::string out, err;
};

Result run(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

void write_file(const std::string& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  f << text;
}

CsvTable csv(const std::string& text) {
  std::istringstream in(text);
  return read_csv(in);
}

}  // namespace

TEST_CASE("simulate: zero model keeps x0") {
  const auto r = run({"simulate", "--model", "zero", "--x0", "2.5", "--delta", "0.1", "--T", "2"});
  REQUIRE(r.code == 0);
  const auto t = csv(r.out);
  CHECK(t.header == std::vector<std::string>{"k", "t", "y_1"});
  CHECK(t.rows.size() == 21);
  for (const auto& row : t.rows) CHECK(row[2] == 2.5);
}

TEST_CASE("simulate: repeat runs are byte-identical") {
  const std::vector<std::string> args{"simulate", "--model", "example41", "--delta", "0.01", "--T", "5", "--seed", "7"};
  const auto a = run(args), b = run(args);
  REQUIRE(a.code == 0);
  CHECK(a.out == b.out);
  const auto c = run({"simulate", "--model", "example41", "--delta", "0.01", "--T", "5", "--seed", "8"});
  CHECK(c.out != a.out);
}

TEST_CASE("simulate: example41 ensemble summary decays") {
  const auto r = run({"simulate", "--model", "example41", "--delta", "0.01", "--T", "20", "--paths", "200", "--stride", "100"});
  REQUIRE(r.code == 0);
  const auto t = csv(r.out);
  CHECK(t.header == std::vector<std::string>{"k", "t", "mean_sq"});
  REQUIRE(t.rows.size() == 21);
  for (const auto& row : t.rows) CHECK(std::isfinite(row[2]));
  CHECK(t.rows.back()[2] < 1e-3 * t.rows.front()[2]);
}

TEST_CASE("converge: short ladder has no order") {
  const auto r = run({"converge", "--model", "linear", "--ladder", "1/8", "--ref", "1/64", "--paths", "20"});
  REQUIRE(r.code == 0);
  const auto j = Json::parse(r.out);
  CHECK(j["order"].is_null());
  CHECK(j["order_defined"] == false);
  CHECK(j.contains("flag"));
  CHECK(j["errors"].size() == 1);
}

TEST_CASE("converge: replayed ladder") {
  write_file("ladder_fixture.csv", "delta,error\n0.1,0.02\n0.05,0.01\n0.025,0.005\n");
  const auto r = run({"converge", "--replay", "ladder_fixture.csv"});
  REQUIRE(r.code == 0);
  const auto j = Json::parse(r.out);
  CHECK(j["order"].get<double>() == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(j["constant"].get<double>() == doctest::Approx(0.2).epsilon(1e-12));
}

TEST_CASE("converge: simulated ladder writes CSV") {
  const auto r = run({"converge", "--model", "linear", "--ladder", "1/8,1/16,1/32", "--ref", "1/128", "--paths", "50",
                      "--csv", "ladder_out.csv"});
  REQUIRE(r.code == 0);
  const auto j = Json::parse(r.out);
  CHECK(j["order_defined"] == true);
  CHECK(j["ci95"].size() == 3);
  std::ifstream in("ladder_out.csv");
  std::vector<double> d, e;
  read_ladder_csv(in, d, e);
  CHECK(d == std::vector<double>{0.125, 0.0625, 0.03125});
}

TEST_CASE("stability: exponential mode on example41") {
  const auto r = run({"stability", "--model", "example41", "--mode", "exp", "--cbar", "1.1", "--alpha0", "0.1",
                      "--lambda0", "1/300", "--dt", "0.001"});
  REQUIRE(r.code == 0);
  const auto j = Json::parse(r.out);
  CHECK(j["pass"] == true);
  CHECK(j["schema"] == 1);
  CHECK(j["rate"].get<double>() == doctest::Approx(std::log(1.1)));
  CHECK(j["rate_normalization"] == "per_unit_time");
}

TEST_CASE("stability: polynomial mode on example42") {
  const auto r = run({"stability", "--model", "example42", "--mode", "poly"});
  REQUIRE(r.code == 0);
  const auto j = Json::parse(r.out);
  CHECK(j["pass"] == true);
  CHECK(j["rate"].get<double>() == doctest::Approx(0.208).epsilon(0.003));
  bool found = false;
  for (const auto& c : j["conditions"])
    if (c["name"] == "condition_1") {
      found = true;
      CHECK(c["lhs"].get<double>() == doctest::Approx(0.24));
    }
  CHECK(found);
  CHECK(j["inputs"]["dt"] == 0.01);
}

TEST_CASE("stability: explicit parameters without a model") {
  const auto r = run({"stability", "--mode", "poly", "--lambdas", "0.76,0.13,0.19,0.09", "--theta-lower", "0.75",
                      "--theta-upper", "0.8", "--dt", "0.05"});
  REQUIRE(r.code == 0);
  CHECK(Json::parse(r.out)["pass"] == true);
}

TEST_CASE("stability: errors and strict mode") {
  const auto r = run({"stability", "--model", "example41", "--mode", "poly"});
  CHECK(r.code == 2);
  CHECK(r.err.find("theta_upper") != std::string::npos);
  const std::vector<std::string> fail{"stability", "--model", "example41", "--mode", "exp", "--cbar", "1.2",
                                      "--alpha0", "0.1", "--lambda0", "1/300", "--dt", "0.001"};
  const auto loose = run(fail);
  CHECK(loose.code == 0);
  CHECK(Json::parse(loose.out)["pass"] == false);
  auto strict = fail;
  strict.push_back("--strict");
  CHECK(run(strict).code == 4);
  CHECK(run({"stability", "--model", "example41", "--mode", "exp", "--cbar", "1.1"}).code == 2);
  CHECK(run({"stability", "--model", "example41", "--mode", "bogus"}).code == 2);
}

TEST_CASE("rates: zero model has zero slopes") {
  const auto r = run({"rates", "--model", "zero", "--delta", "0.1", "--T", "10", "--paths", "3"});
  REQUIRE(r.code == 0);
  const auto j = Json::parse(r.out);
  REQUIRE(j["rates"].size() == 2);
  for (const auto& e : j["rates"]) CHECK(e["slope"].get<double>() == 0.0);
}

TEST_CASE("rates: replayed exponential summary") {
  std::ostringstream text;
  text << "k,t,mean_sq\n";
  for (int k = 0; k <= 1000; ++k) text << k << "," << format_double(k * 0.01) << "," << format_double(std::exp(-0.01 * k)) << "\n";
  write_file("summary_fixture.csv", text.str());
  const auto r = run({"rates", "--replay", "summary_fixture.csv", "--cbar", "2.718281828459045"});
  REQUIRE(r.code == 0);
  const auto j = Json::parse(r.out);
  CHECK(j["rates"][0]["statistic"] == "ms_slope");
  CHECK(j["rates"][0]["slope"].get<double>() == doctest::Approx(-1.0).epsilon(1e-9));
  CHECK(j["rates"][0]["pass"] == true);
  CHECK(j["T"].get<double>() == doctest::Approx(10.0));
}

TEST_CASE("rates: polynomial mode reports zeta star") {
  const auto r = run({"rates", "--model", "example42", "--mode", "poly", "--delta", "0.1", "--T", "20", "--paths", "20"});
  REQUIRE(r.code == 0);
  const auto j = Json::parse(r.out);
  CHECK(j["zeta_star"].get<double>() == doctest::Approx(0.208).epsilon(0.003));
  CHECK(j["rates"][0]["statistic"] == "poly_ms_tail");
  CHECK(j["rates"][0].contains("tail"));
}

TEST_CASE("config file values yield to explicit flags") {
  write_file("cli_config.json", R"({"model": "example41", "delta": 0.01, "T": 1, "seed": 3})");
  const auto a = run({"simulate", "--config", "cli_config.json"});
  const auto b = run({"simulate", "--model", "example41", "--delta", "0.01", "--T", "1", "--seed", "3"});
  REQUIRE(a.code == 0);
  CHECK(a.out == b.out);
  const auto c = run({"simulate", "--config=cli_config.json", "--seed", "4"});
  const auto d = run({"simulate", "--model", "example41", "--delta", "0.01", "--T", "1", "--seed", "4"});
  CHECK(c.out == d.out);
  CHECK(run({"simulate", "--config", "missing_config.json"}).code == 2);
}

TEST_CASE("PANTO_EM_SEED overrides --seed") {
  const std::vector<std::string> args{"simulate", "--model", "example41", "--delta", "0.01", "--T", "1", "--seed", "3"};
  ::setenv("PANTO_EM_SEED", "11", 1);
  const auto a = run(args);
  ::unsetenv("PANTO_EM_SEED");
  const auto b = run({"simulate", "--model", "example41", "--delta", "0.01", "--T", "1", "--seed", "11"});
  CHECK(a.out == b.out);
}

TEST_CASE("exit codes") {
  const std::string blow = R"({"dim": 1, "theta_lower": 0.5, "a": 1e200, "b": 0, "c": 0,
                               "measure": {"kind": "dirac", "theta": 1.0}})";
  CHECK(run({"simulate", "--model", blow, "--delta", "0.1", "--T", "5"}).code == 3);
  CHECK(run({"simulate", "--model", "example41", "--delta", "0.03", "--T", "1"}).code == 2);
  CHECK(run({"simulate", "--model", "nope"}).code == 2);
  CHECK(run({"simulate", "--model", "example41", "--bogus"}).code == 2);
  CHECK(run({}).code == 2);
  CHECK(run({"simulate", "--help"}).code == 0);
}

TEST_CASE("binary entry point") {
  const std::string bin = PANTO_EM_BINARY;
  CHECK(std::system((bin + " stability --model example42 --mode poly --out cli_bin.json").c_str()) == 0);
  CHECK(Json::parse(std::ifstream("cli_bin.json"))["pass"] == true);
  const int status = std::system((bin + " stability --model example41 --mode poly 2>/dev/null").c_str());
  CHECK(WEXITSTATUS(status) == 2);
}
