#include "panto/io.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <limits>
#include <ostream>
#include <set>
#include <sstream>

namespace panto {

namespace {

MeasureSpec measure_from_json(const Json& j) {
  const std::string kind = j.at("kind").get<std::string>();
  if (kind == "dirac") return MeasureSpec::dirac(j.at("theta").get<double>());
  const auto support = j.at("support").get<std::array<double, 2>>();
  if (kind == "uniform") return MeasureSpec::uniform(support[0], support[1], j.value("n_atoms", 16));
  if (kind == "atoms") {
    MeasureSpec m{{}, support[0], support[1]};
    for (const auto& a : j.at("atoms")) {
      const auto pair = a.get<std::array<double, 2>>();
      m.atoms.push_back({pair[0], pair[1]});
    }
    return m;
  }
  throw ConfigError("model: measure kind must be uniform, atoms or dirac, got '" + kind + "'");
}

Json measure_to_json(const MeasureSpec& m) {
  Json atoms = Json::array();
  for (const auto& a : m.atoms) atoms.push_back({a.theta, a.weight});
  return {{"kind", "atoms"}, {"support", {m.lo, m.hi}}, {"atoms", atoms}};
}

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

double parse_double(const std::string& s) {
  double x = 0.0;
  const char* first = s.data();
  const char* last = s.data() + s.size();
  if (first != last && *first == '+') ++first;
  const auto [ptr, ec] = std::from_chars(first, last, x);
  if (ec != std::errc() || ptr != last) throw ConfigError("csv: cannot parse number '" + s + "'");
  return x;
}

}  // namespace

PantographIntegralModel<double> model_from_json(const Json& j) {
  static const std::set<std::string> known{"builtin", "id",   "dim",     "brownian_dim", "theta_lower",
                                           "a",       "b",    "c",       "beta",         "use_abs",
                                           "measure", "lambdas", "theta_upper", "schema"};
  if (!j.is_object()) throw ConfigError("model: expected a JSON object");
  for (const auto& [key, value] : j.items())
    if (!known.count(key)) throw ConfigError("model: unknown key '" + key + "'");
  try {
    std::optional<PantographIntegralModel<double>> base;
    if (j.contains("builtin")) {
      const auto name = j.at("builtin").get<std::string>();
      base = make_builtin<double>(name);
      if (!base) throw ConfigError("model: unknown builtin '" + name + "'");
    }
    auto need = [&](const char* key) {
      if (!j.contains(key)) throw ConfigError(std::string("model: missing field '") + key + "'");
      return j.at(key);
    };

    PantographIntegralModel<double>::Coefficients coeffs;
    if (base) coeffs = base->coefficients();
    coeffs.a = base ? j.value("a", coeffs.a) : need("a").get<double>();
    coeffs.b = base ? j.value("b", coeffs.b) : need("b").get<double>();
    coeffs.c = base ? j.value("c", coeffs.c) : need("c").get<double>();
    coeffs.beta = j.value("beta", base ? coeffs.beta : 0.0);
    coeffs.use_abs = j.value("use_abs", base ? coeffs.use_abs : true);

    const double theta = base ? j.value("theta_lower", base->theta_lower().value()) : need("theta_lower").get<double>();
    const auto dim = j.value<Eigen::Index>("dim", base ? base->dim() : 1);
    const auto bdim = j.value<Eigen::Index>("brownian_dim", base ? base->brownian_dim() : 1);
    MeasureSpec measure = j.contains("measure") ? measure_from_json(j.at("measure"))
                          : base                ? base->measure()
                                                : measure_from_json(need("measure"));

    PantographIntegralModel<double> m(dim, theta, coeffs, std::move(measure), bdim);
    if (base) {
      m.lambdas = base->lambdas;
      m.theta_upper = base->theta_upper;
      m.named(base->id());
    } else {
      m.named("custom");
    }
    if (j.contains("lambdas")) m.lambdas = j.at("lambdas").get<std::array<double, 4>>();
    if (j.contains("theta_upper")) m.theta_upper = j.at("theta_upper").get<double>();
    if (j.contains("id")) m.named(j.at("id").get<std::string>());
    return m;
  } catch (const Json::exception& e) {
    throw ConfigError(std::string("model: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("model: ") + e.what());
  }
}

Json model_to_json(const PantographIntegralModel<double>& model) {
  const auto& c = model.coefficients();
  Json j{{"id", model.id()},
         {"dim", model.dim()},
         {"brownian_dim", model.brownian_dim()},
         {"theta_lower", model.theta_lower().value()},
         {"a", c.a},
         {"b", c.b},
         {"c", c.c},
         {"beta", c.beta},
         {"use_abs", c.use_abs},
         {"measure", measure_to_json(model.measure())}};
  if (model.lambdas) j["lambdas"] = *model.lambdas;
  if (model.theta_upper) j["theta_upper"] = *model.theta_upper;
  return j;
}

Json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open '" + path + "'");
  try {
    return Json::parse(in);
  } catch (const Json::exception& e) {
    throw ConfigError("invalid JSON in '" + path + "': " + e.what());
  }
}

PantographIntegralModel<double> load_model(const std::string& spec) {
  if (auto m = make_builtin<double>(spec)) return *m;
  const auto first = spec.find_first_not_of(" \t\r\n");
  if (first != std::string::npos && spec[first] == '{') {
    try {
      return model_from_json(Json::parse(spec));
    } catch (const Json::parse_error& e) {
      throw ConfigError(std::string("model: invalid inline JSON: ") + e.what());
    }
  }
  std::ifstream probe(spec);
  if (!probe) throw ConfigError("model '" + spec + "' is neither a builtin, inline JSON nor a readable file");
  return model_from_json(read_json_file(spec));
}

Json json_number(double x) {
  if (std::isfinite(x)) return x;
  if (std::isnan(x)) return "nan";
  return x > 0 ? "inf" : "-inf";
}

double number_from_json(const Json& j) {
  if (j.is_number()) return j.get<double>();
  if (j.is_string()) {
    const auto s = j.get<std::string>();
    if (s == "inf") return std::numeric_limits<double>::infinity();
    if (s == "-inf") return -std::numeric_limits<double>::infinity();
    if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
  }
  throw ConfigError("expected a number, got " + j.dump());
}

Json to_json(const StabilityReport& report) {
  Json conditions = Json::array();
  for (const auto& c : report.conditions)
    conditions.push_back({{"name", c.name},
                          {"lhs", json_number(c.lhs)},
                          {"bound", json_number(c.bound)},
                          {"relation", c.relation},
                          {"pass", c.pass}});
  Json bounds = Json::object();
  for (const auto& [name, value] : report.delta_bounds) bounds[name] = json_number(value);
  Json j{{"schema", kSchemaVersion}, {"mode", to_string(report.mode)}, {"conditions", conditions},
         {"rate", json_number(report.rate)}};
  if (report.mode == StabilityMode::exponential) {
    j["rate_normalization"] = "per_unit_time";
    if (report.rate_per_step) j["rate_per_step"] = json_number(*report.rate_per_step);
  } else {
    j["rate_normalization"] = "per_log_time";
    j["gamma_star"] = report.gamma_star ? json_number(*report.gamma_star) : Json(nullptr);
  }
  j["delta_bounds"] = bounds;
  j["pass"] = report.pass;
  return j;
}

Json to_json(const ErrorFit& fit) {
  Json deltas = Json::array(), errors = Json::array();
  for (const double d : fit.deltas) deltas.push_back(d);
  for (const double e : fit.errors) errors.push_back(json_number(e));
  return {{"schema", kSchemaVersion},          {"deltas", deltas},
          {"errors", errors},                  {"order", json_number(fit.order)},
          {"order_stderr", json_number(fit.order_stderr)}, {"constant", json_number(fit.constant)}};
}

Json to_json(const Window& window) { return {window.t_start, window.t_end}; }

Json to_json(const RateEstimate& rate) {
  return {{"slope", json_number(rate.slope)},
          {"stderr", json_number(rate.std_error)},
          {"window", to_json(rate.window)},
          {"n_paths", rate.n_paths}};
}

std::string format_double(double x) {
  std::array<char, 64> buf{};
  const auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), x);
  return std::string(buf.data(), ptr);
}

std::size_t CsvTable::column(const std::string& name) const {
  const auto it = std::find(header.begin(), header.end(), name);
  if (it == header.end()) throw ConfigError("csv: missing column '" + name + "'");
  return static_cast<std::size_t>(it - header.begin());
}

CsvTable read_csv(std::istream& in) {
  CsvTable t;
  std::string line;
  auto next_line = [&] {
    if (!std::getline(in, line)) return false;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    return true;
  };
  if (!next_line()) throw ConfigError("csv: empty input");
  t.header = split(line);
  while (next_line()) {
    if (line.empty()) continue;
    const auto cells = split(line);
    if (cells.size() != t.header.size()) throw ConfigError("csv: row width does not match the header");
    std::vector<double> row;
    row.reserve(cells.size());
    for (const auto& c : cells) row.push_back(parse_double(c));
    t.rows.push_back(std::move(row));
  }
  return t;
}

void write_path_csv(std::ostream& out, const DiscretePath<double>& path) {
  out << "k,t";
  for (Eigen::Index i = 0; i < path.states.rows(); ++i) out << ",y_" << (i + 1);
  out << '\n';
  for (Eigen::Index k = 0; k < path.states.cols(); ++k) {
    out << k << ',' << format_double(static_cast<double>(k) * path.delta);
    for (Eigen::Index i = 0; i < path.states.rows(); ++i) out << ',' << format_double(path.states(i, k));
    out << '\n';
  }
}

DiscretePath<double> read_path_csv(std::istream& in) {
  const CsvTable t = read_csv(in);
  if (t.rows.size() < 2) throw ConfigError("csv: a path needs at least two rows");
  const std::size_t kc = t.column("k"), tc = t.column("t");
  std::vector<std::size_t> ycols;
  for (std::size_t i = 1;; ++i) {
    const auto it = std::find(t.header.begin(), t.header.end(), "y_" + std::to_string(i));
    if (it == t.header.end()) break;
    ycols.push_back(static_cast<std::size_t>(it - t.header.begin()));
  }
  if (ycols.empty()) throw ConfigError("csv: no y_1 column");
  DiscretePath<double> p;
  p.delta = t.rows[1][tc] / t.rows[1][kc];
  p.states.resize(static_cast<Eigen::Index>(ycols.size()), static_cast<Eigen::Index>(t.rows.size()));
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    if (t.rows[r][kc] != static_cast<double>(r)) throw ConfigError("csv: k must run 0, 1, 2, ...");
    for (std::size_t i = 0; i < ycols.size(); ++i)
      p.states(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(r)) = t.rows[r][ycols[i]];
  }
  p.model_id = "replay";
  return p;
}

void write_summary_csv(std::ostream& out, const EnsembleSummary<double>& summary) {
  out << "k,t,mean_sq\n";
  const Vector<double> m = summary.mean_sq();
  for (std::size_t j = 0; j < summary.record_steps.size(); ++j) {
    const auto k = summary.record_steps[j];
    out << k << ',' << format_double(static_cast<double>(k) * summary.delta) << ','
        << format_double(m(static_cast<Eigen::Index>(j))) << '\n';
  }
}

EnsembleSummary<double> read_summary_csv(std::istream& in) {
  const CsvTable t = read_csv(in);
  if (t.rows.size() < 2) throw ConfigError("csv: a summary needs at least two rows");
  const std::size_t kc = t.column("k"), tc = t.column("t"), mc = t.column("mean_sq");
  EnsembleSummary<double> s;
  s.model_id = "replay";
  s.sq_norms.resize(1, static_cast<Eigen::Index>(t.rows.size()));
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const double k = t.rows[r][kc];
    if (k < 0 || k != std::floor(k) || (r > 0 && k <= static_cast<double>(s.record_steps.back())))
      throw ConfigError("csv: k must be increasing nonnegative integers");
    s.record_steps.push_back(static_cast<std::int64_t>(k));
    if (s.delta == 0.0 && k > 0) s.delta = t.rows[r][tc] / k;
    s.sq_norms(0, static_cast<Eigen::Index>(r)) = t.rows[r][mc];
  }
  s.steps = s.record_steps.back();
  return s;
}

void write_ladder_csv(std::ostream& out, const std::vector<double>& deltas, const std::vector<double>& errors) {
  out << "delta,error\n";
  for (std::size_t i = 0; i < deltas.size(); ++i) out << format_double(deltas[i]) << ',' << format_double(errors[i]) << '\n';
}

void read_ladder_csv(std::istream& in, std::vector<double>& deltas, std::vector<double>& errors) {
  const CsvTable t = read_csv(in);
  const std::size_t dc = t.column("delta"), ec = t.column("error");
  deltas.clear();
  errors.clear();
  for (const auto& row : t.rows) {
    deltas.push_back(row[dc]);
    errors.push_back(row[ec]);
  }
}

}  // namespace panto
