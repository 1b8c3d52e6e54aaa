#include "panto/cli.hpp"

#include "panto/analysis.hpp"
#include "panto/em_solver.hpp"
#include "panto/io.hpp"
#include "panto/model.hpp"
#include "panto/stability.hpp"

#include <CLI11.hpp>

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>

namespace panto::cli {

namespace {

struct Options {
  std::string model;
  std::string x0 = "1";
  double delta = 0.01;
  double horizon = 1.0;
  std::int64_t paths = 1;
  std::uint64_t seed = 0;
  int threads = 1;
  std::string out = "-";
  std::string csv;
  std::int64_t stride = 1;
  bool summary = false;

  std::string ladder = "1/32,1/64,1/128,1/256";
  double ref = 1.0 / 2048.0;
  std::string replay;

  std::string mode = "exp";
  double cbar = 0.0, alpha0 = 0.0, lambda0 = 0.0, dt = 0.0;
  std::string lambdas;
  double theta_lower = 0.0, theta_upper = 0.0, beta = 0.0;
  bool strict = false;

  double burnin = 0.2;
  double tail = 0.25;
  double tol = 0.0, tol_as = 0.1;
};

struct Flags {
  CLI::Option* cbar = nullptr;
  CLI::Option* alpha0 = nullptr;
  CLI::Option* lambda0 = nullptr;
  CLI::Option* dt = nullptr;
  CLI::Option* lambdas = nullptr;
  CLI::Option* theta_lower = nullptr;
  CLI::Option* theta_upper = nullptr;
  CLI::Option* beta = nullptr;
  CLI::Option* tol = nullptr;
  CLI::Option* cbar_rates = nullptr;
};

double parse_number(const std::string& text) {
  const auto slash = text.find('/');
  try {
    std::size_t used = 0;
    if (slash == std::string::npos) {
      const double x = std::stod(text, &used);
      if (used != text.size()) throw std::invalid_argument(text);
      return x;
    }
    const std::string num = text.substr(0, slash), den = text.substr(slash + 1);
    std::size_t un = 0, ud = 0;
    const double a = std::stod(num, &un), b = std::stod(den, &ud);
    if (un != num.size() || ud != den.size()) throw std::invalid_argument(text);
    return a / b;
  } catch (const std::exception&) {
    throw ConfigError("cannot parse number '" + text + "'");
  }
}

std::vector<double> parse_list(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto b = item.find_first_not_of(" \t"), e = item.find_last_not_of(" \t");
    if (b == std::string::npos) throw ConfigError("empty entry in list '" + text + "'");
    out.push_back(parse_number(item.substr(b, e - b + 1)));
  }
  if (out.empty()) throw ConfigError("empty list");
  return out;
}

Vector<double> initial_state(const Options& o, Eigen::Index dim) {
  const auto xs = parse_list(o.x0);
  if (xs.size() == 1) return Vector<double>::Constant(dim, xs[0]);
  if (static_cast<Eigen::Index>(xs.size()) != dim) throw ConfigError("--x0 has the wrong dimension for the model");
  return Eigen::Map<const Vector<double>>(xs.data(), dim);
}

std::int64_t step_count(double horizon, double delta) {
  try {
    return exact_ratio(horizon, delta, "T / delta");
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
}

PantographIntegralModel<double> require_model(const Options& o) {
  if (o.model.empty()) throw ConfigError("missing --model");
  return load_model(o.model);
}

void emit(const std::string& path, const std::string& text, std::ostream& out) {
  if (path == "-") {
    out << text;
    return;
  }
  std::ofstream f(path, std::ios::binary);
  if (!f) throw ConfigError("cannot write '" + path + "'");
  f << text;
}

std::string dump(const Json& j) { return j.dump(2) + "\n"; }

std::string fraction(std::string s) { return format_double(parse_number(s)); }

void add_common(CLI::App* sub, Options& o) {
  sub->add_option("--model", o.model, "builtin name, inline JSON or JSON file");
  sub->add_option("--x0", o.x0, "initial state, comma-separated (a scalar is broadcast)");
  sub->add_option("--T", o.horizon, "horizon")->transform(fraction);
  sub->add_option("--paths", o.paths, "number of paths")->check(CLI::PositiveNumber);
  sub->add_option("--seed", o.seed, "master seed (PANTO_EM_SEED overrides)");
  sub->add_option("--threads", o.threads, "worker threads")->check(CLI::PositiveNumber);
  sub->add_option("--out", o.out, "output file, '-' for stdout");
}

int cmd_simulate(const Options& o, std::ostream& out) {
  const auto model = require_model(o);
  const auto x0 = initial_state(o, model.dim());
  const auto steps = step_count(o.horizon, o.delta);
  std::ostringstream text;
  if (o.paths == 1 && !o.summary) {
    const auto grid = generate<double>(PathSeed{o.seed, 0}, model.brownian_dim(), steps, o.delta);
    auto path = simulate_path(model, x0, grid, steps);
    write_path_csv(text, path);
  } else {
    EnsembleOptions eo;
    eo.threads = o.threads;
    eo.stride = o.stride;
    write_summary_csv(text, simulate_ensemble(model, x0, o.delta, steps, o.paths, o.seed, eo));
  }
  emit(o.out, text.str(), out);
  return kOk;
}

int cmd_converge(const Options& o, std::ostream& out) {
  std::vector<double> deltas, errors;
  Json j{{"schema", kSchemaVersion}};
  std::vector<Interval> ci;
  if (!o.replay.empty()) {
    std::ifstream in(o.replay);
    if (!in) throw ConfigError("cannot open '" + o.replay + "'");
    read_ladder_csv(in, deltas, errors);
    j["replay"] = o.replay;
  } else {
    const auto model = require_model(o);
    deltas = parse_list(o.ladder);
    for (std::size_t i = 1; i < deltas.size(); ++i)
      if (!(deltas[i] < deltas[i - 1])) throw ConfigError("--ladder must be strictly decreasing");
    StrongErrorStudy study;
    try {
      study = strong_error_study(model, initial_state(o, model.dim()), deltas, o.ref, o.horizon, o.paths, o.seed,
                                 o.threads);
    } catch (const std::invalid_argument& e) {
      throw ConfigError(e.what());
    }
    errors = study.mean_errors();
    ci = study.bootstrap_intervals();
    j["model"] = model.id();
    j["T"] = o.horizon;
    j["delta_ref"] = o.ref;
    j["n_paths"] = o.paths;
    j["seed"] = o.seed;
  }

  j["deltas"] = deltas;
  Json ev = Json::array();
  for (const double e : errors) ev.push_back(json_number(e));
  j["errors"] = ev;
  if (!ci.empty()) {
    Json cj = Json::array();
    bool separated = true;
    for (std::size_t i = 0; i < ci.size(); ++i) {
      cj.push_back({ci[i].lo, ci[i].hi});
      if (i > 0 && !(ci[i].hi < ci[i - 1].lo)) separated = false;
    }
    j["ci95"] = cj;
    j["monotone_ci_separated"] = separated;
  }

  j["order"] = nullptr;
  j["order_stderr"] = nullptr;
  j["constant"] = nullptr;
  if (deltas.size() < 3) {
    j["order_defined"] = false;
    j["flag"] = "ladder has fewer than three rungs";
  } else {
    try {
      const auto fit = convergence_order(deltas, errors);
      j["order"] = json_number(fit.order);
      j["order_stderr"] = json_number(fit.order_stderr);
      j["constant"] = json_number(fit.constant);
      j["order_defined"] = true;
    } catch (const DegenerateFitError& e) {
      j["order_defined"] = false;
      j["flag"] = e.what();
    } catch (const std::invalid_argument& e) {
      throw ConfigError(e.what());
    }
  }

  if (!o.csv.empty()) {
    std::ostringstream text;
    write_ladder_csv(text, deltas, errors);
    emit(o.csv, text.str(), out);
  }
  emit(o.out, dump(j), out);
  return kOk;
}

StabilityParams stability_params(const Options& o, const Flags& f) {
  std::optional<PantographIntegralModel<double>> model;
  if (!o.model.empty()) model = load_model(o.model);

  std::array<double, 4> lambdas{};
  if (f.lambdas->count()) {
    const auto xs = parse_list(o.lambdas);
    if (xs.size() != 4) throw ConfigError("--lambdas needs four values");
    std::copy(xs.begin(), xs.end(), lambdas.begin());
  } else if (model && model->lambdas) {
    lambdas = *model->lambdas;
  } else {
    throw ConfigError("stability needs lambdas (model field 'lambdas' or --lambdas)");
  }

  double theta = 0.0;
  if (f.theta_lower->count())
    theta = o.theta_lower;
  else if (model)
    theta = model->theta_lower().value();
  else
    throw ConfigError("stability needs theta_lower (--model or --theta-lower)");

  std::optional<double> upper, beta;
  if (f.theta_upper->count())
    upper = o.theta_upper;
  else if (model)
    upper = model->theta_upper;
  if (f.beta->count())
    beta = o.beta;
  else if (model && model->coefficients().beta > 0.0)
    beta = model->coefficients().beta;
  try {
    return StabilityParams(lambdas, theta, upper, beta);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
}

int cmd_stability(const Options& o, const Flags& f, std::ostream& out) {
  const StabilityParams p = stability_params(o, f);
  StabilityReport report;
  Json inputs;
  if (o.mode == "exp") {
    const std::initializer_list<std::pair<const char*, CLI::Option*>> required{
        {"cbar", f.cbar}, {"alpha0", f.alpha0}, {"lambda0", f.lambda0}, {"dt", f.dt}};
    for (const auto& [name, opt] : required)
      if (!opt->count()) throw ConfigError(std::string("exponential mode requires --") + name);
    report = check_exponential(p, o.cbar, o.alpha0, o.lambda0, o.dt);
    inputs = {{"cbar", o.cbar}, {"alpha0", o.alpha0}, {"lambda0", o.lambda0}, {"dt", o.dt}};
  } else if (o.mode == "poly") {
    if (!p.theta_upper) throw ConfigError("polynomial mode requires theta_upper (model field or --theta-upper)");
    const double dt = f.dt->count() ? o.dt : 0.01;
    report = check_polynomial(p, dt);
    inputs = {{"dt", dt}};
  } else {
    throw ConfigError("--mode must be exp or poly");
  }
  Json j = to_json(report);
  j["inputs"] = inputs;
  emit(o.out, dump(j), out);
  return o.strict && !report.pass ? kConditionFailure : kOk;
}

Json rate_entry(const std::string& statistic, const RateEstimate& r, std::optional<double> bound) {
  Json j{{"statistic", statistic}};
  const Json body = to_json(r);
  for (const auto& [k, v] : body.items()) j[k] = v;
  j["theorem_bound"] = bound ? json_number(*bound) : Json(nullptr);
  j["pass"] = bound ? Json(r.slope <= *bound) : Json(nullptr);
  return j;
}

int cmd_rates(const Options& o, const Flags& f, std::ostream& out) {
  EnsembleSummary<double> summary;
  std::optional<PantographIntegralModel<double>> model;
  Json j{{"schema", kSchemaVersion}, {"mode", o.mode}};
  if (o.mode != "exp" && o.mode != "poly") throw ConfigError("--mode must be exp or poly");
  if (!o.replay.empty()) {
    std::ifstream in(o.replay);
    if (!in) throw ConfigError("cannot open '" + o.replay + "'");
    summary = read_summary_csv(in);
    j["replay"] = o.replay;
  } else {
    model = require_model(o);
    EnsembleOptions eo;
    eo.threads = o.threads;
    eo.stride = o.stride;
    summary = simulate_ensemble(*model, initial_state(o, model->dim()), o.delta, step_count(o.horizon, o.delta),
                                o.paths, o.seed, eo);
    j["model"] = model->id();
    j["seed"] = o.seed;
  }
  const double horizon = static_cast<double>(summary.steps) * summary.delta;
  j["delta"] = summary.delta;
  j["T"] = horizon;
  j["n_paths"] = summary.n_paths();

  Window window;
  try {
    window = default_window(horizon, o.burnin);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }

  Json rates = Json::array();
  try {
    if (o.mode == "exp") {
      std::optional<double> ms_bound, as_bound;
      if (f.cbar_rates->count()) {
        if (!(o.cbar > 0.0)) throw ConfigError("--cbar must be positive");
        const double tol = f.tol->count() ? o.tol : 0.05;
        ms_bound = -std::log(o.cbar) + tol;
        as_bound = -std::log(o.cbar) + o.tol_as;
      }
      rates.push_back(rate_entry("ms_slope", ms_rate(summary, window), ms_bound));
      rates.push_back(rate_entry("as_max_slope", as_rate(summary, window).aggregate, as_bound));
    } else {
      std::optional<double> zeta;
      if (model && model->lambdas) {
        const auto p = StabilityParams(*model->lambdas, model->theta_lower().value(), model->theta_upper);
        if (zeta_objective(0.0, p) > 0.0) zeta = solve_zeta_star(p);
      }
      const double tol = f.tol->count() ? o.tol : 0.1;
      const auto pr = poly_rate(summary, window, o.tail);
      std::optional<double> ms_bound, path_bound;
      if (zeta) {
        ms_bound = -*zeta + tol;
        path_bound = -*zeta / 2.0 + tol / 2.0;
        j["zeta_star"] = *zeta;
      }
      Json ms = rate_entry("poly_ms_tail", pr.mean_square, ms_bound);
      Json pw = rate_entry("poly_path_tail", pr.pathwise, path_bound);
      ms["tail"] = to_json(pr.tail);
      pw["tail"] = to_json(pr.tail);
      rates.push_back(ms);
      rates.push_back(pw);
    }
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  j["rates"] = rates;

  if (!o.csv.empty()) {
    std::ostringstream text;
    write_summary_csv(text, summary);
    emit(o.csv, text.str(), out);
  }
  emit(o.out, dump(j), out);
  return kOk;
}

std::string config_flag(const std::string& key) {
  std::string flag = "--" + key;
  std::replace(flag.begin(), flag.end(), '_', '-');
  return flag;
}

std::string config_value(const Json& v) {
  if (v.is_string()) return v.get<std::string>();
  if (v.is_number_integer()) return std::to_string(v.get<std::int64_t>());
  if (v.is_number_unsigned()) return std::to_string(v.get<std::uint64_t>());
  if (v.is_number()) return format_double(v.get<double>());
  if (v.is_object()) return v.dump();
  throw ConfigError("config: unsupported value " + v.dump());
}

}  // namespace

std::vector<std::string> expand_config(const std::vector<std::string>& args) {
  std::vector<std::string> rest;
  std::vector<std::string> files;
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (args[i] == "--config") {
      if (i + 1 >= args.size()) throw ConfigError("--config needs a file");
      files.push_back(args[++i]);
    } else if (args[i].rfind("--config=", 0) == 0) {
      files.push_back(args[i].substr(9));
    } else {
      rest.push_back(args[i]);
    }
  }
  if (files.empty()) return rest;

  std::vector<std::string> injected;
  for (const auto& file : files) {
    const Json j = read_json_file(file);
    if (!j.is_object()) throw ConfigError("config '" + file + "' must hold a JSON object");
    for (const auto& [key, value] : j.items()) {
      if (key == "config") throw ConfigError("config files cannot nest --config");
      if (value.is_null() || (value.is_boolean() && !value.get<bool>())) continue;
      injected.push_back(config_flag(key));
      if (value.is_boolean()) continue;
      if (value.is_array()) {
        std::string joined;
        for (const auto& e : value) joined += (joined.empty() ? "" : ",") + config_value(e);
        injected.push_back(joined);
      } else {
        injected.push_back(config_value(value));
      }
    }
  }
  // Injected after the subcommand, before the user's own flags.
  const auto at = rest.empty() ? rest.end() : rest.begin() + 1;
  rest.insert(at, injected.begin(), injected.end());
  return rest;
}

int run(const std::vector<std::string>& raw_args, std::ostream& out, std::ostream& err) {
  Options o;
  Flags f;
  CLI::App app{"Euler-Maruyama simulation and stability analysis for pantograph stochastic functional equations",
               "panto_em"};
  app.require_subcommand(1);
  app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);

  auto* sim = app.add_subcommand("simulate", "simulate one path (k,t,y) or an ensemble (k,t,mean_sq) to CSV");
  auto* conv = app.add_subcommand("converge", "strong-error ladder and fitted convergence order");
  auto* stab = app.add_subcommand("stability", "check the stability conditions");
  auto* rates = app.add_subcommand("rates", "estimate decay rates from an ensemble");
  for (auto* sub : {sim, conv, stab, rates}) sub->option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);

  add_common(sim, o);
  sim->add_option("--delta", o.delta, "step size")->transform(fraction);
  sim->add_option("--stride", o.stride, "record every n-th step")->check(CLI::PositiveNumber);
  sim->add_flag("--summary", o.summary, "write the mean-square summary even for one path");

  add_common(conv, o);
  conv->add_option("--ladder", o.ladder, "coarse steps, comma-separated, fractions allowed");
  conv->add_option("--ref", o.ref, "reference step")->transform(fraction);
  conv->add_option("--csv", o.csv, "also write the (delta, error) ladder CSV");
  conv->add_option("--replay", o.replay, "fit a (delta, error) CSV instead of simulating");

  stab->add_option("--model", o.model, "builtin name, inline JSON or JSON file");
  stab->add_option("--out", o.out, "output file, '-' for stdout");
  stab->add_option("--mode", o.mode, "exp or poly");
  f.cbar = stab->add_option("--cbar", o.cbar, "Cbar");
  f.alpha0 = stab->add_option("--alpha0", o.alpha0, "alpha0");
  f.lambda0 = stab->add_option("--lambda0", o.lambda0, "lambda0")->transform(fraction);
  f.dt = stab->add_option("--dt", o.dt, "step size to check (poly default 0.01)")->transform(fraction);
  f.lambdas = stab->add_option("--lambdas", o.lambdas, "lambda1..lambda4, comma-separated");
  f.theta_lower = stab->add_option("--theta-lower", o.theta_lower, "theta_lower");
  f.theta_upper = stab->add_option("--theta-upper", o.theta_upper, "theta_upper");
  f.beta = stab->add_option("--beta", o.beta, "beta");
  stab->add_flag("--strict", o.strict, "exit 4 when a condition fails");

  add_common(rates, o);
  rates->add_option("--delta", o.delta, "step size")->transform(fraction);
  rates->add_option("--stride", o.stride, "record every n-th step")->check(CLI::PositiveNumber);
  rates->add_option("--mode", o.mode, "exp or poly");
  f.cbar_rates = rates->add_option("--cbar", o.cbar, "Cbar for the exponential bound -ln Cbar");
  rates->add_option("--burnin", o.burnin, "burn-in fraction of the horizon");
  rates->add_option("--tail", o.tail, "tail fraction for the polynomial statistic");
  f.tol = rates->add_option("--tol", o.tol, "tolerance on the bound (exp 0.05, poly 0.1)");
  rates->add_option("--tol-as", o.tol_as, "tolerance on the pathwise exponential bound");
  rates->add_option("--csv", o.csv, "also write the (k,t,mean_sq) CSV");
  rates->add_option("--replay", o.replay, "estimate from a (k,t,mean_sq) CSV instead of simulating");

  try {
    std::vector<std::string> args = expand_config(raw_args);
    std::reverse(args.begin(), args.end());
    app.parse(args);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kConfigError;
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << "\n";
    return kConfigError;
  }

  if (const char* env = std::getenv("PANTO_EM_SEED")) {
    try {
      std::size_t used = 0;
      o.seed = std::stoull(env, &used);
      if (used != std::string(env).size()) throw std::invalid_argument(env);
    } catch (const std::exception&) {
      err << "error: PANTO_EM_SEED must be an unsigned integer\n";
      return kConfigError;
    }
  }

  try {
    if (sim->parsed()) return cmd_simulate(o, out);
    if (conv->parsed()) return cmd_converge(o, out);
    if (stab->parsed()) return cmd_stability(o, f, out);
    return cmd_rates(o, f, out);
  } catch (const DivergenceError& e) {
    err << "error: " << e.what() << "\n";
    return kDivergence;
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << "\n";
    return kConfigError;
  } catch (const std::invalid_argument& e) {
    err << "error: " << e.what() << "\n";
    return kConfigError;
  } catch (const std::domain_error& e) {
    err << "error: " << e.what() << "\n";
    return kConfigError;
  }
}

}  // namespace panto::cli
