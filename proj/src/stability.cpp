#include "panto/stability.hpp"

#include <algorithm>
#include <limits>

namespace panto {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

void require_lambdas(const std::array<double, 4>& l) {
  if (!(l[0] > 0.0)) throw std::invalid_argument("StabilityParams: lambda1 must be positive");
  for (int i = 1; i < 4; ++i)
    if (!(l[i] >= 0.0)) throw std::invalid_argument("StabilityParams: lambda" + std::to_string(i + 1) + " must be nonnegative");
}

double require_theta_upper(const StabilityParams& p) {
  if (!p.theta_upper) throw std::invalid_argument("polynomial mode requires theta_upper");
  return *p.theta_upper;
}

}  // namespace

StabilityParams::StabilityParams(std::array<double, 4> lambdas, double theta, std::optional<double> upper,
                                 std::optional<double> b)
    : lambda(lambdas), theta_lower(theta), theta_upper(upper), beta(b) {
  require_lambdas(lambda);
}

StabilityParams StabilityParams::from_model(const PantographIntegralModel<double>& model) {
  if (!model.lambdas) throw std::invalid_argument("model has no lambdas");
  std::optional<double> beta;
  if (model.coefficients().beta > 0.0) beta = model.coefficients().beta;
  return StabilityParams(*model.lambdas, model.theta_lower().value(), model.theta_upper, beta);
}

double h_exp(double c, double dt, const StabilityParams& p, double alpha0) {
  if (!(c > 1.0)) throw std::invalid_argument("h_exp: C must exceed 1");
  if (!(dt >= 0.0)) throw std::invalid_argument("h_exp: dt must be nonnegative");
  const double f = p.floor_factor();
  const double growth = std::pow(c, dt / p.theta_lower.value());
  return -p.l1() + alpha0 + 2.0 * p.l2() * f * growth + p.l3() * dt + 2.0 * p.l4() * f * growth * dt;
}

double cond_ii_exp(double c, double dt, const StabilityParams& p) {
  if (!(c > 1.0)) throw std::invalid_argument("cond_ii_exp: C must exceed 1");
  if (!(dt >= 0.0)) throw std::invalid_argument("cond_ii_exp: dt must be nonnegative");
  const double f = p.floor_factor();
  const double growth = std::pow(c, dt / p.theta_lower.value());
  return (p.l2() * f * growth + p.l4() * f * growth * dt) * std::pow(c, dt) * dt;
}

double h_poly(double gamma, double dt, const StabilityParams& p) {
  const double f = p.floor_factor();
  const double growth = std::pow(p.theta_lower.value(), -gamma);
  return -p.l1() + gamma + 2.0 * p.l2() * f * growth + p.l3() * dt + 2.0 * p.l4() * f * growth * dt;
}

double zeta_objective(double zeta, const StabilityParams& p) {
  return p.l1() - zeta - 2.0 * p.l2() * p.floor_factor() * std::pow(p.theta_lower.value(), -zeta);
}

double solve_zeta_star(const StabilityParams& p) {
  if (!(zeta_objective(0.0, p) > 0.0)) throw NoRootError("solve_zeta_star: condition l1 - 2 l2 F > 0 fails");
  return bisect_root([&](double z) { return zeta_objective(z, p); }, 0.0, p.l1());
}

double solve_gamma_star(double dt, const StabilityParams& p) {
  if (!(dt > 0.0)) throw std::invalid_argument("solve_gamma_star: dt must be positive");
  const double delta0 = (1.0 - require_theta_upper(p)) / *p.theta_upper;
  const double f = p.floor_factor();
  const double delta1 = (p.l1() - p.l2() * f) / (p.l3() + p.l4() * f);
  if (!(dt < delta0 && dt < delta1)) throw NoRootError("solve_gamma_star: dt must lie below min(delta0, delta1)");
  if (!(h_poly(0.0, dt, p) < 0.0)) throw NoRootError("solve_gamma_star: H(0, dt) is not negative");
  // H(l1, dt) = positive terms only, so [0, l1] brackets the root.
  return bisect_root([&](double g) { return h_poly(g, dt, p); }, 0.0, p.l1());
}

double PolyDeltaBounds::cond3_lhs(double dt) const {
  const double growth = std::pow(theta, -zeta - 1.0);
  return (l2f * growth + l4f * growth * dt) * dt;
}

double PolyDeltaBounds::admissible_sup() const { return std::min({delta0, delta1, delta_h0, delta3}); }

PolyDeltaBounds delta_bounds_poly(const StabilityParams& p, double zeta) {
  const double upper = require_theta_upper(p);
  const double f = p.floor_factor();
  PolyDeltaBounds b{};
  b.delta0 = (1.0 - upper) / upper;
  b.delta1 = (p.l1() - p.l2() * f) / (p.l3() + p.l4() * f);
  b.delta_h0 = (p.l1() - 2.0 * p.l2() * f) / (p.l3() + 2.0 * p.l4() * f);
  b.zeta = zeta;
  b.l2f = p.l2() * f;
  b.l4f = p.l4() * f;
  b.theta = p.theta_lower.value();
  // A dt + B dt^2 = 1/2.
  const double growth = std::pow(b.theta, -zeta - 1.0);
  const double a = b.l2f * growth, q = b.l4f * growth;
  if (q > 0.0)
    b.delta3 = (-a + std::sqrt(a * a + 2.0 * q)) / (2.0 * q);
  else if (a > 0.0)
    b.delta3 = 0.5 / a;
  else
    b.delta3 = std::numeric_limits<double>::infinity();
  return b;
}

StabilityReport check_exponential(const StabilityParams& p, double cbar, double alpha0, double lambda0, double dt) {
  StabilityReport r;
  r.mode = StabilityMode::exponential;
  const double cap = std::exp(alpha0);
  const bool cbar_ok = cbar > 1.0 && cbar <= cap;
  r.conditions.push_back({"cbar_range", cbar, cap, "in (1, bound]", cbar_ok});
  const bool lambda0_ok = lambda0 > 0.0;
  const bool dt_ok = lambda0_ok && dt > 0.0 && dt < lambda0;
  r.conditions.push_back({"dt_range", dt, lambda0, "in (0, bound)", dt_ok});

  const double h = cbar > 1.0 && lambda0_ok ? h_exp(cbar, lambda0, p, alpha0) : kNaN;
  r.conditions.push_back({"condition_i", h, 0.0, "<=", h <= 0.0});
  const double ii = cbar > 1.0 && dt >= 0.0 ? cond_ii_exp(cbar, dt, p) : kNaN;
  r.conditions.push_back({"condition_ii", ii, 0.5, "<=", ii <= 0.5});

  if (p.beta) {
    const double lo = 1.0 - p.theta_lower.value();
    r.conditions.push_back({"beta_range", *p.beta, lo, "in (bound, 1)", *p.beta > lo && *p.beta < 1.0});
  }

  r.pass = std::all_of(r.conditions.begin(), r.conditions.end(), [](const Condition& c) { return c.pass; });
  r.rate = cbar > 0.0 ? std::log(cbar) : kNaN;
  r.rate_per_step = r.rate * dt;

  r.delta_bounds["lambda0"] = lambda0;
  if (cbar > 1.0 && lambda0_ok) {
    // cond_ii_exp is increasing in dt; its 1/2 level set caps admissible steps.
    double dmax = lambda0;
    if (cond_ii_exp(cbar, lambda0, p) > 0.5)
      dmax = bisect_root([&](double s) { return cond_ii_exp(cbar, s, p) - 0.5; }, 0.0, lambda0);
    r.delta_bounds["delta_max"] = dmax;
  }
  return r;
}

StabilityReport check_polynomial(const StabilityParams& p, double dt) {
  const double upper = require_theta_upper(p);
  StabilityReport r;
  r.mode = StabilityMode::polynomial;
  const double lower_cap = std::max(0.5, p.theta_lower.value());
  r.conditions.push_back({"theta_upper_range", upper, lower_cap, "in (bound, 1)", upper > lower_cap && upper < 1.0});

  const double c1 = zeta_objective(0.0, p);
  r.conditions.push_back({"condition_1", c1, 0.0, ">", c1 > 0.0});

  if (c1 > 0.0) {
    const double zeta = solve_zeta_star(p);
    const double residual = std::abs(zeta_objective(zeta, p));
    r.conditions.push_back({"condition_2", residual, 1e-12, "<", residual < 1e-12});
    r.rate = zeta;

    const PolyDeltaBounds b = delta_bounds_poly(p, zeta);
    const double c3 = b.cond3_lhs(dt);
    r.conditions.push_back({"condition_3", c3, 0.5, "<", c3 < 0.5});
    const double cap = std::min(b.delta0, b.delta1);
    r.conditions.push_back({"dt_below_delta0_delta1", dt, cap, "in (0, bound)", dt > 0.0 && dt < cap});
    const double h0 = h_poly(0.0, dt, p);
    r.conditions.push_back({"h_poly_at_zero", h0, 0.0, "<", h0 < 0.0});
    if (dt > 0.0 && dt < cap && h0 < 0.0) r.gamma_star = solve_gamma_star(dt, p);

    r.delta_bounds["delta0"] = b.delta0;
    r.delta_bounds["delta1"] = b.delta1;
    r.delta_bounds["delta_h0"] = b.delta_h0;
    r.delta_bounds["delta3"] = b.delta3;
    r.delta_bounds["delta_max"] = b.admissible_sup();
  } else {
    r.conditions.push_back({"condition_2", kNaN, 1e-12, "<", false});
    r.rate = kNaN;
  }

  r.pass = std::all_of(r.conditions.begin(), r.conditions.end(), [](const Condition& c) { return c.pass; });
  return r;
}

std::string to_string(StabilityMode mode) { return mode == StabilityMode::exponential ? "exp" : "poly"; }

}  // namespace panto
