#pragma once

#include "panto/model.hpp"
#include "panto/segment.hpp"

#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace panto {

/// Constants of the monotonicity/Lipschitz hypotheses.
///
/// lambda[0..3] are lambda_1..lambda_4; theta_upper is needed for the
/// polynomial analysis, beta for the exponential one.
struct StabilityParams {
  std::array<double, 4> lambda{};
  ThetaLower theta_lower{0.5};
  std::optional<double> theta_upper;
  std::optional<double> beta;

  StabilityParams() = default;
  StabilityParams(std::array<double, 4> lambdas, double theta_lower, std::optional<double> theta_upper = std::nullopt,
                  std::optional<double> beta = std::nullopt);

  /// Lambdas, theta_upper and beta carried by a model instance. Throws
  /// std::invalid_argument naming the field when lambdas are absent.
  static StabilityParams from_model(const PantographIntegralModel<double>& model);

  double l1() const { return lambda[0]; }
  double l2() const { return lambda[1]; }
  double l3() const { return lambda[2]; }
  double l4() const { return lambda[3]; }
  /// floor(1 / theta_lower) + 1.
  double floor_factor() const { return static_cast<double>(theta_lower.floor_factor()); }
};

/// Thrown when a monotone root problem has no sign change.
class NoRootError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Root of a strictly monotone f on [lo, hi] with sign(f(lo)) != sign(f(hi)),
/// stopping when the bracket is narrower than tol or after max_iter halvings.
template <typename Fn>
double bisect_root(Fn&& f, double lo, double hi, double tol = 1e-14, int max_iter = 200) {
  double flo = f(lo);
  const double fhi = f(hi);
  if (flo == 0.0) return lo;
  if (fhi == 0.0) return hi;
  if ((flo < 0.0) == (fhi < 0.0)) throw NoRootError("bisect_root: no sign change on the bracket");
  for (int it = 0; it < max_iter && hi - lo > tol; ++it) {
    const double mid = 0.5 * (lo + hi);
    const double fm = f(mid);
    if (fm == 0.0) return mid;
    if ((fm < 0.0) == (flo < 0.0)) {
      lo = mid;
      flo = fm;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

// Exponential-stability functions ----------------------------------------

/// H(C, dt) = -l1 + alpha0 + 2 l2 F C^{dt/theta} + l3 dt + 2 l4 F C^{dt/theta} dt,
/// F = floor(1/theta) + 1. Requires C > 1 and dt >= 0.
double h_exp(double c, double dt, const StabilityParams& p, double alpha0);

/// [l2 F C^{dt/theta} + l4 F C^{dt/theta} dt] C^{dt} dt; admissible when <= 1/2.
double cond_ii_exp(double c, double dt, const StabilityParams& p);

// Polynomial-stability functions -----------------------------------------

/// H(gamma, dt) = -l1 + gamma + 2 l2 F theta^{-gamma} + l3 dt + 2 l4 F theta^{-gamma} dt.
double h_poly(double gamma, double dt, const StabilityParams& p);

/// l1 - zeta - 2 l2 F theta^{-zeta}, strictly decreasing in zeta.
double zeta_objective(double zeta, const StabilityParams& p);

/// Unique positive root of l1 - zeta = 2 l2 F theta^{-zeta}, by bisection on
/// [0, l1]. Throws NoRootError unless l1 - 2 l2 F > 0.
double solve_zeta_star(const StabilityParams& p);

/// Root gamma of h_poly(., dt). Requires dt < delta0 and dt < delta1 and
/// h_poly(0, dt) < 0; throws NoRootError otherwise.
double solve_gamma_star(double dt, const StabilityParams& p);

struct PolyDeltaBounds {
  /// (1 - theta_upper) / theta_upper.
  double delta0;
  /// (l1 - l2 F) / (l3 + l4 F).
  double delta1;
  /// (l1 - 2 l2 F) / (l3 + 2 l4 F): the largest dt with h_poly(0, dt) < 0.
  double delta_h0;
  /// Largest dt with condition 3 LHS < 1/2 (exclusive).
  double delta3;
  double zeta;
  double l2f;
  double l4f;
  double theta;

  /// [l2 F theta^{-zeta-1} + l4 F theta^{-zeta-1} dt] dt.
  double cond3_lhs(double dt) const;
  bool cond3_ok(double dt) const { return cond3_lhs(dt) < 0.5; }
  /// min(delta0, delta1, delta_h0, delta3).
  double admissible_sup() const;
};

PolyDeltaBounds delta_bounds_poly(const StabilityParams& p, double zeta);

// Reports ------------------------------------------------------------------

enum class StabilityMode { exponential, polynomial };

struct Condition {
  std::string name;
  double lhs;
  double bound;
  /// One of "<", "<=", ">", "in (1, bound]", "in (0, bound)", "in (a, 1)".
  std::string relation;
  bool pass;
};

struct StabilityReport {
  StabilityMode mode = StabilityMode::exponential;
  std::vector<Condition> conditions;
  /// alpha = ln(Cbar) per unit time (exponential), zeta* (polynomial).
  double rate = 0.0;
  /// Exponential mode: alpha * dt, the decay per step.
  std::optional<double> rate_per_step;
  /// Polynomial mode: gamma*_dt when it exists.
  std::optional<double> gamma_star;
  std::map<std::string, double> delta_bounds;
  bool pass = false;
};

/// Conditions i) and ii) with Cbar, alpha0, lambda0 and the step dt.
/// Violated ranges become failed conditions, never exceptions.
StabilityReport check_exponential(const StabilityParams& p, double cbar, double alpha0, double lambda0, double dt);

/// Conditions 1-3 at step dt. Throws std::invalid_argument if theta_upper is
/// missing (message names "theta_upper").
StabilityReport check_polynomial(const StabilityParams& p, double dt);

std::string to_string(StabilityMode mode);

}  // namespace panto
