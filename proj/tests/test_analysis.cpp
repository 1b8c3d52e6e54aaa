#include "panto/analysis.hpp"
#include "panto/stability.hpp"

#include <doctest.h>

#include <cmath>

using namespace panto;

namespace {

Vector<double> scalar(double v) { return Vector<double>::Constant(1, v); }

EnsembleSummary<double> synthetic(double delta, std::int64_t steps, std::int64_t paths,
                                  const std::function<double(std::int64_t, std::int64_t)>& sq) {
  EnsembleSummary<double> s;
  s.delta = delta;
  s.steps = steps;
  s.record_steps = record_schedule(steps, 1);
  s.sq_norms.resize(paths, steps + 1);
  for (std::int64_t i = 0; i < paths; ++i)
    for (std::int64_t k = 0; k <= steps; ++k) s.sq_norms(i, k) = sq(i, k);
  return s;
}

}  // namespace

TEST_CASE("line fit recovers exact lines") {
  const auto f = fit_line({0, 1, 2, 3}, {1, 3, 5, 7});
  CHECK(f.slope == doctest::Approx(2.0).epsilon(1e-14));
  CHECK(f.intercept == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(f.slope_stderr == doctest::Approx(0.0));
  CHECK_THROWS_AS(fit_line({1, 1}, {0, 1}), DegenerateFitError);
}

TEST_CASE("convergence order on synthetic ladders") {
  const double c = 0.37;
  const auto fit = convergence_order({0.1, 0.05, 0.025}, {c * 0.1, c * 0.05, c * 0.025});
  CHECK(std::abs(fit.order - 1.0) < 1e-9);
  CHECK(fit.constant == doctest::Approx(c).epsilon(1e-9));
  CHECK(std::abs(convergence_order({0.1, 0.05, 0.025, 0.0125}, {2, 2, 2, 2}).order) < 1e-12);
  CHECK_THROWS_AS(convergence_order({0.1, 0.05}, {1, 1}), std::invalid_argument);
  CHECK_THROWS_AS(convergence_order({0.1, 0.2, 0.05}, {1, 1, 1}), std::invalid_argument);
  CHECK_THROWS_AS(convergence_order({0.1, 0.05, 0.025}, {1, 0, 1}), DegenerateFitError);
}

TEST_CASE("strong error: identical steps give zero") {
  const auto m = make_linear_model();
  CHECK(strong_error(m, scalar(1.0), 1.0 / 64, 1.0 / 64, 1.0, 20, 3) == 0.0);
}

TEST_CASE("strong error: zero model gives zero for any pair") {
  const auto m = make_zero_model();
  CHECK(strong_error(m, scalar(1.0), 1.0 / 8, 1.0 / 64, 1.0, 10, 3) == 0.0);
  const auto fine = generate<double>(PathSeed{1, 0}, 1, 64, 1.0 / 64);
  CHECK(coupled_sup_error(m, scalar(1.0), fine, 8) == 0.0);
}

TEST_CASE("strong error: invalid ratios") {
  const auto m = make_linear_model();
  CHECK_THROWS_AS(strong_error(m, scalar(1.0), 0.03, 1.0 / 64, 1.0, 4, 1), std::invalid_argument);
  CHECK_THROWS_AS(strong_error(m, scalar(1.0), 1.0 / 8, 1.0 / 64, 1.1, 4, 1), std::invalid_argument);
  const auto fine = generate<double>(PathSeed{1, 0}, 1, 60, 0.01);
  CHECK_THROWS_AS(coupled_sup_error(m, scalar(1.0), fine, 7), std::invalid_argument);
}

TEST_CASE("strong error study agrees with single-rung calls and across threads") {
  const auto m = make_linear_model();
  const auto study = strong_error_study(m, scalar(1.0), {1.0 / 16, 1.0 / 32}, 1.0 / 256, 1.0, 30, 9, 1);
  const auto par = strong_error_study(m, scalar(1.0), {1.0 / 16, 1.0 / 32}, 1.0 / 256, 1.0, 30, 9, 4);
  CHECK(study.samples == par.samples);
  CHECK(study.mean_errors()[1] == strong_error(m, scalar(1.0), 1.0 / 32, 1.0 / 256, 1.0, 30, 9));
  const auto fine = generate<double>(PathSeed{9, 0}, 1, 256, 1.0 / 256);
  CHECK(study.samples(0, 0) == coupled_sup_error(m, scalar(1.0), fine, 16));
}

TEST_CASE("strong error decreases under refinement for the linear model") {
  const auto m = make_linear_model();
  const auto study = strong_error_study(m, scalar(1.0), {1.0 / 32, 1.0 / 64}, 1.0 / 512, 1.0, 2000, 2024);
  const auto e = study.mean_errors();
  const auto ci = study.bootstrap_intervals();
  CHECK(e[1] < e[0]);
  CHECK(ci[1].hi < ci[0].lo);
}

TEST_CASE("ms_rate on synthetic inputs") {
  const double dt = 0.01;
  const auto flat = synthetic(dt, 1000, 3, [](auto, auto) { return 1.0; });
  CHECK(std::abs(ms_rate(flat, default_window(10.0)).slope) < 1e-12);
  const auto decay = synthetic(dt, 1000, 3, [&](auto, std::int64_t k) { return std::exp(-1.0 * k * dt); });
  const auto r = ms_rate(decay, default_window(10.0));
  CHECK(std::abs(r.slope + 1.0) < 1e-9);
  CHECK(r.n_paths == 3);
  CHECK(r.window.t_start == doctest::Approx(2.0));
  const auto zero = synthetic(dt, 100, 2, [](auto, std::int64_t k) { return k > 50 ? 0.0 : 1.0; });
  CHECK(ms_rate(zero, default_window(1.0)).slope == -std::numeric_limits<double>::infinity());
  CHECK_THROWS_AS(ms_rate(flat, Window{0.0, 20.0}), std::invalid_argument);
}

TEST_CASE("as_rate on synthetic inputs") {
  const double dt = 0.01;
  const auto decay = synthetic(dt, 1000, 4, [&](std::int64_t i, std::int64_t k) { return std::exp(-(1.0 + i) * k * dt); });
  const auto r = as_rate(decay, default_window(10.0));
  CHECK(std::abs(r.aggregate.slope + 1.0) < 1e-9);
  CHECK(r.per_path.size() == 4);
  CHECK(std::abs(r.per_path[3] + 4.0) < 1e-9);
  const auto zero = synthetic(dt, 100, 2, [](std::int64_t i, std::int64_t k) { return i == 1 && k > 50 ? 0.0 : 1.0; });
  const auto rz = as_rate(zero, default_window(1.0));
  CHECK(rz.per_path[1] == -std::numeric_limits<double>::infinity());
  CHECK(std::abs(rz.aggregate.slope) < 1e-12);

  DiscretePath<double> p;
  p.delta = dt;
  p.states.resize(1, 1001);
  for (int k = 0; k <= 1000; ++k) p.states(0, k) = std::exp(-0.5 * k * dt);
  CHECK(std::abs(as_rate(p, default_window(10.0)).slope + 1.0) < 1e-9);
}

TEST_CASE("poly_rate on synthetic inputs") {
  const double dt = 0.01;
  const auto power = synthetic(dt, 20000, 2, [&](auto, std::int64_t k) {
    const double t = (k + 1) * dt;
    return 1.0 / (t * t);
  });
  const auto r = poly_rate(power, default_window(200.0));
  CHECK(std::abs(r.pathwise.slope + 1.0) < 1e-12);
  CHECK(std::abs(r.mean_square.slope + 2.0) < 1e-12);
  CHECK(r.tail.t_start == doctest::Approx(160.0).epsilon(1e-3));
  const auto flat = synthetic(dt, 20000, 2, [](auto, auto) { return 1.0; });
  CHECK(poly_rate(flat, default_window(200.0)).pathwise.slope == 0.0);
  const auto short_run = synthetic(dt, 50, 2, [](auto, auto) { return 1.0; });
  CHECK_THROWS_AS(poly_rate(short_run, default_window(0.5)), std::invalid_argument);
}

TEST_CASE("window extension changes a converged slope by less than its stderr") {
  // No delay term: E|y(k)|^2 = ((1 + a dt)^2 + c^2 dt)^k exactly.
  const PantographIntegralModel<double> gbm(1, 0.75, {-1.0, 0.0, 0.5, 0.0, false}, MeasureSpec::dirac(1.0));
  const auto s = simulate_ensemble(gbm, scalar(1.0), 0.01, 2000, 400, 31, EnsembleOptions{1, 5, true});
  const auto a = ms_rate(s, Window{4.0, 16.0});
  const auto b = ms_rate(s, Window{4.0, 20.0});
  CHECK(std::abs(a.slope - b.slope) < std::max(a.std_error, b.std_error));
}

TEST_CASE("bootstrap is seeded and deterministic") {
  auto stat = [](const std::vector<Eigen::Index>& idx) { return static_cast<double>(idx[0]); };
  CHECK(bootstrap(50, {}, stat) == bootstrap(50, {}, stat));
  BootstrapOptions other;
  other.seed = 99;
  CHECK(bootstrap(50, {}, stat) != bootstrap(50, other, stat));
  const auto ci = percentile_interval({1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11}, 0.8);
  CHECK(ci.lo == doctest::Approx(2.0));
  CHECK(ci.hi == doctest::Approx(10.0));
}

TEST_CASE("interpolant study: moments stay bounded over delta") {
  const auto m = make_example_41();
  const auto s = interpolant_study(m, scalar(1.0), {0.02, 0.01, 0.005}, 1.0, 8, 400, 12);
  const auto sup = s.mean_sup();
  for (const double v : sup) CHECK(v == doctest::Approx(sup[0]).epsilon(0.1));
  const auto gap = s.mean_gap();
  CHECK(gap[0] > gap[1]);
  CHECK(gap[1] > gap[2]);
}

TEST_CASE("interpolant study: zero noise gap is the drift term") {
  const auto m = make_decay_model();
  const auto s = interpolant_study(m, scalar(1.0), {0.1}, 1.0, 4, 2, 1);
  // sup_t |Y - z| is reached just before the first knot: 0.5 * 0.75 * 0.1.
  CHECK(s.gap_sq(0, 0) == doctest::Approx(std::pow(0.5 * 0.075, 2)).epsilon(1e-12));
}
