#pragma once

#include "panto/em_solver.hpp"
#include "panto/model.hpp"
#include "panto/rng_paths.hpp"

#include <cstdint>
#include <functional>
#include <limits>
#include <stdexcept>
#include <vector>

namespace panto {

/// Any estimator input that makes a log-linear fit meaningless.
class DegenerateFitError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

struct Window {
  double t_start = 0.0;
  double t_end = 0.0;
};

/// [burn_in * T, T].
Window default_window(double horizon, double burn_in = 0.2);

struct RateEstimate {
  double slope = 0.0;
  double std_error = 0.0;
  Window window;
  std::int64_t n_paths = 0;
};

struct BootstrapOptions {
  int resamples = 200;
  std::uint64_t seed = 0xB0075u;
  double level = 0.95;
};

/// Domain tag separating resampling draws from Brownian draws.
inline constexpr std::uint64_t kBootstrapDomain = 0xB5;

/// stat(indices) for `resamples` draws of n indices with replacement.
std::vector<double> bootstrap(std::int64_t n, const BootstrapOptions& options,
                              const std::function<double(const std::vector<Eigen::Index>&)>& stat);

/// Sample standard deviation of the finite entries (0 when fewer than two).
double finite_stddev(const std::vector<double>& xs);

struct Interval {
  double lo;
  double hi;
};

/// Equal-tailed percentile interval at `level`.
Interval percentile_interval(std::vector<double> xs, double level);

struct LineFit {
  double slope;
  double intercept;
  double slope_stderr;
  std::int64_t n;
};

/// Ordinary least squares y = intercept + slope x. Needs two distinct x.
LineFit fit_line(const std::vector<double>& x, const std::vector<double>& y);

/// steps = num / den when the ratio is a positive integer (relative 1e-9).
std::int64_t exact_ratio(double num, double den, const char* what);

// Strong error ---------------------------------------------------------------

/// sup over the fine grid of |Y^coarse - Y^fine|^2 where the coarse run uses
/// coarsen(fine_grid, factor). The fine grid is the only noise input.
double coupled_sup_error(const PsfdeModel<double>& model, const Vector<double>& x0,
                         const BrownianGrid<double>& fine_grid, std::int64_t factor);

struct StrongErrorStudy {
  std::vector<double> deltas;
  double delta_ref = 0.0;
  double horizon = 0.0;
  std::uint64_t master_seed = 0;
  /// n_paths x deltas.size(), per-path sup squared errors.
  Matrix<double> samples;

  std::vector<double> mean_errors() const;
  /// Percentile intervals of each rung mean from shared path resamples.
  std::vector<Interval> bootstrap_intervals(const BootstrapOptions& options = {}) const;
};

/// All rungs share one reference grid per path, generated at delta_ref.
StrongErrorStudy strong_error_study(const PsfdeModel<double>& model, const Vector<double>& x0,
                                    const std::vector<double>& deltas, double delta_ref, double horizon,
                                    std::int64_t n_paths, std::uint64_t master_seed, int threads = 1);

/// Monte Carlo mean of coupled_sup_error over PathSeed{master_seed, i}.
double strong_error(const PsfdeModel<double>& model, const Vector<double>& x0, double delta_coarse, double delta_ref,
                    double horizon, std::int64_t n_paths, std::uint64_t master_seed, int threads = 1);

struct ErrorFit {
  std::vector<double> deltas;
  std::vector<double> errors;
  double order = 0.0;
  double constant = 0.0;
  double order_stderr = 0.0;
};

/// Fit of log error against log delta. Needs at least three strictly
/// decreasing deltas and positive errors.
ErrorFit convergence_order(const std::vector<double>& deltas, const std::vector<double>& errors);

// Rates -------------------------------------------------------------------------

/// Slope of log(mean_i |y_i(k)|^2) against k delta over the window, with a
/// path-bootstrap standard error. Zero mean square in the window gives -inf.
RateEstimate ms_rate(const EnsembleSummary<double>& summary, const Window& window, const BootstrapOptions& options = {});

/// Slope of log |y(k)|^2 against time for a single series.
double path_rate(const std::vector<double>& times, const std::vector<double>& sq_norms, const Window& window);

struct AsRate {
  /// Ensemble maximum of the per-path slopes.
  RateEstimate aggregate;
  std::vector<double> per_path;
};

AsRate as_rate(const EnsembleSummary<double>& summary, const Window& window, const BootstrapOptions& options = {});
RateEstimate as_rate(const DiscretePath<double>& path, const Window& window);

struct PolyRate {
  /// max over paths of sup over the tail of log|y(k)| / log((k+1) delta).
  RateEstimate pathwise;
  /// sup over the tail of log E|y(k)|^2 / log((k+1) delta).
  RateEstimate mean_square;
  Window tail;
};

/// Records with (k+1) delta <= 1 are dropped; the tail is the final
/// tail_fraction of what remains of the window.
PolyRate poly_rate(const EnsembleSummary<double>& summary, const Window& window, double tail_fraction = 0.25,
                   const BootstrapOptions& options = {});

// Continuous interpolant ------------------------------------------------------------

struct InterpolantStudy {
  std::vector<double> deltas;
  std::int64_t refine = 0;
  /// sup_t |Y(t) - z(t)|^2 per path and rung.
  Matrix<double> gap_sq;
  /// sup_t |Y(t)|^2 per path and rung.
  Matrix<double> sup_sq;

  std::vector<double> mean_gap() const;
  std::vector<double> mean_sup() const;
};

/// Each rung samples Y on a grid of `refine` points per step; all rungs are
/// driven by one Brownian path per seed.
InterpolantStudy interpolant_study(const PsfdeModel<double>& model, const Vector<double>& x0,
                                   const std::vector<double>& deltas, double horizon, std::int64_t refine,
                                   std::int64_t n_paths, std::uint64_t master_seed, int threads = 1);

}  // namespace panto
