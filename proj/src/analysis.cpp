#include "panto/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

namespace panto {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

bool in_window(double t, const Window& w) {
  const double eps = 1e-9 * std::max(1.0, std::abs(w.t_end));
  return t >= w.t_start - eps && t <= w.t_end + eps;
}

void check_window(const Window& w, double horizon) {
  const double eps = 1e-9 * std::max(1.0, horizon);
  if (!(w.t_start >= -eps && w.t_end <= horizon + eps && w.t_start < w.t_end))
    throw std::invalid_argument("window must satisfy 0 <= t_start < t_end <= horizon");
}

std::vector<Eigen::Index> window_columns(const EnsembleSummary<double>& s, const Window& w) {
  check_window(w, static_cast<double>(s.steps) * s.delta);
  std::vector<Eigen::Index> cols;
  const auto times = s.times();
  for (std::size_t j = 0; j < times.size(); ++j)
    if (in_window(times[j], w)) cols.push_back(static_cast<Eigen::Index>(j));
  if (cols.size() < 2) throw std::invalid_argument("window holds fewer than two recorded steps");
  return cols;
}

// Mean over the listed rows, -inf slope on any zero.
double log_mean_slope(const EnsembleSummary<double>& s, const std::vector<Eigen::Index>& cols,
                      const std::vector<Eigen::Index>* rows) {
  std::vector<double> x, y;
  x.reserve(cols.size());
  y.reserve(cols.size());
  for (const auto j : cols) {
    double m = 0.0;
    if (rows) {
      for (const auto i : *rows) m += s.sq_norms(i, j);
      m /= static_cast<double>(rows->size());
    } else {
      m = s.sq_norms.col(j).mean();
    }
    if (!(m > 0.0)) return kNegInf;
    x.push_back(static_cast<double>(s.record_steps[static_cast<std::size_t>(j)]) * s.delta);
    y.push_back(std::log(m));
  }
  return fit_line(x, y).slope;
}

}  // namespace

Window default_window(double horizon, double burn_in) {
  if (!(horizon > 0.0)) throw std::invalid_argument("default_window: horizon must be positive");
  if (!(burn_in >= 0.0 && burn_in < 1.0)) throw std::invalid_argument("default_window: burn-in must lie in [0, 1)");
  return {burn_in * horizon, horizon};
}

std::vector<double> bootstrap(std::int64_t n, const BootstrapOptions& options,
                              const std::function<double(const std::vector<Eigen::Index>&)>& stat) {
  if (n < 1) throw std::invalid_argument("bootstrap: need at least one sample");
  if (options.resamples < 1) throw std::invalid_argument("bootstrap: resamples must be positive");
  NormalStream stream(PathSeed{options.seed, 0}, kBootstrapDomain);
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(options.resamples));
  std::vector<Eigen::Index> idx(static_cast<std::size_t>(n));
  for (int r = 0; r < options.resamples; ++r) {
    for (auto& i : idx) i = static_cast<Eigen::Index>(stream.next_below(static_cast<std::uint64_t>(n)));
    out.push_back(stat(idx));
  }
  return out;
}

double finite_stddev(const std::vector<double>& xs) {
  double sum = 0.0, sq = 0.0;
  std::int64_t n = 0;
  for (const double x : xs) {
    if (!std::isfinite(x)) continue;
    sum += x;
    ++n;
  }
  if (n < 2) return 0.0;
  const double mean = sum / static_cast<double>(n);
  for (const double x : xs)
    if (std::isfinite(x)) sq += (x - mean) * (x - mean);
  return std::sqrt(sq / static_cast<double>(n - 1));
}

Interval percentile_interval(std::vector<double> xs, double level) {
  if (xs.empty()) throw std::invalid_argument("percentile_interval: empty sample");
  if (!(level > 0.0 && level < 1.0)) throw std::invalid_argument("percentile_interval: level must lie in (0, 1)");
  std::sort(xs.begin(), xs.end());
  auto quantile = [&](double q) {
    const double pos = q * static_cast<double>(xs.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, xs.size() - 1);
    const double w = pos - static_cast<double>(lo);
    return w == 0.0 ? xs[lo] : (1.0 - w) * xs[lo] + w * xs[hi];
  };
  const double tail = 0.5 * (1.0 - level);
  return {quantile(tail), quantile(1.0 - tail)};
}

LineFit fit_line(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size()) throw std::invalid_argument("fit_line: size mismatch");
  const auto n = static_cast<std::int64_t>(x.size());
  if (n < 2) throw DegenerateFitError("fit_line: need at least two points");
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(n);
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / static_cast<double>(n);
  double sxx = 0.0, sxy = 0.0;
  for (std::int64_t i = 0; i < n; ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  if (!(sxx > 0.0)) throw DegenerateFitError("fit_line: abscissae are all equal");
  LineFit fit{sxy / sxx, 0.0, 0.0, n};
  fit.intercept = my - fit.slope * mx;
  if (n > 2) {
    double ssr = 0.0;
    for (std::int64_t i = 0; i < n; ++i) {
      const double r = y[i] - fit.intercept - fit.slope * x[i];
      ssr += r * r;
    }
    fit.slope_stderr = std::sqrt(ssr / static_cast<double>(n - 2) / sxx);
  }
  return fit;
}

std::int64_t exact_ratio(double num, double den, const char* what) {
  if (!(num > 0.0 && den > 0.0)) throw std::invalid_argument(std::string(what) + ": values must be positive");
  const double r = num / den;
  const auto n = std::llround(r);
  if (n < 1 || std::abs(r - static_cast<double>(n)) > 1e-9 * static_cast<double>(n))
    throw std::invalid_argument(std::string(what) + ": ratio " + std::to_string(r) + " is not a positive integer");
  return n;
}

double coupled_sup_error(const PsfdeModel<double>& model, const Vector<double>& x0,
                         const BrownianGrid<double>& fine_grid, std::int64_t factor) {
  const std::int64_t fine_steps = fine_grid.steps();
  if (factor < 1 || fine_steps % factor != 0)
    throw std::invalid_argument("coupled_sup_error: factor must divide the fine step count");
  const auto reference = simulate_path(model, x0, fine_grid, fine_steps);
  const auto coarse = simulate_path(model, x0, coarsen(fine_grid, factor), fine_steps / factor);
  const auto y = interpolate_path(coarse, model, fine_grid, factor);
  return (y.values - reference.states).colwise().squaredNorm().maxCoeff();
}

std::vector<double> StrongErrorStudy::mean_errors() const {
  std::vector<double> out;
  for (Eigen::Index j = 0; j < samples.cols(); ++j) out.push_back(samples.col(j).mean());
  return out;
}

std::vector<Interval> StrongErrorStudy::bootstrap_intervals(const BootstrapOptions& options) const {
  const Eigen::Index rungs = samples.cols();
  std::vector<std::vector<double>> draws(static_cast<std::size_t>(rungs));
  // One resample set drives every rung so the intervals are paired.
  bootstrap(samples.rows(), options, [&](const std::vector<Eigen::Index>& idx) {
    for (Eigen::Index j = 0; j < rungs; ++j) {
      double m = 0.0;
      for (const auto i : idx) m += samples(i, j);
      draws[static_cast<std::size_t>(j)].push_back(m / static_cast<double>(idx.size()));
    }
    return 0.0;
  });
  std::vector<Interval> out;
  for (auto& d : draws) out.push_back(percentile_interval(std::move(d), options.level));
  return out;
}

StrongErrorStudy strong_error_study(const PsfdeModel<double>& model, const Vector<double>& x0,
                                    const std::vector<double>& deltas, double delta_ref, double horizon,
                                    std::int64_t n_paths, std::uint64_t master_seed, int threads) {
  if (deltas.empty()) throw std::invalid_argument("strong_error_study: empty delta ladder");
  if (n_paths < 1) throw std::invalid_argument("strong_error_study: n_paths must be >= 1");
  const std::int64_t ref_steps = exact_ratio(horizon, delta_ref, "strong_error: T / delta_ref");
  std::vector<std::int64_t> factors;
  for (const double d : deltas) {
    const std::int64_t m = exact_ratio(d, delta_ref, "strong_error: delta / delta_ref");
    if (ref_steps % m != 0) throw std::invalid_argument("strong_error: delta must divide T");
    factors.push_back(m);
  }

  StrongErrorStudy study;
  study.deltas = deltas;
  study.delta_ref = delta_ref;
  study.horizon = horizon;
  study.master_seed = master_seed;
  study.samples.resize(n_paths, static_cast<Eigen::Index>(deltas.size()));

  parallel_for_paths(n_paths, threads, [&](std::int64_t i) {
    const auto fine = generate<double>(PathSeed{master_seed, static_cast<std::uint64_t>(i)}, model.brownian_dim(),
                                       ref_steps, delta_ref);
    const auto reference = simulate_path(model, x0, fine, ref_steps);
    for (std::size_t j = 0; j < factors.size(); ++j) {
      const std::int64_t m = factors[j];
      const auto coarse = simulate_path(model, x0, coarsen(fine, m), ref_steps / m);
      const auto y = interpolate_path(coarse, model, fine, m);
      study.samples(i, static_cast<Eigen::Index>(j)) = (y.values - reference.states).colwise().squaredNorm().maxCoeff();
    }
  });
  return study;
}

double strong_error(const PsfdeModel<double>& model, const Vector<double>& x0, double delta_coarse, double delta_ref,
                    double horizon, std::int64_t n_paths, std::uint64_t master_seed, int threads) {
  return strong_error_study(model, x0, {delta_coarse}, delta_ref, horizon, n_paths, master_seed, threads)
      .mean_errors()
      .front();
}

ErrorFit convergence_order(const std::vector<double>& deltas, const std::vector<double>& errors) {
  if (deltas.size() != errors.size()) throw std::invalid_argument("convergence_order: size mismatch");
  if (deltas.size() < 3) throw std::invalid_argument("convergence_order: need at least three ladder points");
  for (std::size_t i = 0; i < deltas.size(); ++i) {
    if (!(deltas[i] > 0.0)) throw std::invalid_argument("convergence_order: deltas must be positive");
    if (i > 0 && !(deltas[i] < deltas[i - 1]))
      throw std::invalid_argument("convergence_order: deltas must be strictly decreasing");
    if (!(errors[i] > 0.0) || !std::isfinite(errors[i]))
      throw DegenerateFitError("convergence_order: errors must be positive and finite");
  }
  std::vector<double> lx, ly;
  for (std::size_t i = 0; i < deltas.size(); ++i) {
    lx.push_back(std::log(deltas[i]));
    ly.push_back(std::log(errors[i]));
  }
  const LineFit fit = fit_line(lx, ly);
  return {deltas, errors, fit.slope, std::exp(fit.intercept), fit.slope_stderr};
}

RateEstimate ms_rate(const EnsembleSummary<double>& summary, const Window& window, const BootstrapOptions& options) {
  const auto cols = window_columns(summary, window);
  RateEstimate r;
  r.window = window;
  r.n_paths = summary.n_paths();
  r.slope = log_mean_slope(summary, cols, nullptr);
  if (std::isfinite(r.slope))
    r.std_error = finite_stddev(bootstrap(summary.n_paths(), options,
                                          [&](const auto& idx) { return log_mean_slope(summary, cols, &idx); }));
  return r;
}

double path_rate(const std::vector<double>& times, const std::vector<double>& sq_norms, const Window& window) {
  if (times.size() != sq_norms.size()) throw std::invalid_argument("path_rate: size mismatch");
  if (times.empty()) throw std::invalid_argument("path_rate: empty series");
  check_window(window, times.back());
  std::vector<double> x, y;
  for (std::size_t j = 0; j < times.size(); ++j) {
    if (!in_window(times[j], window)) continue;
    if (!(sq_norms[j] > 0.0)) return kNegInf;
    x.push_back(times[j]);
    y.push_back(std::log(sq_norms[j]));
  }
  if (x.size() < 2) throw std::invalid_argument("path_rate: window holds fewer than two steps");
  return fit_line(x, y).slope;
}

AsRate as_rate(const EnsembleSummary<double>& summary, const Window& window, const BootstrapOptions& options) {
  window_columns(summary, window);
  const auto times = summary.times();
  AsRate out;
  std::vector<double> row(times.size());
  for (Eigen::Index i = 0; i < summary.n_paths(); ++i) {
    for (std::size_t j = 0; j < times.size(); ++j) row[j] = summary.sq_norms(i, static_cast<Eigen::Index>(j));
    out.per_path.push_back(path_rate(times, row, window));
  }
  out.aggregate.window = window;
  out.aggregate.n_paths = summary.n_paths();
  out.aggregate.slope = *std::max_element(out.per_path.begin(), out.per_path.end());
  out.aggregate.std_error = finite_stddev(bootstrap(summary.n_paths(), options, [&](const auto& idx) {
    double m = kNegInf;
    for (const auto i : idx) m = std::max(m, out.per_path[static_cast<std::size_t>(i)]);
    return m;
  }));
  return out;
}

RateEstimate as_rate(const DiscretePath<double>& path, const Window& window) {
  std::vector<double> times, sq;
  for (Eigen::Index k = 0; k < path.states.cols(); ++k) {
    times.push_back(static_cast<double>(k) * path.delta);
    sq.push_back(path.states.col(k).squaredNorm());
  }
  return {path_rate(times, sq, window), 0.0, window, 1};
}

PolyRate poly_rate(const EnsembleSummary<double>& summary, const Window& window, double tail_fraction,
                   const BootstrapOptions& options) {
  if (!(tail_fraction > 0.0 && tail_fraction <= 1.0)) throw std::invalid_argument("poly_rate: tail fraction must lie in (0, 1]");
  check_window(window, static_cast<double>(summary.steps) * summary.delta);
  std::vector<Eigen::Index> cols;
  for (std::size_t j = 0; j < summary.record_steps.size(); ++j) {
    const double k = static_cast<double>(summary.record_steps[j]);
    if (in_window(k * summary.delta, window) && (k + 1.0) * summary.delta > 1.0) cols.push_back(static_cast<Eigen::Index>(j));
  }
  if (cols.empty()) throw std::invalid_argument("poly_rate: window lies entirely within (k+1) delta <= 1");

  auto time_of = [&](Eigen::Index j) { return static_cast<double>(summary.record_steps[static_cast<std::size_t>(j)]) * summary.delta; };
  auto log_time = [&](Eigen::Index j) { return std::log(time_of(j) + summary.delta); };
  const double start = time_of(cols.front());
  const double tail_start = window.t_end - tail_fraction * (window.t_end - start);
  std::vector<Eigen::Index> tail;
  for (const auto j : cols)
    if (time_of(j) >= tail_start - 1e-9 * std::max(1.0, window.t_end)) tail.push_back(j);

  PolyRate out;
  out.tail = {time_of(tail.front()), time_of(tail.back())};

  std::vector<double> per_path(static_cast<std::size_t>(summary.n_paths()), kNegInf);
  for (Eigen::Index i = 0; i < summary.n_paths(); ++i)
    for (const auto j : tail) {
      const double sq = summary.sq_norms(i, j);
      const double v = sq > 0.0 ? 0.5 * std::log(sq) / log_time(j) : kNegInf;
      per_path[static_cast<std::size_t>(i)] = std::max(per_path[static_cast<std::size_t>(i)], v);
    }

  auto ms_stat = [&](const std::vector<Eigen::Index>* rows) {
    double best = kNegInf;
    for (const auto j : tail) {
      double m = 0.0;
      if (rows) {
        for (const auto i : *rows) m += summary.sq_norms(i, j);
        m /= static_cast<double>(rows->size());
      } else {
        m = summary.sq_norms.col(j).mean();
      }
      best = std::max(best, m > 0.0 ? std::log(m) / log_time(j) : kNegInf);
    }
    return best;
  };

  out.pathwise.window = out.mean_square.window = window;
  out.pathwise.n_paths = out.mean_square.n_paths = summary.n_paths();
  out.pathwise.slope = *std::max_element(per_path.begin(), per_path.end());
  out.mean_square.slope = ms_stat(nullptr);
  out.pathwise.std_error = finite_stddev(bootstrap(summary.n_paths(), options, [&](const auto& idx) {
    double m = kNegInf;
    for (const auto i : idx) m = std::max(m, per_path[static_cast<std::size_t>(i)]);
    return m;
  }));
  out.mean_square.std_error = finite_stddev(bootstrap(summary.n_paths(), options, [&](const auto& idx) { return ms_stat(&idx); }));
  return out;
}

std::vector<double> InterpolantStudy::mean_gap() const {
  std::vector<double> out;
  for (Eigen::Index j = 0; j < gap_sq.cols(); ++j) out.push_back(gap_sq.col(j).mean());
  return out;
}

std::vector<double> InterpolantStudy::mean_sup() const {
  std::vector<double> out;
  for (Eigen::Index j = 0; j < sup_sq.cols(); ++j) out.push_back(sup_sq.col(j).mean());
  return out;
}

InterpolantStudy interpolant_study(const PsfdeModel<double>& model, const Vector<double>& x0,
                                   const std::vector<double>& deltas, double horizon, std::int64_t refine,
                                   std::int64_t n_paths, std::uint64_t master_seed, int threads) {
  if (deltas.empty()) throw std::invalid_argument("interpolant_study: empty delta list");
  if (refine < 1) throw std::invalid_argument("interpolant_study: refine must be >= 1");
  if (n_paths < 1) throw std::invalid_argument("interpolant_study: n_paths must be >= 1");
  const double finest = *std::min_element(deltas.begin(), deltas.end());
  const double h = finest / static_cast<double>(refine);
  const std::int64_t fine_steps = exact_ratio(horizon, h, "interpolant_study: T / fine step");
  std::vector<std::int64_t> ratios;
  for (const double d : deltas) {
    const std::int64_t m = exact_ratio(d, finest, "interpolant_study: delta / finest delta");
    if (fine_steps % (m * refine) != 0) throw std::invalid_argument("interpolant_study: delta must divide T");
    ratios.push_back(m);
  }

  InterpolantStudy study;
  study.deltas = deltas;
  study.refine = refine;
  study.gap_sq.resize(n_paths, static_cast<Eigen::Index>(deltas.size()));
  study.sup_sq.resize(n_paths, static_cast<Eigen::Index>(deltas.size()));

  parallel_for_paths(n_paths, threads, [&](std::int64_t i) {
    const auto fine = generate<double>(PathSeed{master_seed, static_cast<std::uint64_t>(i)}, model.brownian_dim(),
                                       fine_steps, h);
    for (std::size_t j = 0; j < ratios.size(); ++j) {
      const auto rung_grid = coarsen(fine, ratios[j]);
      const auto coarse_grid = coarsen(rung_grid, refine);
      const auto path = simulate_path(model, x0, coarse_grid, coarse_grid.steps());
      const auto y = interpolate_path(path, model, rung_grid, refine);
      double gap = 0.0, sup = 0.0;
      for (Eigen::Index c = 0; c < y.values.cols(); ++c) {
        gap = std::max(gap, (y.values.col(c) - path.states.col(c / refine)).squaredNorm());
        sup = std::max(sup, y.values.col(c).squaredNorm());
      }
      study.gap_sq(i, static_cast<Eigen::Index>(j)) = gap;
      study.sup_sq(i, static_cast<Eigen::Index>(j)) = sup;
    }
  });
  return study;
}

}  // namespace panto
