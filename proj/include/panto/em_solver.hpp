#pragma once

#include "panto/model.hpp"
#include "panto/rng_paths.hpp"
#include "panto/segment.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <exception>
#include <limits>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace panto {

/// A state became non-finite. step is the index of the first bad state.
class DivergenceError : public std::runtime_error {
 public:
  DivergenceError(std::int64_t step, std::optional<std::uint64_t> path_index = std::nullopt)
      : std::runtime_error(message(step, path_index)), step_(step), path_index_(path_index) {}

  std::int64_t step() const { return step_; }
  std::optional<std::uint64_t> path_index() const { return path_index_; }

 private:
  static std::string message(std::int64_t step, std::optional<std::uint64_t> path) {
    std::string s = "EM state became non-finite at step " + std::to_string(step);
    if (path) s += " of path " + std::to_string(*path);
    return s;
  }

  std::int64_t step_;
  std::optional<std::uint64_t> path_index_;
};

struct EmOptions {
  /// Drop history nodes below floor(k theta_lower) as the recursion advances.
  bool prune_history = true;
};

template <typename Scalar = double>
struct DiscretePath {
  Scalar delta{};
  /// y(0..K), one column per step.
  Matrix<Scalar> states;
  std::string model_id;
  PathSeed seed{};

  Eigen::Index steps() const { return states.cols() - 1; }
  auto state(Eigen::Index k) const { return states.col(k); }
};

/// Y(t) of the continuous-time approximation sampled at t = i * fine_delta.
template <typename Scalar = double>
struct InterpolantPath {
  Scalar fine_delta{};
  Eigen::Index refine = 1;
  Matrix<Scalar> values;
};

namespace detail {

template <typename Scalar>
void check_dims(const PsfdeModel<Scalar>& model, const Vector<Scalar>& x0, const BrownianGrid<Scalar>& grid,
                std::int64_t steps) {
  if (x0.size() != model.dim()) throw std::invalid_argument("EM: x0 dimension does not match the model");
  if (grid.dims() != model.brownian_dim()) throw std::invalid_argument("EM: Brownian dimension does not match the model");
  if (steps < 0 || steps > grid.steps()) throw std::invalid_argument("EM: Brownian grid shorter than requested steps");
}

}  // namespace detail

/// Core EM recursion y(k+1) = y(k) + f(y_k, k delta) delta + g(y_k, k delta) dB(k).
///
/// Coefficients are frozen at the grid time k delta. observer(k, y(k)) is
/// called for k = 0..steps.
template <typename Scalar, typename Observer>
void run_em(const PsfdeModel<Scalar>& model, const Vector<Scalar>& x0, const BrownianGrid<Scalar>& grid,
            std::int64_t steps, Observer&& observer, const EmOptions& options = {}) {
  detail::check_dims(model, x0, grid, steps);
  const Scalar dt = grid.delta();
  const ThetaLower& theta = model.theta_lower();
  HistoryBuffer<Scalar> history(x0, dt);
  if (!options.prune_history) history.reserve(steps + 1);

  Vector<Scalar> f(model.dim());
  Matrix<Scalar> g(model.dim(), model.brownian_dim());
  Vector<Scalar> next(model.dim());
  Vector<Scalar> db(model.brownian_dim());
  observer(std::int64_t{0}, history.node(0));
  for (std::int64_t k = 0; k < steps; ++k) {
    const SegmentView<Scalar> segment(history, k, theta);
    model.coefficients_into(segment, static_cast<Scalar>(k) * dt, f, g);
    db = grid.increment(k).transpose();
    next = history.node(k) + f * dt + g * db;
    if (!next.allFinite()) throw DivergenceError(k + 1);
    history.push(next);
    if (options.prune_history) prune(history, k + 1, theta);
    observer(k + 1, history.node(k + 1));
  }
}

template <typename Scalar>
DiscretePath<Scalar> simulate_path(const PsfdeModel<Scalar>& model, const Vector<Scalar>& x0,
                                   const BrownianGrid<Scalar>& grid, std::int64_t steps, const EmOptions& options = {}) {
  DiscretePath<Scalar> path;
  path.delta = grid.delta();
  path.model_id = model.id();
  path.states.resize(model.dim(), steps + 1);
  run_em(model, x0, grid, steps, [&](std::int64_t k, const auto& y) { path.states.col(k) = y; }, options);
  return path;
}

/// Y(t) = y(k) + f(y_k, k delta)(t - k delta) + g(y_k, k delta)(B(t) - B(k delta))
/// on each coarse interval, with B read from fine_grid. fine_grid must
/// coarsen by refine to the grid that drove path.
template <typename Scalar>
InterpolantPath<Scalar> interpolate_path(const DiscretePath<Scalar>& path, const PsfdeModel<Scalar>& model,
                                         const BrownianGrid<Scalar>& fine_grid, Eigen::Index refine) {
  if (refine < 1) throw std::invalid_argument("interpolate_path: refine must be >= 1");
  const std::int64_t steps = path.steps();
  const Scalar fine_dt = fine_grid.delta();
  using std::abs;
  if (abs(fine_dt * static_cast<Scalar>(refine) - path.delta) > Scalar(1e-12) * path.delta)
    throw std::invalid_argument("interpolate_path: fine grid step times refine must equal the path step");
  if (fine_grid.steps() < steps * refine) throw std::invalid_argument("interpolate_path: fine grid too short");
  if (fine_grid.dims() != model.brownian_dim() || path.states.rows() != model.dim())
    throw std::invalid_argument("interpolate_path: dimension mismatch");

  InterpolantPath<Scalar> out;
  out.fine_delta = fine_dt;
  out.refine = refine;
  out.values.resize(model.dim(), steps * refine + 1);

  const ThetaLower& theta = model.theta_lower();
  HistoryBuffer<Scalar> history(Vector<Scalar>(path.states.col(0)), path.delta);
  Vector<Scalar> f(model.dim());
  Matrix<Scalar> g(model.dim(), model.brownian_dim());
  const auto& b = fine_grid.values();
  for (std::int64_t k = 0; k < steps; ++k) {
    const SegmentView<Scalar> segment(history, k, theta);
    model.coefficients_into(segment, static_cast<Scalar>(k) * path.delta, f, g);
    const Eigen::Index base = k * refine;
    out.values.col(base) = path.states.col(k);
    for (Eigen::Index i = 1; i < refine; ++i) {
      const Vector<Scalar> db = (b.row(base + i) - b.row(base)).transpose();
      out.values.col(base + i) = path.states.col(k) + f * (static_cast<Scalar>(i) * fine_dt) + g * db;
    }
    history.push(path.states.col(k + 1));
    prune(history, k + 1, theta);
  }
  out.values.col(steps * refine) = path.states.col(steps);
  return out;
}

/// Runs fn(i) for i in [0, n) on up to `threads` workers. Results must be
/// written to per-index slots; if several indices throw, the exception of
/// the smallest index is rethrown, so the outcome does not depend on
/// scheduling.
template <typename Fn>
void parallel_for_paths(std::int64_t n, int threads, Fn&& fn) {
  if (n <= 0) return;
  threads = static_cast<int>(std::clamp<std::int64_t>(threads, 1, n));
  if (threads == 1) {
    for (std::int64_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::int64_t> next{0};
  std::mutex mutex;
  std::int64_t failed_index = std::numeric_limits<std::int64_t>::max();
  std::exception_ptr failure;
  auto worker = [&] {
    for (std::int64_t i = next++; i < n; i = next++) {
      try {
        fn(i);
      } catch (...) {
        std::lock_guard lock(mutex);
        if (i < failed_index) {
          failed_index = i;
          failure = std::current_exception();
        }
      }
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(threads));
  for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
  for (auto& th : pool) th.join();
  if (failure) std::rethrow_exception(failure);
}

struct EnsembleOptions {
  int threads = 1;
  /// Record |y(k)|^2 every `stride` steps (the final step is always recorded).
  std::int64_t stride = 1;
  bool prune_history = true;
};

/// Per-path squared norms |y(k)|^2 at the recorded steps.
template <typename Scalar = double>
struct EnsembleSummary {
  Scalar delta{};
  std::int64_t steps = 0;
  std::uint64_t master_seed = 0;
  std::string model_id;
  std::vector<std::int64_t> record_steps;
  /// n_paths x record_steps.size().
  Matrix<Scalar> sq_norms;

  Eigen::Index n_paths() const { return sq_norms.rows(); }

  std::vector<Scalar> times() const {
    std::vector<Scalar> t;
    t.reserve(record_steps.size());
    for (auto k : record_steps) t.push_back(static_cast<Scalar>(k) * delta);
    return t;
  }

  Vector<Scalar> mean_sq() const { return sq_norms.colwise().mean().transpose(); }
};

inline std::vector<std::int64_t> record_schedule(std::int64_t steps, std::int64_t stride) {
  if (stride < 1) throw std::invalid_argument("record stride must be >= 1");
  std::vector<std::int64_t> ks;
  for (std::int64_t k = 0; k <= steps; k += stride) ks.push_back(k);
  if (ks.back() != steps) ks.push_back(steps);
  return ks;
}

/// Path i is driven by PathSeed{master_seed, i}; the summary is identical
/// for every thread count.
template <typename Scalar>
EnsembleSummary<Scalar> simulate_ensemble(const PsfdeModel<Scalar>& model, const Vector<Scalar>& x0, Scalar delta,
                                          std::int64_t steps, std::int64_t n_paths, std::uint64_t master_seed,
                                          const EnsembleOptions& options = {}) {
  if (n_paths < 1) throw std::invalid_argument("simulate_ensemble: n_paths must be >= 1");
  EnsembleSummary<Scalar> summary;
  summary.delta = delta;
  summary.steps = steps;
  summary.master_seed = master_seed;
  summary.model_id = model.id();
  summary.record_steps = record_schedule(steps, options.stride);
  summary.sq_norms.resize(n_paths, static_cast<Eigen::Index>(summary.record_steps.size()));

  const EmOptions em{options.prune_history};
  parallel_for_paths(n_paths, options.threads, [&](std::int64_t i) {
    const PathSeed seed{master_seed, static_cast<std::uint64_t>(i)};
    const auto grid = generate<Scalar>(seed, model.brownian_dim(), steps, delta);
    std::size_t slot = 0;
    try {
      run_em(model, x0, grid, steps, [&](std::int64_t k, const auto& y) {
        if (slot < summary.record_steps.size() && summary.record_steps[slot] == k)
          summary.sq_norms(i, static_cast<Eigen::Index>(slot++)) = y.squaredNorm();
      }, em);
    } catch (const DivergenceError& e) {
      throw DivergenceError(e.step(), static_cast<std::uint64_t>(i));
    }
  });
  return summary;
}

/// Full discrete paths for a small ensemble, same seeding as simulate_ensemble.
template <typename Scalar>
std::vector<DiscretePath<Scalar>> simulate_ensemble_paths(const PsfdeModel<Scalar>& model, const Vector<Scalar>& x0,
                                                          Scalar delta, std::int64_t steps, std::int64_t n_paths,
                                                          std::uint64_t master_seed, int threads = 1) {
  if (n_paths < 1) throw std::invalid_argument("simulate_ensemble_paths: n_paths must be >= 1");
  std::vector<DiscretePath<Scalar>> paths(static_cast<std::size_t>(n_paths));
  parallel_for_paths(n_paths, threads, [&](std::int64_t i) {
    const PathSeed seed{master_seed, static_cast<std::uint64_t>(i)};
    const auto grid = generate<Scalar>(seed, model.brownian_dim(), steps, delta);
    try {
      paths[static_cast<std::size_t>(i)] = simulate_path(model, x0, grid, steps);
    } catch (const DivergenceError& e) {
      throw DivergenceError(e.step(), static_cast<std::uint64_t>(i));
    }
    paths[static_cast<std::size_t>(i)].seed = seed;
  });
  return paths;
}

}  // namespace panto
