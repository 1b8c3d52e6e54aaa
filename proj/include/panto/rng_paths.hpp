#pragma once

#include <Eigen/Dense>

#include <array>
#include <cmath>
#include <cstdint>
#include <stdexcept>

namespace panto {

/// Philox4x32-10 counter-based generator (Salmon et al., Random123).
///
/// The stream is a pure function of (key, counter); draws never depend on
/// how many other streams were consumed before, so ensemble members can be
/// generated in any order or in parallel.
class Philox4x32 {
 public:
  using Counter = std::array<std::uint32_t, 4>;
  using Key = std::array<std::uint32_t, 2>;

  static Counter block(Counter ctr, Key key);
};

/// Identifies one Monte Carlo path: the master seed keys the generator, the
/// path index occupies the upper half of the counter.
struct PathSeed {
  std::uint64_t master_seed = 0;
  std::uint64_t path_index = 0;

  friend bool operator==(const PathSeed&, const PathSeed&) = default;
};

/// Sequential reader over the Philox stream of one PathSeed.
class NormalStream {
 public:
  explicit NormalStream(PathSeed seed, std::uint64_t domain = 0);

  /// Next 64 uniform bits.
  std::uint64_t next_u64();
  /// Uniform on the open interval (0, 1), 53-bit resolution.
  double next_uniform();
  /// Standard normal via Box-Muller; both outputs of a pair are used.
  double next_normal();
  /// Uniform integer in [0, n), Lemire's multiply-shift rejection method.
  std::uint64_t next_below(std::uint64_t n);

 private:
  void refill();

  Philox4x32::Key key_{};
  std::uint64_t block_ = 0;
  std::uint64_t stream_ = 0;
  Philox4x32::Counter buf_{};
  int used_ = 4;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

/// Brownian path sampled on a uniform grid t_k = k * delta.
///
/// The grid stores the path values B(t_k) (with B(0) = 0); increments are
/// the differences of consecutive values. Coarsening subsamples the values,
/// so Brownian values at shared times agree bitwise between a grid and all
/// of its coarsenings.
template <typename Scalar = double>
class BrownianGrid {
 public:
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  using RowVector = Eigen::Matrix<Scalar, 1, Eigen::Dynamic>;

  BrownianGrid() = default;

  /// values must have steps + 1 rows with a zero first row.
  BrownianGrid(Scalar delta, Matrix values) : delta_(delta), values_(std::move(values)) {
    if (!(delta_ > Scalar(0))) throw std::invalid_argument("BrownianGrid: delta must be positive");
    if (values_.rows() < 1 || values_.cols() < 1)
      throw std::invalid_argument("BrownianGrid: need at least the B(0) row and one dimension");
    if (!values_.row(0).isZero(0)) throw std::invalid_argument("BrownianGrid: B(0) must be zero");
  }

  /// Builds a grid from raw increments (steps x dims) by cumulative summation.
  static BrownianGrid from_increments(Scalar delta, const Matrix& increments, Eigen::Index dims = -1) {
    const Eigen::Index d = increments.cols() > 0 ? increments.cols() : dims;
    if (d < 1) throw std::invalid_argument("BrownianGrid: dims must be positive");
    Matrix values = Matrix::Zero(increments.rows() + 1, d);
    for (Eigen::Index k = 0; k < increments.rows(); ++k) values.row(k + 1) = values.row(k) + increments.row(k);
    return BrownianGrid(delta, std::move(values));
  }

  Scalar delta() const { return delta_; }
  Eigen::Index dims() const { return values_.cols(); }
  Eigen::Index steps() const { return values_.rows() - 1; }

  /// B(k * delta) for k = 0..steps, one row per time.
  const Matrix& values() const { return values_; }

  /// Delta B(k) = B((k+1) delta) - B(k delta).
  auto increment(Eigen::Index k) const { return values_.row(k + 1) - values_.row(k); }

  Matrix increments() const {
    const Eigen::Index n = steps();
    return values_.bottomRows(n) - values_.topRows(n);
  }

 private:
  Scalar delta_ = Scalar(1);
  Matrix values_ = Matrix::Zero(1, 1);
};

/// Draws steps x dims independent N(0, delta) increments, row-major in
/// (step, dimension), from the Philox stream of seed.
template <typename Scalar = double>
BrownianGrid<Scalar> generate(PathSeed seed, Eigen::Index dims, Eigen::Index steps, Scalar delta) {
  if (!(delta > Scalar(0))) throw std::invalid_argument("generate: delta must be positive");
  if (dims < 1) throw std::invalid_argument("generate: dims must be positive");
  if (steps < 0) throw std::invalid_argument("generate: steps must be nonnegative");
  using Matrix = typename BrownianGrid<Scalar>::Matrix;
  NormalStream stream(seed);
  const double sd = std::sqrt(static_cast<double>(delta));
  Matrix values = Matrix::Zero(steps + 1, dims);
  for (Eigen::Index k = 0; k < steps; ++k)
    for (Eigen::Index j = 0; j < dims; ++j)
      values(k + 1, j) = values(k, j) + static_cast<Scalar>(sd * stream.next_normal());
  return BrownianGrid<Scalar>(delta, std::move(values));
}

/// Grid with step delta * factor sharing every factor-th Brownian value.
template <typename Scalar>
BrownianGrid<Scalar> coarsen(const BrownianGrid<Scalar>& grid, Eigen::Index factor) {
  if (factor < 1) throw std::invalid_argument("coarsen: factor must be >= 1");
  if (grid.steps() % factor != 0) throw std::invalid_argument("coarsen: factor must divide the number of steps");
  const Eigen::Index coarse_steps = grid.steps() / factor;
  typename BrownianGrid<Scalar>::Matrix values(coarse_steps + 1, grid.dims());
  for (Eigen::Index m = 0; m <= coarse_steps; ++m) values.row(m) = grid.values().row(m * factor);
  return BrownianGrid<Scalar>(grid.delta() * static_cast<Scalar>(factor), std::move(values));
}

}  // namespace panto
