#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <utility>
#include <vector>

namespace panto {

template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

/// Lower end of the segment window, kept as an exact fraction p/q when the
/// double value is one (denominator up to 10^6), so floor(k * theta) and
/// floor(1 / theta) are computed in integer arithmetic.
class ThetaLower {
 public:
  ThetaLower() = default;
  explicit ThetaLower(double value) : value_(value) {
    if (!(value > 0.0 && value < 1.0)) throw std::invalid_argument("theta_lower must lie in (0, 1)");
    rational_ = exact_fraction(value);
  }

  double value() const { return value_; }
  bool is_rational() const { return rational_.has_value(); }

  /// floor(k * theta_lower), never above the exact value.
  std::int64_t floor_times(std::int64_t k) const {
    if (rational_) return (k * rational_->first) / rational_->second;
    if (k <= 0) return 0;
    const double x = static_cast<double>(k) * value_;
    return std::max<std::int64_t>(0, static_cast<std::int64_t>(std::floor(x - 1e-12 * x)));
  }

  /// floor(1 / theta_lower) + 1, the multiplicity bound on {j : floor(theta j) = i}.
  std::int64_t floor_factor() const {
    if (rational_) return rational_->second / rational_->first + 1;
    const double x = 1.0 / value_;
    return static_cast<std::int64_t>(std::floor(x - 1e-12 * x)) + 1;
  }

 private:
  static std::optional<std::pair<std::int64_t, std::int64_t>> exact_fraction(double x) {
    // Continued-fraction convergents; accept the first one that reproduces x exactly.
    std::int64_t p0 = 0, q0 = 1, p1 = 1, q1 = 0;
    double r = x;
    for (int it = 0; it < 40; ++it) {
      const double a = std::floor(r);
      const auto ai = static_cast<std::int64_t>(a);
      const std::int64_t p2 = ai * p1 + p0, q2 = ai * q1 + q0;
      if (q2 > 1'000'000) break;
      if (static_cast<double>(p2) / static_cast<double>(q2) == x) return std::make_pair(p2, q2);
      p0 = p1; q0 = q1; p1 = p2; q1 = q2;
      const double frac = r - a;
      if (frac <= 0.0) break;
      r = 1.0 / frac;
    }
    return std::nullopt;
  }

  double value_ = 0.5;
  std::optional<std::pair<std::int64_t, std::int64_t>> rational_{std::make_pair(std::int64_t{1}, std::int64_t{2})};
};

/// Discrete EM states y(j), j = base_index..k, in one flat column-major block.
///
/// Pruning drops a prefix logically; storage is compacted once the dead
/// prefix outgrows the live part, keeping pushes amortized O(n).
template <typename Scalar = double>
class HistoryBuffer {
 public:
  HistoryBuffer(const Vector<Scalar>& x0, Scalar delta) : dim_(x0.size()), delta_(delta) {
    if (dim_ < 1) throw std::invalid_argument("HistoryBuffer: state dimension must be positive");
    if (!(delta > Scalar(0))) throw std::invalid_argument("HistoryBuffer: delta must be positive");
    push(x0);
  }

  Eigen::Index dim() const { return dim_; }
  Scalar delta() const { return delta_; }
  std::int64_t base_index() const { return base_; }
  /// Index of the newest state.
  std::int64_t last_index() const { return base_ + live() - 1; }
  std::int64_t size() const { return live(); }

  void reserve(std::int64_t nodes) { data_.reserve(static_cast<std::size_t>(nodes * dim_)); }

  template <typename Derived>
  void push(const Eigen::MatrixBase<Derived>& y) {
    if (y.size() != dim_) throw std::invalid_argument("HistoryBuffer: state dimension mismatch");
    for (Eigen::Index i = 0; i < dim_; ++i) data_.push_back(y(i));
  }

  Eigen::Map<const Vector<Scalar>> node(std::int64_t j) const {
    if (j < base_ || j > last_index()) throw std::logic_error("HistoryBuffer: node index pruned or not yet computed");
    return Eigen::Map<const Vector<Scalar>>(data_.data() + offset_ + (j - base_) * dim_, dim_);
  }

  /// Forgets every node with index below j (never the newest node).
  void prune_before(std::int64_t j) {
    j = std::min(j, last_index());
    if (j <= base_) return;
    offset_ += static_cast<std::size_t>((j - base_) * dim_);
    base_ = j;
    if (offset_ > data_.size() - offset_) {
      data_.erase(data_.begin(), data_.begin() + static_cast<std::ptrdiff_t>(offset_));
      offset_ = 0;
    }
  }

 private:
  std::int64_t live() const { return static_cast<std::int64_t>((data_.size() - offset_) / dim_); }

  Eigen::Index dim_;
  Scalar delta_;
  std::int64_t base_ = 0;
  std::size_t offset_ = 0;
  std::vector<Scalar> data_;
};

/// A function theta -> phi(theta) on [theta_lower, 1]; what drift and
/// diffusion functionals consume.
template <typename Scalar = double>
class Segment {
 public:
  virtual ~Segment() = default;
  virtual Eigen::Index dim() const = 0;
  virtual Scalar theta_lower() const = 0;
  virtual void eval_theta_into(Scalar theta, Eigen::Ref<Vector<Scalar>> out) const = 0;

  Vector<Scalar> operator()(Scalar theta) const {
    Vector<Scalar> out(dim());
    eval_theta_into(theta, out);
    return out;
  }
};

namespace detail {
// Endpoint slack for domain checks.
inline constexpr double kDomainSlack = 0x1.0p-40;
// Snap relative distance for knot detection in index units.
inline constexpr double kKnotSnap = 1e-12;
}  // namespace detail

/// The discrete segment y_k: piecewise-linear interpolation of the nodes
/// y(floor(k theta_lower)), ..., y(k) evaluated at u in [k theta_lower delta, k delta].
///
/// Both branches of the interpolation formula are the same affine blend of
/// the two bracketing nodes; the bracket index is floor(u / delta) clamped to
/// [floor(k theta_lower), k - 1].
template <typename Scalar = double>
class SegmentView final : public Segment<Scalar> {
 public:
  SegmentView(const HistoryBuffer<Scalar>& history, std::int64_t k, const ThetaLower& theta_lower)
      : history_(&history), k_(k), theta_lower_(theta_lower), first_(theta_lower.floor_times(k)) {
    if (k < 0) throw std::invalid_argument("SegmentView: k must be nonnegative");
    if (k > history.last_index()) throw std::invalid_argument("SegmentView: step not yet in history");
    // k * theta_lower >= floor(k * theta_lower), so the left end never precedes the first node.
    if (first_ < history.base_index()) throw std::logic_error("SegmentView: required node pruned");
  }

  std::int64_t k() const { return k_; }
  std::int64_t first_node() const { return first_; }
  Eigen::Index dim() const override { return history_->dim(); }
  Scalar theta_lower() const override { return static_cast<Scalar>(theta_lower_.value()); }
  Scalar delta() const { return history_->delta(); }

  /// Time-domain endpoints [k theta_lower delta, k delta].
  std::pair<Scalar, Scalar> u_domain() const {
    const Scalar hi = static_cast<Scalar>(k_) * delta();
    return {static_cast<Scalar>(k_) * theta_lower() * delta(), hi};
  }

  Vector<Scalar> eval_u(Scalar u) const {
    Vector<Scalar> out(dim());
    eval_u_into(u, out);
    return out;
  }

  void eval_u_into(Scalar u, Eigen::Ref<Vector<Scalar>> out) const {
    const auto [lo, hi] = u_domain();
    const Scalar slack = static_cast<Scalar>(detail::kDomainSlack) * std::max(Scalar(1), hi);
    if (u < lo - slack || u > hi + slack) throw std::domain_error("SegmentView: u outside [k theta_lower delta, k delta]");
    eval_index_units(std::clamp(u, lo, hi) / delta(), out);
  }

  void eval_theta_into(Scalar theta, Eigen::Ref<Vector<Scalar>> out) const override {
    const Scalar slack = static_cast<Scalar>(detail::kDomainSlack);
    if (theta < theta_lower() - slack || theta > Scalar(1) + slack)
      throw std::domain_error("SegmentView: theta outside [theta_lower, 1]");
    theta = std::clamp(theta, theta_lower(), Scalar(1));
    eval_index_units(theta * static_cast<Scalar>(k_), out);
  }

  Vector<Scalar> eval_theta(Scalar theta) const { return (*this)(theta); }

  /// max_{j = floor(k theta_lower)..k} |y(j)|, an upper bound for sup_u |y_k(u)|.
  Scalar sup_bound() const {
    Scalar best(0);
    for (std::int64_t j = first_; j <= k_; ++j) best = std::max(best, history_->node(j).norm());
    return best;
  }

 private:
  // s = u / delta; evaluates the blend of nodes j and j + 1 with j = floor(s).
  void eval_index_units(Scalar s, Eigen::Ref<Vector<Scalar>> out) const {
    if (k_ == 0) {
      out = history_->node(0);
      return;
    }
    const Scalar nearest = std::round(s);
    if (std::abs(s - nearest) <= static_cast<Scalar>(detail::kKnotSnap) * std::max(Scalar(1), std::abs(s))) s = nearest;
    auto j = static_cast<std::int64_t>(std::floor(s));
    j = std::clamp(j, first_, k_ - 1);
    const Scalar w = std::clamp(s - static_cast<Scalar>(j), Scalar(0), Scalar(1));
    out = (Scalar(1) - w) * history_->node(j) + w * history_->node(j + 1);
  }

  const HistoryBuffer<Scalar>* history_;
  std::int64_t k_;
  ThetaLower theta_lower_;
  std::int64_t first_;
};

/// Free-function form of SegmentView::sup_bound.
template <typename Scalar>
Scalar segment_sup_bound(const SegmentView<Scalar>& view) {
  return view.sup_bound();
}

/// Drops history nodes no segment at step >= k will read. floor(k theta_lower)
/// is nondecreasing in k, so later evaluations are unaffected.
template <typename Scalar>
void prune(HistoryBuffer<Scalar>& history, std::int64_t k, const ThetaLower& theta_lower) {
  if (k <= 0) return;
  history.prune_before(theta_lower.floor_times(k));
}

/// Step processes over a complete (unpruned) history:
/// z(t) = y(floor(t / delta)), t_bar = floor(t / delta) delta,
/// z_bar(theta, t) = y(floor(theta k)), z_bar_t = y_k with k = floor(t / delta).
template <typename Scalar = double>
class StepProcessView {
 public:
  StepProcessView(const HistoryBuffer<Scalar>& history, const ThetaLower& theta_lower)
      : history_(&history), theta_lower_(theta_lower) {
    if (history.base_index() != 0) throw std::invalid_argument("StepProcessView: history must be unpruned");
  }

  std::int64_t step_of(Scalar t) const {
    if (t < Scalar(0)) throw std::domain_error("StepProcessView: negative time");
    const Scalar s = t / history_->delta();
    const Scalar nearest = std::round(s);
    const Scalar snapped = std::abs(s - nearest) <= static_cast<Scalar>(detail::kKnotSnap) * std::max(Scalar(1), s) ? nearest : s;
    const auto k = static_cast<std::int64_t>(std::floor(snapped));
    if (k > history_->last_index()) throw std::domain_error("StepProcessView: time beyond simulated horizon");
    return k;
  }

  Scalar t_bar(Scalar t) const { return static_cast<Scalar>(step_of(t)) * history_->delta(); }
  Vector<Scalar> z(Scalar t) const { return history_->node(step_of(t)); }

  Vector<Scalar> z_bar(Scalar theta, Scalar t) const {
    const auto k = step_of(t);
    return history_->node(static_cast<std::int64_t>(std::floor(theta * static_cast<Scalar>(k))));
  }

  SegmentView<Scalar> z_bar_segment(Scalar t) const { return SegmentView<Scalar>(*history_, step_of(t), theta_lower_); }

 private:
  const HistoryBuffer<Scalar>* history_;
  ThetaLower theta_lower_;
};

}  // namespace panto
