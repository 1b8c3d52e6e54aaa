#pragma once

#include "panto/segment.hpp"

#include <array>
#include <cmath>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace panto {

/// Finite-atom probability measure nu on [lo, hi] within [theta_lower, 1].
struct MeasureSpec {
  struct Atom {
    double theta;
    double weight;
  };

  std::vector<Atom> atoms;
  double lo = 0.0;
  double hi = 1.0;

  /// n midpoint atoms of the uniform density on [lo, hi].
  static MeasureSpec uniform(double lo, double hi, int n_atoms = 16) {
    if (n_atoms < 1) throw std::invalid_argument("MeasureSpec: n_atoms must be positive");
    if (!(lo <= hi)) throw std::invalid_argument("MeasureSpec: support must satisfy lo <= hi");
    MeasureSpec m;
    m.lo = lo;
    m.hi = hi;
    const double width = (hi - lo) / n_atoms;
    for (int i = 0; i < n_atoms; ++i) m.atoms.push_back({lo + (i + 0.5) * width, 1.0 / n_atoms});
    return m;
  }

  static MeasureSpec dirac(double theta) { return MeasureSpec{{{theta, 1.0}}, theta, theta}; }

  /// Throws std::invalid_argument unless nu is a probability measure on
  /// [lo, hi] with theta_lower <= lo <= hi <= 1.
  void validate(double theta_lower) const {
    if (atoms.empty()) throw std::invalid_argument("MeasureSpec: no atoms");
    if (!(theta_lower <= lo && lo <= hi && hi <= 1.0))
      throw std::invalid_argument("MeasureSpec: support must satisfy theta_lower <= lo <= hi <= 1");
    double total = 0.0;
    for (const auto& a : atoms) {
      if (!(a.weight > 0.0)) throw std::invalid_argument("MeasureSpec: atom weights must be positive");
      if (a.theta < lo || a.theta > hi) throw std::invalid_argument("MeasureSpec: atom outside support");
      total += a.weight;
    }
    if (std::abs(total - 1.0) > 1e-12) throw std::invalid_argument("MeasureSpec: weights must sum to 1");
  }

  /// Every atom split into two half-weight atoms at the same theta.
  MeasureSpec split() const {
    MeasureSpec m{{}, lo, hi};
    for (const auto& a : atoms) {
      m.atoms.push_back({a.theta, 0.5 * a.weight});
      m.atoms.push_back({a.theta, 0.5 * a.weight});
    }
    return m;
  }
};

/// dx(t) = f(x_t, t) dt + g(x_t, t) dB(t) with f: segment -> R^n and
/// g: segment -> R^{n x d}. Implementations must be pure so one model can
/// drive many paths concurrently.
template <typename Scalar = double>
class PsfdeModel {
 public:
  virtual ~PsfdeModel() = default;

  virtual Eigen::Index dim() const = 0;
  virtual Eigen::Index brownian_dim() const = 0;
  virtual const ThetaLower& theta_lower() const = 0;
  virtual std::string id() const { return "custom"; }

  virtual void drift_into(const Segment<Scalar>& seg, Scalar t, Eigen::Ref<Vector<Scalar>> out) const = 0;
  virtual void diffusion_into(const Segment<Scalar>& seg, Scalar t, Eigen::Ref<Matrix<Scalar>> out) const = 0;

  /// Both coefficients at once; override when they share work.
  virtual void coefficients_into(const Segment<Scalar>& seg, Scalar t, Eigen::Ref<Vector<Scalar>> f,
                                 Eigen::Ref<Matrix<Scalar>> g) const {
    drift_into(seg, t, f);
    diffusion_into(seg, t, g);
  }

  Vector<Scalar> eval_drift(const Segment<Scalar>& seg, Scalar t) const {
    Vector<Scalar> out(dim());
    drift_into(seg, t, out);
    return out;
  }

  Matrix<Scalar> eval_diffusion(const Segment<Scalar>& seg, Scalar t) const {
    Matrix<Scalar> out(dim(), brownian_dim());
    diffusion_into(seg, t, out);
    return out;
  }
};

/// Segment given by an arbitrary callable, for oracles and property tests.
template <typename Scalar = double>
class FunctionSegment final : public Segment<Scalar> {
 public:
  using Fn = std::function<Vector<Scalar>(Scalar)>;

  FunctionSegment(Eigen::Index dim, Scalar theta_lower, Fn fn) : dim_(dim), theta_lower_(theta_lower), fn_(std::move(fn)) {}

  /// phi(theta) = value for every theta.
  static FunctionSegment constant(const Vector<Scalar>& value, Scalar theta_lower) {
    return FunctionSegment(value.size(), theta_lower, [value](Scalar) { return value; });
  }

  Eigen::Index dim() const override { return dim_; }
  Scalar theta_lower() const override { return theta_lower_; }
  void eval_theta_into(Scalar theta, Eigen::Ref<Vector<Scalar>> out) const override { out = fn_(theta); }

 private:
  Eigen::Index dim_;
  Scalar theta_lower_;
  Fn fn_;
};

/// f(phi, t) = a phi(1) + b e^{-beta t} int |phi(theta)| dnu(theta)
/// g(phi, t) = c e^{-beta t} int |phi(theta)| dnu(theta)
///
/// The absolute value is taken componentwise; with use_abs = false the
/// integrand is phi(theta) itself and the model is linear. |.| is
/// 1-Lipschitz, so Lipschitz-type constants valid for the linear integrand
/// remain valid with it.
///
/// The diffusion is an n x 1 column when brownian_dim = 1 and the diagonal
/// matrix diag(c I(phi)) when brownian_dim = n.
template <typename Scalar = double>
class PantographIntegralModel final : public PsfdeModel<Scalar> {
 public:
  struct Coefficients {
    double a = 0.0;
    double b = 0.0;
    double c = 0.0;
    double beta = 0.0;
    bool use_abs = true;
  };

  PantographIntegralModel(Eigen::Index dim, double theta_lower, Coefficients coeffs, MeasureSpec measure,
                          Eigen::Index brownian_dim = 1)
      : dim_(dim), brownian_dim_(brownian_dim), theta_lower_(theta_lower), coeffs_(coeffs), measure_(std::move(measure)) {
    if (dim < 1) throw std::invalid_argument("PantographIntegralModel: dim must be positive");
    if (brownian_dim != 1 && brownian_dim != dim)
      throw std::invalid_argument("PantographIntegralModel: brownian_dim must be 1 or dim");
    if (!(coeffs.beta >= 0.0)) throw std::invalid_argument("PantographIntegralModel: beta must be nonnegative");
    measure_.validate(theta_lower);
  }

  Eigen::Index dim() const override { return dim_; }
  Eigen::Index brownian_dim() const override { return brownian_dim_; }
  const ThetaLower& theta_lower() const override { return theta_lower_; }
  std::string id() const override { return id_; }

  const Coefficients& coefficients() const { return coeffs_; }
  const MeasureSpec& measure() const { return measure_; }

  /// Stability constants (lambda_1..lambda_4) attached to a model instance.
  std::optional<std::array<double, 4>> lambdas;
  /// Upper end of the measure support used by the polynomial analysis.
  std::optional<double> theta_upper;

  PantographIntegralModel& named(std::string id) {
    id_ = std::move(id);
    return *this;
  }

  PantographIntegralModel with_measure(MeasureSpec measure) const {
    PantographIntegralModel copy = *this;
    measure.validate(theta_lower_.value());
    copy.measure_ = std::move(measure);
    return copy;
  }

  void drift_into(const Segment<Scalar>& seg, Scalar t, Eigen::Ref<Vector<Scalar>> out) const override {
    Vector<Scalar> integral(dim_);
    integral_into(seg, t, integral);
    drift_from(seg, integral, out);
  }

  void diffusion_into(const Segment<Scalar>& seg, Scalar t, Eigen::Ref<Matrix<Scalar>> out) const override {
    Vector<Scalar> integral(dim_);
    integral_into(seg, t, integral);
    diffusion_from(integral, out);
  }

  void coefficients_into(const Segment<Scalar>& seg, Scalar t, Eigen::Ref<Vector<Scalar>> f,
                         Eigen::Ref<Matrix<Scalar>> g) const override {
    Vector<Scalar> integral(dim_);
    integral_into(seg, t, integral);
    drift_from(seg, integral, f);
    diffusion_from(integral, g);
  }

  /// e^{-beta t} sum_i w_i |phi(theta_i)| (or phi(theta_i) without use_abs).
  void integral_into(const Segment<Scalar>& seg, Scalar t, Eigen::Ref<Vector<Scalar>> out) const {
    if (seg.dim() != dim_) throw std::invalid_argument("PantographIntegralModel: segment dimension mismatch");
    out.setZero();
    if (coeffs_.b == 0.0 && coeffs_.c == 0.0) return;
    Vector<Scalar> phi(dim_);
    for (const auto& atom : measure_.atoms) {
      seg.eval_theta_into(static_cast<Scalar>(atom.theta), phi);
      if (coeffs_.use_abs)
        out += static_cast<Scalar>(atom.weight) * phi.cwiseAbs();
      else
        out += static_cast<Scalar>(atom.weight) * phi;
    }
    if (coeffs_.beta != 0.0) out *= std::exp(-static_cast<Scalar>(coeffs_.beta) * t);
  }

 private:
  void drift_from(const Segment<Scalar>& seg, const Vector<Scalar>& integral, Eigen::Ref<Vector<Scalar>> out) const {
    if (coeffs_.a != 0.0) {
      seg.eval_theta_into(Scalar(1), out);
      out *= static_cast<Scalar>(coeffs_.a);
    } else {
      out.setZero();
    }
    out += static_cast<Scalar>(coeffs_.b) * integral;
  }

  void diffusion_from(const Vector<Scalar>& integral, Eigen::Ref<Matrix<Scalar>> out) const {
    if (brownian_dim_ == 1) {
      out.col(0) = static_cast<Scalar>(coeffs_.c) * integral;
    } else {
      out.setZero();
      out.diagonal() = static_cast<Scalar>(coeffs_.c) * integral;
    }
  }

  Eigen::Index dim_;
  Eigen::Index brownian_dim_;
  ThetaLower theta_lower_;
  Coefficients coeffs_;
  MeasureSpec measure_;
  std::string id_ = "integral";
};

/// Model from two callables; the library-level extension point.
template <typename Scalar = double>
class FunctionalModel final : public PsfdeModel<Scalar> {
 public:
  using DriftFn = std::function<Vector<Scalar>(const Segment<Scalar>&, Scalar)>;
  using DiffusionFn = std::function<Matrix<Scalar>(const Segment<Scalar>&, Scalar)>;

  FunctionalModel(Eigen::Index dim, Eigen::Index brownian_dim, double theta_lower, DriftFn drift, DiffusionFn diffusion,
                  std::string id = "functional")
      : dim_(dim), brownian_dim_(brownian_dim), theta_lower_(theta_lower), drift_(std::move(drift)),
        diffusion_(std::move(diffusion)), id_(std::move(id)) {}

  Eigen::Index dim() const override { return dim_; }
  Eigen::Index brownian_dim() const override { return brownian_dim_; }
  const ThetaLower& theta_lower() const override { return theta_lower_; }
  std::string id() const override { return id_; }

  void drift_into(const Segment<Scalar>& seg, Scalar t, Eigen::Ref<Vector<Scalar>> out) const override {
    out = drift_(seg, t);
  }
  void diffusion_into(const Segment<Scalar>& seg, Scalar t, Eigen::Ref<Matrix<Scalar>> out) const override {
    out = diffusion_(seg, t);
  }

 private:
  Eigen::Index dim_;
  Eigen::Index brownian_dim_;
  ThetaLower theta_lower_;
  DriftFn drift_;
  DiffusionFn diffusion_;
  std::string id_;
};

// Built-in models ---------------------------------------------------------

/// f = -1.1 phi(1) + 0.04 int e^{-0.7t}|phi| dnu, g = 0.2 int e^{-0.7t}|phi| dnu,
/// nu on [3/4, 1]; exponentially stable with lambda = (2.16, 0.08, 1.23, 0.17).
template <typename Scalar = double>
PantographIntegralModel<Scalar> make_example_41(int n_atoms = 16) {
  PantographIntegralModel<Scalar> m(1, 0.75, {-1.1, 0.04, 0.2, 0.7, true}, MeasureSpec::uniform(0.75, 1.0, n_atoms));
  m.lambdas = std::array<double, 4>{2.16, 0.08, 1.23, 0.17};
  return m.named("example41");
}

/// f = -0.4 phi(1) + 0.04 int |phi| dnu, g = 0.3 int |phi| dnu, nu on [3/4, 4/5];
/// polynomially stable with lambda = (0.76, 0.13, 0.19, 0.09).
template <typename Scalar = double>
PantographIntegralModel<Scalar> make_example_42(int n_atoms = 16) {
  PantographIntegralModel<Scalar> m(1, 0.75, {-0.4, 0.04, 0.3, 0.0, true}, MeasureSpec::uniform(0.75, 0.8, n_atoms));
  m.lambdas = std::array<double, 4>{0.76, 0.13, 0.19, 0.09};
  m.theta_upper = 0.8;
  return m.named("example42");
}

/// Linear integral model f = -phi(1) + 0.02 int e^{-0.8t} phi dnu, g = 0.1 int e^{-0.8t} phi dnu,
/// uniform nu on [3/4, 1].
template <typename Scalar = double>
PantographIntegralModel<Scalar> make_linear_model(int n_atoms = 16) {
  PantographIntegralModel<Scalar> m(1, 0.75, {-1.0, 0.02, 0.1, 0.8, false}, MeasureSpec::uniform(0.75, 1.0, n_atoms));
  return m.named("linear");
}

/// Linear point-delay pantograph SDE dx = (-x(t) + 0.5 x(3t/4)) dt + x(3t/4) dB,
/// i.e. the integral family with nu = delta_{3/4}.
template <typename Scalar = double>
PantographIntegralModel<Scalar> make_point_delay_model() {
  PantographIntegralModel<Scalar> m(1, 0.75, {-1.0, 0.5, 1.0, 0.0, false}, MeasureSpec::dirac(0.75));
  return m.named("pointdelay");
}

/// f = g = 0.
template <typename Scalar = double>
PantographIntegralModel<Scalar> make_zero_model() {
  PantographIntegralModel<Scalar> m(1, 0.75, {0.0, 0.0, 0.0, 0.0, false}, MeasureSpec::uniform(0.75, 1.0, 1));
  return m.named("zero");
}

/// Deterministic f = -0.5 phi(1), g = 0.
template <typename Scalar = double>
PantographIntegralModel<Scalar> make_decay_model() {
  PantographIntegralModel<Scalar> m(1, 0.75, {-0.5, 0.0, 0.0, 0.0, false}, MeasureSpec::uniform(0.75, 1.0, 1));
  return m.named("decay");
}

inline const std::vector<std::string>& builtin_model_names() {
  static const std::vector<std::string> names{"example41", "example42", "linear", "pointdelay", "zero", "decay"};
  return names;
}

template <typename Scalar = double>
std::optional<PantographIntegralModel<Scalar>> make_builtin(const std::string& name, int n_atoms = 16) {
  if (name == "example41") return make_example_41<Scalar>(n_atoms);
  if (name == "example42") return make_example_42<Scalar>(n_atoms);
  if (name == "linear") return make_linear_model<Scalar>(n_atoms);
  if (name == "pointdelay") return make_point_delay_model<Scalar>();
  if (name == "zero") return make_zero_model<Scalar>();
  if (name == "decay") return make_decay_model<Scalar>();
  return std::nullopt;
}

}  // namespace panto
