#pragma once

// Preference-probability curves for pairwise ranking losses.
//
// The classical pairwise objective models P(i >_u j) as sigmoid(x) where x is
// the score margin f(i|u) - f(j|u). The generalized curve
//
//     g(x) = (sigmoid(c*x + b) + a) / (1 + a),   a >= 0, c > 0
//
// lifts the lower asymptote to a/(1+a). Its gradient magnitude
// delta_g(x) = -d/dx ln g(x) is bell shaped for a > 0, so negatives that the
// model scores far above the positive contribute little to an update.

#include <cmath>
#include <limits>
#include <string>

#include "hardrank/common.hpp"

namespace hardrank {

template <typename Scalar = double>
class PreferenceCurve {
 public:
  /// The plain logistic curve (0, 0, 1).
  PreferenceCurve() = default;

  PreferenceCurve(Scalar a, Scalar b, Scalar c) : a_(a), b_(b), c_(c) {
    if (!(a >= Scalar(0)) || !std::isfinite(a))
      throw SpecError("preference curve requires finite a >= 0, got " + std::to_string(double(a)));
    if (!(c > Scalar(0)) || !std::isfinite(c))
      throw SpecError("preference curve requires finite c > 0, got " + std::to_string(double(c)));
    if (!std::isfinite(b)) throw SpecError("preference curve requires finite b");
  }

  static PreferenceCurve logistic() { return {}; }

  Scalar a() const noexcept { return a_; }
  Scalar b() const noexcept { return b_; }
  Scalar c() const noexcept { return c_; }

  /// Argument passed to the inner sigmoid.
  Scalar inner(Scalar x) const noexcept { return c_ * x + b_; }

  friend bool operator==(const PreferenceCurve&, const PreferenceCurve&) = default;

 private:
  Scalar a_ = 0;
  Scalar b_ = 0;
  Scalar c_ = 1;
};

template <typename Scalar = double>
struct CurveExtremum {
  Scalar x_max;
  Scalar delta_max;
};

template <typename Scalar>
Scalar sigmoid(Scalar x) noexcept {
  if (x >= Scalar(0)) return Scalar(1) / (Scalar(1) + std::exp(-x));
  const Scalar e = std::exp(x);
  return e / (Scalar(1) + e);
}

/// ln(1 + e^x) without overflow.
template <typename Scalar>
Scalar softplus(Scalar x) noexcept {
  if (x > Scalar(0)) return x + std::log1p(std::exp(-x));
  return std::log1p(std::exp(x));
}

/// -ln sigmoid(x); the per-triple pairwise logistic loss.
template <typename Scalar>
Scalar neg_log_sigmoid(Scalar x) noexcept {
  return softplus(-x);
}

/// Gradient magnitude of the logistic pairwise loss, 1 - sigmoid(x).
/// Evaluated as sigmoid(-x), which is exact in the tail where 1 - sigmoid(x)
/// would cancel.
template <typename Scalar>
Scalar delta_sigma(Scalar x) noexcept {
  return sigmoid(-x);
}

template <typename Scalar>
Scalar g(const PreferenceCurve<Scalar>& curve, Scalar x) noexcept {
  return (sigmoid(curve.inner(x)) + curve.a()) / (Scalar(1) + curve.a());
}

/// -d/dx ln g(x) = c s (1 - s) / (s + a) with s = sigmoid(c x + b).
template <typename Scalar>
Scalar delta_g(const PreferenceCurve<Scalar>& curve, Scalar x) noexcept {
  const Scalar z = curve.inner(x);
  // a = 0 collapses to c * (1 - s); keep that path identical to delta_sigma.
  if (curve.a() == Scalar(0)) return curve.c() * delta_sigma(z);
  const Scalar s = sigmoid(z);
  const Scalar t = sigmoid(-z);
  return curve.c() * s * t / (s + curve.a());
}

/// -ln g(x), evaluated without forming g.
template <typename Scalar>
Scalar neg_log_g(const PreferenceCurve<Scalar>& curve, Scalar x) noexcept {
  const Scalar z = curve.inner(x);
  const Scalar a = curve.a();
  if (a == Scalar(0)) return neg_log_sigmoid(z);
  if (z >= Scalar(0)) {
    // g = 1 - sigmoid(-z) / (1 + a), with sigmoid(-z) small
    return -std::log1p(-sigmoid(-z) / (Scalar(1) + a));
  }
  // sigmoid(z) small; s + a carries no cancellation
  return std::log1p(a) - std::log(sigmoid(z) + a);
}

/// Peak of delta_g. Only defined for a > 0; at a = 0 delta_g is monotone.
template <typename Scalar>
CurveExtremum<Scalar> extremum(const PreferenceCurve<Scalar>& curve) {
  const Scalar a = curve.a(), b = curve.b(), c = curve.c();
  if (!(a > Scalar(0)))
    throw DegenerateCurve("delta_g has no interior maximum when a = 0");
  const Scalar sa = std::sqrt(a);
  const Scalar s1a = std::sqrt(Scalar(1) + a);
  const Scalar x_max = (-b + Scalar(0.5) * (std::log(a) - std::log1p(a))) / c;
  const Scalar delta_max =
      s1a * c / (Scalar(2) * sa + Scalar(2) * a * sa + s1a + Scalar(2) * a * s1a);
  return {x_max, delta_max};
}

/// Upper bound of -ln g over the real line, ln((1 + a) / a); infinite at a = 0.
template <typename Scalar>
Scalar neg_log_g_bound(const PreferenceCurve<Scalar>& curve) noexcept {
  if (curve.a() == Scalar(0)) return std::numeric_limits<Scalar>::infinity();
  return std::log1p(curve.a()) - std::log(curve.a());
}

}  // namespace hardrank
