#pragma once

// Principal stratification with an intermediate S that can only be lowered by
// treatment (S(1) <= S(0)). Strata: immune S(0)=S(1)=0, protected S(0)=1,
// S(1)=0, doomed S(0)=S(1)=1. The target is the treatment effect on Y among
// the doomed.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "partialid/data.hpp"
#include "partialid/interval.hpp"

namespace partialid {

template <class Scalar = double>
struct PrincipalIdentified {
  Scalar mu1{};    // E[Y | S=1, Z=1]
  Scalar mu0{};    // E[Y | S=1, Z=0]
  Scalar pi{};     // Pr[S(1)=1 | S(0)=1] = min{1, ps1_1 / ps1_0}
  Scalar ps1_1{};  // Pr[S=1 | Z=1]
  Scalar ps1_0{};  // Pr[S=1 | Z=0]
  std::optional<std::int64_t> n;

  static PrincipalIdentified from_law(const ObservedLaw<Scalar>& law);
  static PrincipalIdentified from_counts(const ThreeVarCounts& counts) {
    return from_law(empirical_law<Scalar>(counts));
  }
};

struct MonotonicityCheck {
  bool consistent = false;
  double ps1_1 = 0.0;
  double ps1_0 = 0.0;
};

template <class Scalar>
MonotonicityCheck check_monotonicity(const ObservedLaw<Scalar>& law) {
  const Scalar p1 = law.s_prob(1, 1);
  const Scalar p0 = law.s_prob(1, 0);
  return {p1 <= p0, to_double(p1), to_double(p0)};
}

// Sharp bounds on E[Y(1) - Y(0) | doomed].
//   hi = mu1 - max{0, (mu0 - (1 - pi)) / pi}
//   lo = mu1 - min{1, mu0 / pi}
template <class Scalar>
Interval<Scalar> principal_effect_bounds(const PrincipalIdentified<Scalar>& pid) {
  using std::max;
  using std::min;
  if (!(pid.pi > Scalar(0))) {
    throw DomainError("principal", "doomed stratum is empty (Pr[S=1|Z=1] = 0); the effect is undefined");
  }
  const Scalar one(1);
  const Scalar a_lo = max(Scalar(0), Scalar((pid.mu0 - (one - pid.pi)) / pid.pi));
  const Scalar a_hi = min(one, Scalar(pid.mu0 / pid.pi));
  return Interval<Scalar>::make(pid.mu1 - a_hi, pid.mu1 - a_lo);
}

// Log odds ratio gamma = logit E[Y(0)|doomed] - logit E[Y(0)|protected],
// with explicit infinite variants.
class ExtendedGamma {
 public:
  enum class Kind { minus_infinity, finite, plus_infinity };

  static ExtendedGamma finite(double v);
  static ExtendedGamma plus_infinity() { return ExtendedGamma(Kind::plus_infinity, 0.0); }
  static ExtendedGamma minus_infinity() { return ExtendedGamma(Kind::minus_infinity, 0.0); }

  Kind kind() const { return kind_; }
  bool is_finite() const { return kind_ == Kind::finite; }
  double value() const;  // throws for infinite variants
  // Finite stand-in for plotting: infinite variants map to +-cap.
  double capped(double cap = 50.0) const;
  std::string str() const;

  friend bool operator<(const ExtendedGamma& a, const ExtendedGamma& b);
  friend bool operator==(const ExtendedGamma& a, const ExtendedGamma& b) {
    return a.kind_ == b.kind_ && a.value_ == b.value_;
  }

 private:
  ExtendedGamma(Kind k, double v) : kind_(k), value_(v) {}
  Kind kind_;
  double value_;
};

// (a, b) = (E[Y(0)|doomed], E[Y(0)|protected]) solving
//   a pi + b (1 - pi) = mu0  and  logit a - logit b = gamma.
struct DoomedMean {
  double a = 0.0;
  double b = 0.0;
};

DoomedMean solve_doomed_mean(const PrincipalIdentified<double>& pid, const ExtendedGamma& gamma);

// mu1 - a(gamma). Non-increasing in gamma; the infinite variants return the
// ends of principal_effect_bounds.
double beta_of_gamma(const PrincipalIdentified<double>& pid, const ExtendedGamma& gamma);

struct PrincipalFit {
  double beta_hat = 0.0;
  double se = 0.0;
  double loglik = 0.0;
  // phi_immune, phi_protected, phi_doomed, theta1, theta0_doomed, theta0_protected
  std::array<double, 6> theta{};
  int iterations = 0;
  std::vector<std::string> warnings;
};

// Multinomial likelihood over the strata proportions and outcome means with
// the protected-stratum mean tied to the doomed one through gamma. SEs come
// from the inverse observed information and the delta method. Infinite gamma
// falls back to plugin_fit.
PrincipalFit mle_fit(const ThreeVarCounts& counts, const ExtendedGamma& gamma);

// Closed-form estimate with a delta-method SE built from the four binomial
// proportions Pr[S=1|Z=z], E[Y|S=1,Z=z].
PrincipalFit plugin_fit(const ThreeVarCounts& counts, const ExtendedGamma& gamma);

struct CurvePoint {
  ExtendedGamma gamma;
  double beta_hat = 0.0;
  double se = 0.0;
};

struct SensitivityCurve {
  std::vector<CurvePoint> points;  // sorted by gamma
  std::int64_t n = 0;
  std::vector<std::string> warnings;
};

enum class CurveMethod { mle, plugin };

SensitivityCurve sensitivity_sweep(const ThreeVarCounts& counts,
                                   const std::vector<ExtendedGamma>& gammas,
                                   CurveMethod method = CurveMethod::mle);

// Likelihood-ratio checks that the bound estimators are regular, i.e. that
// the truncations inside the bounds are not close to binding.
struct NormalityDiagnostics {
  double ratio = 0.0;  // Pr[S=1|Z=1] / Pr[S=1|Z=0]
  double gap_upper = 0.0;  // |1 - mu0 - ratio|
  double gap_lower = 0.0;  // |mu0 - ratio|
  double stat_upper = 0.0;
  double stat_lower = 0.0;
  double pvalue_upper = 1.0;
  double pvalue_lower = 1.0;
};

NormalityDiagnostics check_normality_conditions(const ThreeVarCounts& counts);

// ---------------------------------------------------------------------------

template <class Scalar>
PrincipalIdentified<Scalar> PrincipalIdentified<Scalar>::from_law(const ObservedLaw<Scalar>& law) {
  using std::min;
  const Scalar p1 = law.s_prob(1, 1);
  const Scalar p0 = law.s_prob(1, 0);
  if (!(p0 > Scalar(0))) {
    throw DomainError("principal", "no control-arm subjects with S=1; E[Y|S=1,Z=0] is undefined");
  }
  if (!(p1 > Scalar(0))) {
    throw DomainError("principal", "doomed stratum is empty (Pr[S=1|Z=1] = 0); the effect is undefined");
  }
  PrincipalIdentified pid;
  pid.ps1_1 = p1;
  pid.ps1_0 = p0;
  pid.mu1 = law.cell(1, 1, 1) / p1;
  pid.mu0 = law.cell(1, 1, 0) / p0;
  pid.pi = min(Scalar(1), Scalar(p1 / p0));
  pid.n = law.n();
  return pid;
}

}  // namespace partialid
