#pragma once

// ATE bounds under unknown treatment selection.

#include <array>
#include <optional>
#include <type_traits>

#include "partialid/data.hpp"
#include "partialid/interval.hpp"

namespace partialid {

// E[Y | Z = z] and Pr[Z = z] for an outcome already scaled to [0, 1].
template <class Scalar = double>
struct AteSummary {
  std::array<Scalar, 2> mean_y{};
  std::array<Scalar, 2> pz{};
  std::optional<std::int64_t> n;

  static AteSummary make(std::array<Scalar, 2> mean_y, std::array<Scalar, 2> pz,
                         std::optional<std::int64_t> n = std::nullopt) {
    using std::abs;
    for (int z = 0; z < 2; ++z) {
      if (mean_y[z] < Scalar(0) || mean_y[z] > Scalar(1)) {
        throw ValidationError("bounds", "E[Y|Z=" + std::to_string(z) + "] outside [0,1]");
      }
      // A degenerate arm (pz = 0 or 1) is allowed; the bounds stay defined.
      if (pz[z] < Scalar(0) || pz[z] > Scalar(1)) {
        throw ValidationError("bounds", "Pr[Z=" + std::to_string(z) + "] outside [0,1]");
      }
    }
    Scalar tol(0);
    if constexpr (!ScalarTraits<Scalar>::exact) tol = Scalar(1e-12);
    if (abs(pz[0] + pz[1] - Scalar(1)) > tol) {
      throw ValidationError("bounds", "arm probabilities do not sum to 1");
    }
    return AteSummary{mean_y, pz, n};
  }

  AteSummary<double> to_double() const {
    return {{partialid::to_double(mean_y[0]), partialid::to_double(mean_y[1])},
            {partialid::to_double(pz[0]), partialid::to_double(pz[1])},
            n};
  }
};

template <class Scalar = double>
AteSummary<Scalar> ate_summary(const TwoArmCounts& c) {
  const std::int64_t n = c.total();
  return AteSummary<Scalar>::make(
      {ScalarTraits<Scalar>::ratio(c.count(1, 0), c.arm_total(0)),
       ScalarTraits<Scalar>::ratio(c.count(1, 1), c.arm_total(1))},
      {ScalarTraits<Scalar>::ratio(c.arm_total(0), n), ScalarTraits<Scalar>::ratio(c.arm_total(1), n)},
      n);
}

// Outcome margin of a three-variable table. Needs Y recorded for every S.
template <class Scalar = double>
AteSummary<Scalar> ate_summary(const ThreeVarCounts& c) {
  if (!c.outcome_defined_when_s0()) {
    throw DomainError("bounds", "outcome margin undefined: Y is not recorded when S=0");
  }
  TwoArmCounts::Cells cells{};
  for (int y = 0; y < 2; ++y)
    for (int z = 0; z < 2; ++z) cells[y][z] = c.count(y, 0, z) + c.count(y, 1, z);
  return ate_summary<Scalar>(TwoArmCounts::from_cells(cells));
}

inline AteSummary<double> ate_summary(const MeanSummary& s) {
  return AteSummary<double>::make(s.mean_y, s.pz, s.n);
}

// Maps arm means of an outcome supported on [lo, hi] to [0, 1]. Effects on
// the rescaled outcome convert back with rescale_effect.
inline MeanSummary rescale_means(MeanSummary s, double lo, double hi) {
  if (!(hi > lo)) throw ValidationError("bounds", "rescale range must satisfy lo < hi");
  for (double& m : s.mean_y) {
    if (m < lo || m > hi) throw ValidationError("bounds", "arm mean outside the rescale range");
    m = (m - lo) / (hi - lo);
  }
  return s;
}

inline Interval<double> rescale_effect(const Interval<double>& unit, double lo, double hi) {
  return {unit.lo * (hi - lo), unit.hi * (hi - lo)};
}

template <class Scalar>
Scalar naive_estimate(const AteSummary<Scalar>& s) {
  return s.mean_y[1] - s.mean_y[0];
}

// lo = E1 p1 - E0 p0 - p1, hi = E1 p1 - E0 p0 + p0.
template <class Scalar>
Interval<Scalar> no_assumption_bounds(const AteSummary<Scalar>& s) {
  const Scalar base = s.mean_y[1] * s.pz[1] - s.mean_y[0] * s.pz[0];
  return Interval<Scalar>::make(base - s.pz[1], base + s.pz[0]);
}

// Monotone treatment selection caps the effect at the naive contrast.
template <class Scalar>
Interval<Scalar> mts_bounds(const AteSummary<Scalar>& s) {
  const auto na = no_assumption_bounds(s);
  return Interval<Scalar>::make(na.lo, naive_estimate(s));
}

// Monotone treatment response puts the floor at zero.
template <class Scalar>
Interval<Scalar> mtr_bounds(const AteSummary<Scalar>& s) {
  return Interval<Scalar>::make(Scalar(0), no_assumption_bounds(s).hi);
}

struct AteAssumptions {
  bool mts = false;
  bool mtr = false;
};

// Intersection of the selected bounds. An empty intersection means the data
// contradict the assumptions taken jointly.
template <class Scalar>
Interval<Scalar> combined_bounds(const AteSummary<Scalar>& s, AteAssumptions a) {
  Interval<Scalar> out = no_assumption_bounds(s);
  if (a.mts) out = mts_bounds(s);
  if (a.mtr) {
    const auto mtr = mtr_bounds(s);
    const auto both = intersect(out, mtr);
    if (!both) {
      throw InfeasibleError("bounds", "MTS and MTR bounds do not intersect; the data contradict the joint assumptions",
                            {to_double(out.hi - mtr.lo)}, {"mts.hi - mtr.lo"});
    }
    out = *both;
  }
  return out;
}

struct ConfounderScenario {
  double gamma0 = 0.0;  // E[Y(z)|U=1] - E[Y(z)|U=0]
  double gamma1 = 0.0;  // Pr[U=1|Z=1] - Pr[U=1|Z=0]

  static ConfounderScenario make(double gamma0, double gamma1) {
    if (!(gamma0 >= -1.0 && gamma0 <= 1.0)) throw ValidationError("bounds", "gamma0 outside [-1,1]");
    if (!(gamma1 >= -1.0 && gamma1 <= 1.0)) throw ValidationError("bounds", "gamma1 outside [-1,1]");
    return {gamma0, gamma1};
  }
};

// The naive contrast carries asymptotic bias gamma0 * gamma1.
inline double bias_adjusted_naive(double naive, const ConfounderScenario& scen) {
  return naive - scen.gamma0 * scen.gamma1;
}

// Values of gamma0 compatible with the observed arm means. Only |gamma1| = 1
// restricts gamma0; at gamma1 = -1 the labels of U swap, so the interval is
// the mirror image of the gamma1 = 1 one.
template <class Scalar>
Interval<Scalar> gamma0_feasible(const AteSummary<Scalar>& s, double gamma1) {
  if (!(gamma1 >= -1.0 && gamma1 <= 1.0)) throw ValidationError("bounds", "gamma1 outside [-1,1]");
  if (std::abs(gamma1) < 1.0) return Interval<Scalar>::make(Scalar(-1), Scalar(1));
  using std::max;
  using std::min;
  const Scalar& e1 = s.mean_y[1];
  const Scalar& e0 = s.mean_y[0];
  const auto pos = Interval<Scalar>::make(max(Scalar(e1 - Scalar(1)), Scalar(-e0)),
                                          min(e1, Scalar(Scalar(1) - e0)));
  if (gamma1 > 0) return pos;
  return Interval<Scalar>::make(-pos.hi, -pos.lo);
}

namespace detail {

template <class F>
auto with_stratum_label(const std::string& label, F&& f) -> decltype(f()) {
  const std::string prefix = "stratum '" + label + "': ";
  try {
    return f();
  } catch (const InfeasibleError& e) {
    throw InfeasibleError(e.module(), prefix + bare_message(e), e.residuals(), e.labels());
  } catch (const DomainError& e) {
    throw DomainError(e.module(), prefix + bare_message(e));
  } catch (const ParseError& e) {
    throw ParseError(e.module(), prefix + bare_message(e));
  } catch (const ValidationError& e) {
    throw ValidationError(e.module(), prefix + bare_message(e));
  } catch (const NumericError& e) {
    throw NumericError(e.module(), prefix + bare_message(e));
  }
}

}  // namespace detail

// Weighted average of within-stratum bounds. bound_fn takes either an
// AteSummary<double> (outcome margin of each stratum) or the stratum's
// ThreeVarCounts.
template <class F>
Interval<double> stratified_bounds(const StratifiedCounts& sc, F&& bound_fn) {
  double lo = 0.0;
  double hi = 0.0;
  for (const auto& st : sc.strata()) {
    const Interval<double> b = detail::with_stratum_label(st.label, [&]() -> Interval<double> {
      if constexpr (std::is_invocable_v<F&, const AteSummary<double>&>) {
        const AteSummary<double> s = std::visit(
            [](const auto& c) { return ate_summary<double>(c); }, st.counts);
        return bound_fn(s);
      } else {
        const auto* three = std::get_if<ThreeVarCounts>(&st.counts);
        if (!three) throw DomainError("bounds", "bound function needs three-variable counts");
        return bound_fn(*three);
      }
    });
    lo += st.weight * b.lo;
    hi += st.weight * b.hi;
  }
  return Interval<double>::make(lo, hi);
}

}  // namespace partialid
