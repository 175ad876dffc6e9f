#pragma once

// Natural direct and indirect effects with S read as a mediator. Cells are
// p_{ys.z} = law.cell(y, s, z).

#include <optional>

#include "partialid/lp.hpp"

namespace partialid {

template <class Scalar>
Scalar total_effect(const ObservedLaw<Scalar>& law) {
  return law.y_mean(1) - law.y_mean(0);
}

// Sharp bounds with no assumption beyond randomized Z.
template <class Scalar>
Interval<Scalar> nde_bounds(const ObservedLaw<Scalar>& law, int z) {
  using std::max;
  using std::min;
  auto p = [&](int y, int s, int zz) -> const Scalar& { return law.cell(y, s, zz); };
  const Scalar one(1);
  if (z == 0) {
    const Scalar lo = max({Scalar(-p(1, 1, 0) - p(1, 0, 0)),
                           Scalar(p(1, 1, 1) + p(0, 1, 0) - one - p(1, 0, 0)),
                           Scalar(p(1, 0, 1) + p(0, 0, 0) - one - p(1, 1, 0))});
    const Scalar hi = min({Scalar(p(0, 1, 0) + p(0, 0, 0)),
                           Scalar(one - p(0, 0, 1) + p(0, 1, 0) - p(1, 0, 0)),
                           Scalar(one - p(0, 1, 1) + p(0, 0, 0) - p(1, 1, 0))});
    return Interval<Scalar>::make_rounded(lo, hi);
  }
  if (z != 1) throw ValidationError("mediation", "z must be 0 or 1");
  const Scalar lo = max({Scalar(-p(0, 1, 1) - p(0, 0, 1)),
                         Scalar(p(0, 0, 0) - one - p(0, 1, 1) + p(1, 0, 1)),
                         Scalar(p(0, 1, 0) - one - p(0, 0, 1) + p(1, 1, 1))});
  const Scalar hi = min({Scalar(p(1, 1, 1) + p(1, 0, 1)),
                         Scalar(one - p(0, 1, 1) + p(1, 0, 1) - p(1, 1, 0)),
                         Scalar(one - p(0, 0, 1) + p(1, 1, 1) - p(1, 0, 0))});
  return Interval<Scalar>::make_rounded(lo, hi);
}

// Per-state contribution to NDE_z: Y(1, S(z)) - Y(0, S(z)).
inline StateObjective nde_objective(int z) {
  return [z](const LatentStateSpace& space, std::size_t st) {
    const int s = space.value(st, "S(" + std::to_string(z) + ")");
    const std::string arm = "," + std::to_string(s) + ")";
    return space.value(st, "Y(1" + arm) - space.value(st, "Y(0" + arm);
  };
}

inline AssumptionSet mediation_monotone_assumptions() {
  AssumptionSet a;
  a.monotone_S01 = true;
  a.monotone_Y_in_z = true;
  a.monotone_Y_in_s = true;
  return a;
}

// NDE_z bounds from the LP engine over the latent states allowed by
// `assumptions`.
template <class Scalar>
LpBounds<Scalar> nde_bounds_lp(const ObservedLaw<Scalar>& law, int z,
                               const AssumptionSet& assumptions = {}) {
  if (z != 0 && z != 1) throw ValidationError("mediation", "z must be 0 or 1");
  if (!law.outcome_defined_when_s0()) {
    throw DomainError("mediation", "mediation bounds need the outcome recorded for both values of S");
  }
  const auto space = LatentStateSpace::build(potential_outcome_components(), assumptions);
  return solve_bounds(build_margin_program(space, law, nde_objective(z)));
}

// Sharp bounds under S(0) <= S(1), Y(0,s) <= Y(1,s) and Y(z,0) <= Y(z,1).
// They do not depend on z. The law is first checked against the testable
// implications of those assumptions by LP feasibility.
template <class Scalar>
Interval<Scalar> nde_bounds_monotone(const ObservedLaw<Scalar>& law) {
  using std::max;
  nde_bounds_lp(law, 0, mediation_monotone_assumptions());  // throws InfeasibleError
  auto p = [&](int y, int s, int z) -> const Scalar& { return law.cell(y, s, z); };
  const Scalar a = p(0, 1, 0) - p(0, 1, 1);
  const Scalar b = p(1, 0, 1) - p(1, 0, 0);
  const Scalar lo = max({Scalar(0), a, b, Scalar(a + b)});
  const Scalar hi = p(1, 0, 1) + p(1, 1, 1) - p(1, 0, 0) - p(1, 1, 0);
  return Interval<Scalar>::make_rounded(lo, hi);
}

// NIE_z = total - NDE_{1-z}.
template <class Scalar>
Interval<Scalar> nie_bounds(const ObservedLaw<Scalar>& law, int z) {
  const Scalar total = total_effect(law);
  const Interval<Scalar> nde = nde_bounds(law, 1 - z);
  return Interval<Scalar>::make_rounded(total - nde.hi, total - nde.lo);
}

template <class Scalar>
Interval<Scalar> nie_from_nde(const Scalar& total, const Interval<Scalar>& nde_other) {
  return Interval<Scalar>::make_rounded(total - nde_other.hi, total - nde_other.lo);
}

template <class Scalar>
struct IdentifiedMediation {
  std::array<Scalar, 2> nde{};
  std::array<Scalar, 2> nie{};
};

// Under cross-world independence of Y(z,s) and S:
//   NDE_z = (-1)^z sum_s {E[Y|Z=1-z,S=s] - E[Y|Z=z,S=s]} Pr[S=s|Z=z]
//   NIE_z = (-1)^z sum_s E[Y|Z=z,S=s] {Pr[S=s|Z=1-z] - Pr[S=s|Z=z]}
template <class Scalar>
IdentifiedMediation<Scalar> identified_effects(const ObservedLaw<Scalar>& law) {
  std::array<std::array<Scalar, 2>, 2> ey{};  // [z][s]
  for (int z = 0; z < 2; ++z) {
    for (int s = 0; s < 2; ++s) {
      const Scalar ps = law.s_prob(s, z);
      if (!(ps > Scalar(0))) {
        throw DomainError("mediation", "E[Y|Z=" + std::to_string(z) + ",S=" + std::to_string(s) +
                                           "] is undefined: Pr[S=" + std::to_string(s) + "|Z=" +
                                           std::to_string(z) + "] = 0");
      }
      ey[z][s] = law.cell(1, s, z) / ps;
    }
  }
  IdentifiedMediation<Scalar> out;
  for (int z = 0; z < 2; ++z) {
    const int other = 1 - z;
    Scalar nde(0);
    Scalar nie(0);
    for (int s = 0; s < 2; ++s) {
      nde += (ey[other][s] - ey[z][s]) * law.s_prob(s, z);
      nie += ey[z][s] * (law.s_prob(s, other) - law.s_prob(s, z));
    }
    out.nde[z] = z == 0 ? nde : Scalar(-nde);
    out.nie[z] = z == 0 ? nie : Scalar(-nie);
  }
  return out;
}

template <class Scalar>
struct MediationEffects {
  Scalar total{};
  std::array<Interval<Scalar>, 2> nde{};
  std::array<Interval<Scalar>, 2> nie{};
  std::optional<IdentifiedMediation<Scalar>> identified;
};

// Bounds for both z. With `monotone` the narrower z-free NDE bounds are used
// for both NDE_0 and NDE_1.
template <class Scalar>
MediationEffects<Scalar> mediation_effects(const ObservedLaw<Scalar>& law, bool monotone) {
  MediationEffects<Scalar> out;
  out.total = total_effect(law);
  if (monotone) {
    const auto nde = nde_bounds_monotone(law);
    out.nde = {nde, nde};
  } else {
    out.nde = {nde_bounds(law, 0), nde_bounds(law, 1)};
  }
  for (int z = 0; z < 2; ++z) out.nie[z] = nie_from_nde(out.total, out.nde[1 - z]);
  try {
    out.identified = identified_effects(law);
  } catch (const DomainError&) {
    out.identified.reset();
  }
  return out;
}

}  // namespace partialid
