#pragma once

// Bounds on linear functionals of a latent response-type law. The decision
// variable is q(l) = Pr[L = l] over the admissible states l; the observed
// margins Pr[Y=y, S=s | Z=z] are linear in q.

#include <cmath>
#include <cstdint>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "partialid/data.hpp"
#include "partialid/interval.hpp"

namespace partialid {

struct AssumptionSet {
  bool monotonicity_S = false;         // S(1) >= S(0) (compliance)
  bool exclusion_restriction = false;  // Y(0,s) = Y(1,s)
  bool monotone_S01 = false;           // S(0) <= S(1) (mediation)
  bool monotone_Y_in_z = false;        // Y(0,s) <= Y(1,s)
  bool monotone_Y_in_s = false;        // Y(z,0) <= Y(z,1)
  // Components held at a fixed value, e.g. {"S(0)", 1}.
  std::vector<std::pair<std::string, int>> pinned;
};

// Y(0,0), Y(0,1), Y(1,0), Y(1,1), S(0), S(1): Y(z,s) is the outcome under
// assignment z and intermediate s.
std::vector<std::string> potential_outcome_components();

class LatentStateSpace {
 public:
  // Enumerates all binary vectors over the components and drops those that
  // violate an enabled assumption. Throws InfeasibleError if none survive.
  static LatentStateSpace build(std::vector<std::string> components,
                                const AssumptionSet& assumptions);

  const std::vector<std::string>& components() const { return components_; }
  const std::vector<std::uint32_t>& states() const { return states_; }
  std::size_t size() const { return states_.size(); }

  int index_of(const std::string& component) const;  // -1 if absent
  int value(std::size_t state, const std::string& component) const;
  std::string describe(std::size_t state) const;

  // Same states listed in a different order: result[i] = states[order[i]].
  LatentStateSpace permuted(const std::vector<std::size_t>& order) const;

 private:
  std::vector<std::string> components_;
  std::vector<std::uint32_t> states_;  // bit i is component i
};

inline LatentStateSpace build_state_space(std::vector<std::string> components,
                                          const AssumptionSet& assumptions) {
  return LatentStateSpace::build(std::move(components), assumptions);
}

// min / max objective . q subject to A q = b, q >= 0, sum q = 1.
template <class Scalar = double>
struct LinearProgram {
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

  Vector objective;
  Matrix A;
  Vector b;
  std::vector<std::string> labels;  // one per row of A

  static LinearProgram make(Vector objective, Matrix A, Vector b, std::vector<std::string> labels);

  Eigen::Index num_states() const { return objective.size(); }
  Eigen::Index num_constraints() const { return A.rows(); }
};

template <class Scalar = double>
struct LpBounds {
  Interval<Scalar> bounds;
  typename LinearProgram<Scalar>::Vector argmin;  // latent law attaining lo
  typename LinearProgram<Scalar>::Vector argmax;  // latent law attaining hi
};

// Two-phase dense-tableau simplex with Bland's rule. Exact for Rational,
// 1e-10 feasibility tolerance for double. Redundant rows are detected after
// phase one and dropped. Infeasible margins raise InfeasibleError with the
// residual A q - b at the phase-one optimum.
template <class Scalar>
LpBounds<Scalar> solve_bounds(const LinearProgram<Scalar>& lp);

// Test oracle: enumerates every basic feasible solution. At most 16 states
// and 10 constraints.
Interval<double> vertex_oracle(const LinearProgram<double>& lp);

// Objective coefficient per state.
using StateObjective = std::function<int(const LatentStateSpace&, std::size_t)>;

// One equality row per observed cell: Pr[Y=y, S=s | Z=z] = sum of q over
// states with S(z) = s and Y(z, s) = y. All eight rows are kept.
template <class Scalar>
LinearProgram<Scalar> build_margin_program(const LatentStateSpace& space,
                                           const ObservedLaw<Scalar>& law,
                                           const StateObjective& objective);

// GATE = Pr[Y(., 1) = 1] - Pr[Y(., 0) = 1] under the exclusion restriction.
int gate_objective(const LatentStateSpace& space, std::size_t state);

template <class Scalar>
LinearProgram<Scalar> build_gate_program(const ObservedLaw<Scalar>& law,
                                         const AssumptionSet& assumptions);

// lo = -1 + max_z p_{11.z} + max_z p_{00.z}
// hi =  1 - max_z p_{01.z} - max_z p_{10.z}
template <class Scalar>
Interval<Scalar> gate_closed_form(const ObservedLaw<Scalar>& law) {
  using std::max;
  const Scalar one(1);
  const Scalar lo = -one + max(law.cell(1, 1, 0), law.cell(1, 1, 1)) +
                    max(law.cell(0, 0, 0), law.cell(0, 0, 1));
  const Scalar hi = one - max(law.cell(0, 1, 0), law.cell(0, 1, 1)) -
                    max(law.cell(1, 0, 0), law.cell(1, 0, 1));
  if (hi < lo && lo - hi > ScalarTraits<Scalar>::tolerance()) {
    throw InfeasibleError("lp", "closed-form GATE bounds cross; the law violates the assumptions",
                          {to_double(lo - hi)}, {"lo - hi"});
  }
  return Interval<Scalar>::make_rounded(lo, hi);
}

// (E[Y|Z=1] - E[Y|Z=0]) / (E[S|Z=1] - E[S|Z=0]).
template <class Scalar>
Scalar iv_estimand(const ObservedLaw<Scalar>& law) {
  const Scalar den = law.s_prob(1, 1) - law.s_prob(1, 0);
  using std::abs;
  if (abs(den) <= ScalarTraits<Scalar>::tolerance()) {
    throw DomainError("lp", "E[S|Z=1] = E[S|Z=0]; the instrument does not move treatment and the "
                            "IV estimand is undefined");
  }
  return (law.y_mean(1) - law.y_mean(0)) / den;
}

}  // namespace partialid
