#pragma once

// Inference for a scalar partially identified parameter whose ignorance
// region [beta_l, beta_u] is estimated with asymptotically normal endpoints.

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "partialid/interval.hpp"
#include "partialid/principal.hpp"

namespace partialid {

// sigma_* are on the root-n scale: se = sigma / sqrt(n).
struct BoundEstimates {
  double beta_l = 0.0;
  double beta_u = 0.0;
  double sigma_l = 0.0;
  double sigma_u = 0.0;
  std::int64_t n = 1;
  std::optional<ExtendedGamma> gamma_l;  // where beta_l was attained
  std::optional<ExtendedGamma> gamma_u;

  // Swaps the two ends (with their sigmas) if given in the wrong order.
  static BoundEstimates make(double beta_l, double beta_u, double sigma_l, double sigma_u,
                             std::int64_t n);
};

struct UncertaintyResult {
  BoundEstimates estimates;
  Interval<double> ignorance;
  Interval<double> pointwise;
  Interval<double> strong;
  double c_alpha = 0.0;
  double alpha = 0.05;
};

// Root of Phi(c + delta) - Phi(-c) = 1 - alpha for the normalized gap delta.
double solve_c_alpha(double delta, double alpha);

// delta = sqrt(n) (beta_u - beta_l) / max{sigma_l, sigma_u}.
double solve_c_alpha(const BoundEstimates& be, double alpha);

// [beta_l - c_alpha sigma_l / sqrt(n), beta_u + c_alpha sigma_u / sqrt(n)]
Interval<double> pointwise_interval(const BoundEstimates& be, double alpha);

// Same with z_{1-alpha/2}: covers the whole ignorance region.
Interval<double> strong_interval(const BoundEstimates& be, double alpha);

UncertaintyResult uncertainty_regions(const BoundEstimates& be, double alpha);

struct GammaRange {
  ExtendedGamma lo;
  ExtendedGamma hi;
};

// Extremes of the curve over the points with gamma in the range. Both range
// ends must be on the grid.
BoundEstimates bound_estimates_from_curve(const SensitivityCurve& curve, const GammaRange& range);

// Sensitivity curve at the range ends plus the three regions.
UncertaintyResult principal_uncertainty(const ThreeVarCounts& counts, const GammaRange& range,
                                        double alpha, CurveMethod method = CurveMethod::mle);

using CurveEstimator = std::function<PrincipalFit(const ThreeVarCounts&, const ExtendedGamma&)>;

struct BandPoint {
  ExtendedGamma gamma;
  double estimate = 0.0;
  double se = 0.0;
  double lo = 0.0;
  double hi = 0.0;
};

struct ConfidenceBand {
  std::vector<BandPoint> points;
  double level = 0.95;
  double critical_value = 0.0;  // sup-t quantile used for the whole band
  int replicates = 0;
  int redraws = 0;  // degenerate resamples that were drawn again
};

// Sup-t band from B resamples drawn within each arm. Replicate b uses its own
// generator seeded by (seed, b), so the band does not depend on evaluation
// order. The critical value is never below z_{1-alpha/2}.
ConfidenceBand bootstrap_band(const ThreeVarCounts& counts, const CurveEstimator& estimator,
                              const std::vector<ExtendedGamma>& gammas, int B, double alpha,
                              std::uint64_t seed);

// One multinomial resample of each arm, keeping arm sizes.
ThreeVarCounts resample_counts(const ThreeVarCounts& counts, std::uint64_t seed,
                               std::uint64_t stream);

}  // namespace partialid
