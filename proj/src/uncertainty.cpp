#include "partialid/uncertainty.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "partialid/normal.hpp"

namespace partialid {

BoundEstimates BoundEstimates::make(double beta_l, double beta_u, double sigma_l, double sigma_u,
                                    std::int64_t n) {
  if (!std::isfinite(beta_l) || !std::isfinite(beta_u)) {
    throw ValidationError("uncertainty", "bound estimates must be finite");
  }
  if (!(sigma_l >= 0.0) || !(sigma_u >= 0.0)) {
    throw ValidationError("uncertainty", "standard deviations must be nonnegative");
  }
  if (n < 1) throw ValidationError("uncertainty", "sample size must be positive");
  BoundEstimates be;
  if (beta_u < beta_l) {
    std::swap(beta_l, beta_u);
    std::swap(sigma_l, sigma_u);
  }
  be.beta_l = beta_l;
  be.beta_u = beta_u;
  be.sigma_l = sigma_l;
  be.sigma_u = sigma_u;
  be.n = n;
  return be;
}

double solve_c_alpha(double delta, double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw ValidationError("uncertainty", "alpha must lie in (0,1)");
  if (!(delta >= 0.0)) throw ValidationError("uncertainty", "normalized gap must be nonnegative");
  const double z_one = norm_quantile(1.0 - alpha);
  const double z_two = norm_quantile(1.0 - alpha / 2.0);
  auto h = [&](double c) { return norm_cdf(c + delta) - norm_cdf(-c) - (1.0 - alpha); };
  double lo = z_one - 1e-9;
  double hi = z_two + 1e-9;
  for (int it = 0; it < 200 && hi - lo > 1e-15; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (h(mid) < 0.0) lo = mid;
    else hi = mid;
  }
  // The root lies in [z_{1-alpha}, z_{1-alpha/2}]; clamping only removes
  // rounding at the ends and keeps pointwise inside strong.
  return std::clamp(0.5 * (lo + hi), z_one, z_two);
}

double solve_c_alpha(const BoundEstimates& be, double alpha) {
  const double sigma = std::max(be.sigma_l, be.sigma_u);
  if (!(sigma > 0.0)) {
    throw NumericError("uncertainty", "both bound standard deviations are zero; c_alpha is undefined");
  }
  const double delta = std::sqrt(static_cast<double>(be.n)) * (be.beta_u - be.beta_l) / sigma;
  return solve_c_alpha(delta, alpha);
}

Interval<double> pointwise_interval(const BoundEstimates& be, double alpha) {
  const double c = solve_c_alpha(be, alpha);
  const double rn = std::sqrt(static_cast<double>(be.n));
  return {be.beta_l - c * be.sigma_l / rn, be.beta_u + c * be.sigma_u / rn};
}

Interval<double> strong_interval(const BoundEstimates& be, double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw ValidationError("uncertainty", "alpha must lie in (0,1)");
  const double z = norm_quantile(1.0 - alpha / 2.0);
  const double rn = std::sqrt(static_cast<double>(be.n));
  return {be.beta_l - z * be.sigma_l / rn, be.beta_u + z * be.sigma_u / rn};
}

UncertaintyResult uncertainty_regions(const BoundEstimates& be, double alpha) {
  UncertaintyResult r;
  r.estimates = be;
  r.alpha = alpha;
  r.ignorance = {be.beta_l, be.beta_u};
  r.c_alpha = solve_c_alpha(be, alpha);
  r.pointwise = pointwise_interval(be, alpha);
  r.strong = strong_interval(be, alpha);
  return r;
}

BoundEstimates bound_estimates_from_curve(const SensitivityCurve& curve, const GammaRange& range) {
  if (range.hi < range.lo) throw ValidationError("uncertainty", "gamma range is reversed");
  bool has_lo = false;
  bool has_hi = false;
  const CurvePoint* lowest = nullptr;
  const CurvePoint* highest = nullptr;
  for (const auto& p : curve.points) {
    if (p.gamma < range.lo || range.hi < p.gamma) continue;
    has_lo = has_lo || p.gamma == range.lo;
    has_hi = has_hi || p.gamma == range.hi;
    if (!lowest || p.beta_hat < lowest->beta_hat) lowest = &p;
    if (!highest || p.beta_hat > highest->beta_hat) highest = &p;
  }
  if (!has_lo || !has_hi) {
    throw ValidationError("uncertainty", "sensitivity curve does not cover the gamma range [" +
                                             range.lo.str() + ", " + range.hi.str() + "]");
  }
  const double rn = std::sqrt(static_cast<double>(std::max<std::int64_t>(curve.n, 1)));
  BoundEstimates be = BoundEstimates::make(lowest->beta_hat, highest->beta_hat, lowest->se * rn,
                                           highest->se * rn, std::max<std::int64_t>(curve.n, 1));
  be.gamma_l = lowest->gamma;
  be.gamma_u = highest->gamma;
  return be;
}

UncertaintyResult principal_uncertainty(const ThreeVarCounts& counts, const GammaRange& range,
                                        double alpha, CurveMethod method) {
  std::vector<ExtendedGamma> grid{range.lo};
  if (!(range.hi == range.lo)) grid.push_back(range.hi);
  const SensitivityCurve curve = sensitivity_sweep(counts, grid, method);
  return uncertainty_regions(bound_estimates_from_curve(curve, range), alpha);
}

ThreeVarCounts resample_counts(const ThreeVarCounts& counts, std::uint64_t seed,
                               std::uint64_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)};
  std::mt19937_64 rng(seq);
  ThreeVarCounts::Cells cells{};
  for (int z = 0; z < 2; ++z) {
    std::int64_t remaining = counts.arm_total(z);
    std::int64_t mass_left = remaining;
    for (int k = 0; k < 4; ++k) {
      const int y = k / 2;
      const int s = k % 2;
      const std::int64_t c = counts.count(y, s, z);
      std::int64_t draw = 0;
      if (k == 3 || mass_left == c) {
        draw = remaining;
      } else if (c > 0 && remaining > 0) {
        std::binomial_distribution<std::int64_t> bin(
            remaining, static_cast<double>(c) / static_cast<double>(mass_left));
        draw = bin(rng);
      }
      cells[y][s][z] = draw;
      remaining -= draw;
      mass_left -= c;
    }
  }
  return ThreeVarCounts::from_cells(cells, counts.outcome_defined_when_s0());
}

ConfidenceBand bootstrap_band(const ThreeVarCounts& counts, const CurveEstimator& estimator,
                              const std::vector<ExtendedGamma>& gammas, int B, double alpha,
                              std::uint64_t seed) {
  if (B < 200) throw ValidationError("uncertainty", "bootstrap needs at least 200 replicates");
  if (!(alpha > 0.0 && alpha < 1.0)) throw ValidationError("uncertainty", "alpha must lie in (0,1)");
  if (gammas.empty()) throw ValidationError("uncertainty", "gamma grid is empty");
  std::vector<ExtendedGamma> grid = gammas;
  std::sort(grid.begin(), grid.end());

  ConfidenceBand band;
  band.level = 1.0 - alpha;
  band.replicates = B;
  for (const auto& g : grid) {
    const PrincipalFit fit = estimator(counts, g);
    if (!(fit.se > 0.0)) {
      throw NumericError("uncertainty", "zero standard error at gamma = " + g.str());
    }
    band.points.push_back({g, fit.beta_hat, fit.se, 0.0, 0.0});
  }

  std::vector<double> sup_t;
  sup_t.reserve(B);
  std::uint64_t stream = 0;
  const int max_redraws = 10 * B;
  while (static_cast<int>(sup_t.size()) < B) {
    const ThreeVarCounts star = resample_counts(counts, seed, stream++);
    double t = 0.0;
    bool degenerate = false;
    try {
      for (const auto& p : band.points) {
        const PrincipalFit fit = estimator(star, p.gamma);
        if (!(fit.se > 0.0) || !std::isfinite(fit.beta_hat)) {
          degenerate = true;
          break;
        }
        t = std::max(t, std::abs(fit.beta_hat - p.estimate) / fit.se);
      }
    } catch (const ValidationError&) {
      degenerate = true;
    } catch (const InfeasibleError&) {
      degenerate = true;
    } catch (const NumericError&) {
      degenerate = true;
    }
    if (degenerate) {
      if (++band.redraws > max_redraws) {
        throw NumericError("uncertainty", "too many degenerate bootstrap resamples");
      }
      continue;
    }
    sup_t.push_back(t);
  }
  std::sort(sup_t.begin(), sup_t.end());
  const auto idx = static_cast<std::size_t>(
      std::min<double>(B - 1, std::ceil((1.0 - alpha) * B) - 1.0));
  band.critical_value = std::max(sup_t[idx], norm_quantile(1.0 - alpha / 2.0));
  for (auto& p : band.points) {
    p.lo = p.estimate - band.critical_value * p.se;
    p.hi = p.estimate + band.critical_value * p.se;
  }
  return band;
}

}  // namespace partialid
