#pragma once

// Marginal structural model with identity link
//   E[Y(zbar, t) | X(0)] = b0 + b1 cum[zbar(t-1)] + b2 t + b3' X(0),
//   cum[zbar(t-1)] = z(1) + ... + z(t-1),  t = 1..tau,
// fit by IPTW, plus the sign-form sensitivity adjustment of the outcome.

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace partialid {

// Visits 0..tau. z[t] and x[t] are recorded at every visit; y[t] for t >= 1
// (y[0] is NaN).
struct LongitudinalRecord {
  std::int64_t id = 0;
  std::vector<int> z;
  std::vector<Eigen::VectorXd> x;
  std::vector<double> y;

  int tau() const { return static_cast<int>(z.size()) - 1; }
  const Eigen::VectorXd& baseline() const { return x.front(); }
};

using Cohort = std::vector<LongitudinalRecord>;

// Generator. A latent U ~ N(0,1) shifts later covariates and the outcome, and
// treatment depends on the previous treatment and current covariates only,
// so conditionally independent treatment assignment holds unless
// violation_gamma != 0. In that case each outcome also carries
// violation_gamma * sum_{k<t} (Z(k) - p_k), p_k the true treatment
// probability, which is exactly the sign-form departure with that gamma.
struct MsmSpec {
  int tau = 4;
  double beta0 = 0.0;
  double beta1 = 1.0;
  double beta2 = 0.5;
  std::vector<double> beta3 = {0.5};  // one entry per covariate

  double treat_intercept = -0.2;
  double treat_prev = 0.8;      // log odds shift for z(k-1) = 1
  double x_autocorr = 0.5;      // x(k) = rho x(k-1) + u_on_x U + treat_on_x z(k-1) + noise
  double u_on_x = 1.0;
  double treat_on_x = -0.5;
  double x_noise = 1.0;
  double u_on_y = 1.0;
  double y_noise = 1.0;
  double violation_gamma = 0.0;

  int covariate_dim() const { return static_cast<int>(beta3.size()); }
  void validate() const;
};

// confounding_strength is the log odds coefficient of each current covariate
// in the treatment model; 0 gives treatment unrelated to covariates.
Cohort simulate_cohort(const MsmSpec& spec, double confounding_strength, std::int64_t n,
                       std::uint64_t seed);

// Seed for replicate r of a study seeded with `seed`.
std::uint64_t replicate_seed(std::uint64_t seed, std::uint64_t r);

// Per-visit logistic models. Visit 0 uses (1, x(0)), later visits
// (1, z(k-1), x(k)); the numerator models drop x.
struct TreatmentModel {
  std::vector<Eigen::VectorXd> denominator;  // per visit
  std::vector<Eigen::VectorXd> numerator;
  double lower = 0.01;
  double upper = 0.99;
  int truncated = 0;  // fitted probabilities clipped to [lower, upper]

  // Pr[Z(k) = 1 | history], truncated.
  double prob(const LongitudinalRecord& r, int k) const;
  double prob_marginal(const LongitudinalRecord& r, int k) const;
};

TreatmentModel fit_treatment_model(const Cohort& cohort);

struct IptwResult {
  Eigen::VectorXd eta;  // (eta0, eta1, eta2, eta3...)
  double eta1 = 0.0;
  double se = 0.0;  // cluster-robust sandwich, clusters are subjects
  double max_weight = 0.0;
};

// Weighted least squares of y(t) on (1, cum, t, x(0)) over all (i, t) with
// stabilized weights prod_k f[z(k)|zbar(k-1)] / f[z(k)|zbar(k-1), xbar(k)].
IptwResult iptw_estimate(const Cohort& cohort, const TreatmentModel& model);

// Unweighted fit of the same regression.
IptwResult naive_estimate(const Cohort& cohort);

// Departure from conditionally independent treatment assignment,
// c(t, k, ...) = gamma (2 z(k) - 1). Only the sign form is supported.
enum class CFunctionForm { brumback_sign };

struct CFunctionSpec {
  CFunctionForm form = CFunctionForm::brumback_sign;
  double gamma = 0.0;
};

// Y(t) - b with b = sum_{k<t} c(t, k, ...) f[1 - z(k) | history], f fitted.
Cohort bias_adjust(const Cohort& cohort, const TreatmentModel& model, const CFunctionSpec& c);

struct MsmSweepPoint {
  double gamma = 0.0;
  double eta1 = 0.0;
  double se = 0.0;
};

// Sorted by gamma; the treatment model is fit once and held fixed.
std::vector<MsmSweepPoint> sensitivity_sweep_msm(const Cohort& cohort,
                                                 const std::vector<double>& gammas);

// id,visit,z,x,y with one x column per covariate (x or x1..xp).
void write_cohort_csv(std::ostream& out, const Cohort& cohort);
Cohort read_cohort_csv(std::istream& in);

}  // namespace partialid
