#include <cmath>
#include <random>

#include "doctest.h"
#include "partialid/normal.hpp"
#include "partialid/uncertainty.hpp"

using namespace partialid;

namespace {

ThreeVarCounts principal_counts(std::int64_t n0, std::int64_t s0, std::int64_t y0,
                                std::int64_t n1, std::int64_t s1, std::int64_t y1) {
  return ThreeVarCounts::with_merged_s0({{{s0 - y0, s1 - y1}, {y0, y1}}}, {n0 - s0, n1 - s1});
}

ThreeVarCounts pertussis() { return principal_counts(1020, 206, 129, 3845, 548, 176); }

ExtendedGamma fin(double g) { return ExtendedGamma::finite(g); }

GammaRange range(double lo, double hi) { return {fin(lo), fin(hi)}; }

GammaRange whole() { return {ExtendedGamma::minus_infinity(), ExtendedGamma::plus_infinity()}; }

const double z975 = 1.959963984540054;
const double z95 = 1.6448536269514722;

void near(double got, double want, double tol) {
  CHECK(std::abs(got - want) <= tol);
}

}  // namespace

TEST_CASE("critical value anchors") {
  CHECK(std::abs(solve_c_alpha(0.0, 0.05) - z975) < 1e-9);
  CHECK(std::abs(solve_c_alpha(10.0, 0.05) - z95) < 1e-6);
  CHECK_THROWS_AS(solve_c_alpha(1.0, 0.0), ValidationError);
  CHECK_THROWS_AS(solve_c_alpha(1.0, 1.0), ValidationError);
  CHECK_THROWS_AS(solve_c_alpha(-1.0, 0.05), ValidationError);
  CHECK_THROWS_AS(solve_c_alpha(BoundEstimates::make(0.0, 1.0, 0.0, 0.0, 100), 0.05), NumericError);
}

TEST_CASE("critical value residual and monotonicity") {
  for (double alpha : {0.01, 0.05, 0.1, 0.3}) {
    double prev = std::numeric_limits<double>::infinity();
    for (int i = 0; i <= 200; ++i) {
      const double delta = 0.05 * i;
      const double c = solve_c_alpha(delta, alpha);
      CHECK(std::abs(norm_cdf(c + delta) - norm_cdf(-c) - (1.0 - alpha)) < 1e-10);
      CHECK(c <= prev);
      CHECK(c >= norm_quantile(1 - alpha) - 1e-9);
      CHECK(c <= norm_quantile(1 - alpha / 2) + 1e-9);
      if (delta > 0.0 && delta < 3.0) {
        CHECK(c < norm_quantile(1 - alpha / 2));
        CHECK(c > norm_quantile(1 - alpha));
      }
      prev = c;
    }
  }
}

TEST_CASE("bound estimates are put in order") {
  const auto be = BoundEstimates::make(0.5, -0.5, 2.0, 3.0, 100);
  CHECK(be.beta_l == -0.5);
  CHECK(be.beta_u == 0.5);
  CHECK(be.sigma_l == 3.0);
  CHECK(be.sigma_u == 2.0);
  CHECK_THROWS_AS(BoundEstimates::make(0.0, 1.0, -1.0, 1.0, 100), ValidationError);
  CHECK_THROWS_AS(BoundEstimates::make(0.0, 1.0, 1.0, 1.0, 0), ValidationError);
}

TEST_CASE("pertussis uncertainty regions") {
  struct Row {
    GammaRange g;
    double ir[2], pw[2], st[2];
  };
  const Row rows[] = {
      {range(-3, 3), {-0.49, -0.17}, {-0.58, -0.07}, {-0.59, -0.06}},
      {range(-5, 5), {-0.55, -0.15}, {-0.66, -0.05}, {-0.69, -0.03}},
      {range(-10, 10), {-0.57, -0.15}, {-0.70, -0.04}, {-0.73, -0.02}},
      {whole(), {-0.57, -0.15}, {-0.70, -0.04}, {-0.73, -0.02}},
  };
  const auto counts = pertussis();
  for (const auto& row : rows) {
    const auto res = principal_uncertainty(counts, row.g, 0.05);
    near(res.ignorance.lo, row.ir[0], 0.01);
    near(res.ignorance.hi, row.ir[1], 0.01);
    near(res.pointwise.lo, row.pw[0], 0.02);
    near(res.pointwise.hi, row.pw[1], 0.02);
    near(res.strong.lo, row.st[0], 0.02);
    near(res.strong.hi, row.st[1], 0.02);
    CHECK(res.pointwise.contains(res.ignorance));
    CHECK(res.strong.contains(res.pointwise));
    CHECK(res.strong.excludes_zero());
  }
}

TEST_CASE("ten versus infinity agree to two decimals") {
  const auto counts = pertussis();
  const auto ten = principal_uncertainty(counts, range(-10, 10), 0.05);
  const auto inf = principal_uncertainty(counts, whole(), 0.05);
  CHECK(std::round(ten.ignorance.lo * 100) == std::round(inf.ignorance.lo * 100));
  CHECK(std::round(ten.ignorance.hi * 100) == std::round(inf.ignorance.hi * 100));
}

TEST_CASE("point identification with vanishing sigma") {
  const auto be = BoundEstimates::make(-0.3, -0.3, 1e-12, 1e-12, 100);
  const auto res = uncertainty_regions(be, 0.05);
  CHECK(std::abs(res.pointwise.lo + 0.3) < 1e-12);
  CHECK(std::abs(res.pointwise.hi + 0.3) < 1e-12);
  CHECK(res.ignorance.width() == 0.0);
  CHECK(std::abs(res.c_alpha - z975) < 1e-9);
}

TEST_CASE("interval formulas") {
  const auto be = BoundEstimates::make(-0.4, 0.1, 2.0, 1.0, 400);
  const double c = solve_c_alpha(be, 0.05);
  CHECK(c == solve_c_alpha(std::sqrt(400.0) * 0.5 / 2.0, 0.05));
  const auto pw = pointwise_interval(be, 0.05);
  CHECK(pw.lo == doctest::Approx(-0.4 - c * 2.0 / 20.0));
  CHECK(pw.hi == doctest::Approx(0.1 + c * 1.0 / 20.0));
  const auto st = strong_interval(be, 0.05);
  CHECK(st.lo == doctest::Approx(-0.4 - z975 * 2.0 / 20.0));
  CHECK(st.hi == doctest::Approx(0.1 + z975 * 1.0 / 20.0));
}

TEST_CASE("nesting on random inputs") {
  std::mt19937_64 rng(99);
  std::uniform_real_distribution<double> u(-1.0, 1.0), s(0.0, 3.0), a(0.001, 0.5);
  std::uniform_int_distribution<std::int64_t> n(1, 100000);
  for (int rep = 0; rep < 5000; ++rep) {
    double sl = s(rng), su = s(rng);
    if (rep % 7 == 0) sl = 0.0;
    if (sl == 0.0 && su == 0.0) su = 1.0;
    const auto be = BoundEstimates::make(u(rng), u(rng), sl, su, n(rng));
    const auto res = uncertainty_regions(be, a(rng));
    CHECK(res.pointwise.contains(res.ignorance));
    CHECK(res.strong.contains(res.pointwise));
  }
}

TEST_CASE("bound estimates from a curve") {
  const auto counts = pertussis();
  std::vector<ExtendedGamma> grid;
  for (int g = -10; g <= 10; ++g) grid.push_back(fin(g));
  grid.push_back(ExtendedGamma::plus_infinity());
  grid.push_back(ExtendedGamma::minus_infinity());
  const auto curve = sensitivity_sweep(counts, grid);

  const auto five = bound_estimates_from_curve(curve, range(-5, 5));
  near(five.beta_l, -0.55, 0.01);
  near(five.beta_u, -0.15, 0.01);
  CHECK(*five.gamma_l == fin(5));
  CHECK(*five.gamma_u == fin(-5));
  CHECK(five.n == counts.total());

  const auto point = bound_estimates_from_curve(curve, range(0, 0));
  CHECK(point.beta_l == point.beta_u);

  CHECK_THROWS_AS(bound_estimates_from_curve(curve, range(-2.5, 2)), ValidationError);
  CHECK_THROWS_AS(bound_estimates_from_curve(curve, range(-20, 20)), ValidationError);
  CHECK_THROWS_AS(bound_estimates_from_curve(curve, range(3, -3)), ValidationError);
}

TEST_CASE("coverage of the pointwise interval") {
  // Full law with a known odds ratio between the doomed and protected means.
  const double phi_p = 0.06, phi_d = 0.14, theta1 = 0.32, theta0d = 0.62;
  const double gamma0 = 0.5;
  const double logit_d = std::log(theta0d / (1 - theta0d));
  const double theta0p = 1.0 / (1.0 + std::exp(-(logit_d - gamma0)));
  const double truth = theta1 - theta0d;
  const std::int64_t n0 = 1200, n1 = 2400;

  std::mt19937_64 rng(555);
  const int reps = 1000;
  int covered = 0;
  for (int r = 0; r < reps; ++r) {
    const auto s1 = std::binomial_distribution<std::int64_t>(n1, phi_d)(rng);
    const auto y1 = std::binomial_distribution<std::int64_t>(s1, theta1)(rng);
    const auto d0 = std::binomial_distribution<std::int64_t>(n0, phi_d)(rng);
    const auto p0 = std::binomial_distribution<std::int64_t>(n0 - d0, phi_p / (1 - phi_d))(rng);
    const auto y0 = std::binomial_distribution<std::int64_t>(d0, theta0d)(rng) +
                    std::binomial_distribution<std::int64_t>(p0, theta0p)(rng);
    const auto res = principal_uncertainty(principal_counts(n0, d0 + p0, y0, n1, s1, y1), range(-1, 1), 0.05,
                                           CurveMethod::plugin);
    if (res.pointwise.contains(truth)) ++covered;
  }
  CHECK(covered >= 930);
}

TEST_CASE("bootstrap band") {
  const auto counts = pertussis();
  std::vector<ExtendedGamma> grid;
  for (int g = -3; g <= 3; ++g) grid.push_back(fin(g));
  const CurveEstimator est = [](const ThreeVarCounts& c, const ExtendedGamma& g) { return plugin_fit(c, g); };
  const auto band = bootstrap_band(counts, est, grid, 1000, 0.05, 7);
  REQUIRE(band.points.size() == grid.size());
  CHECK(band.replicates == 1000);
  CHECK(band.level == doctest::Approx(0.95));
  CHECK(band.critical_value >= z975);

  double union_lo = 1e9, union_hi = -1e9;
  for (const auto& p : band.points) {
    CHECK(p.lo <= p.estimate);
    CHECK(p.estimate <= p.hi);
    CHECK(p.lo <= p.estimate - z975 * p.se + 1e-12);
    CHECK(p.hi >= p.estimate + z975 * p.se - 1e-12);
    union_lo = std::min(union_lo, p.lo);
    union_hi = std::max(union_hi, p.hi);
  }
  const auto strong = principal_uncertainty(counts, range(-3, 3), 0.05, CurveMethod::plugin).strong;
  CHECK(union_lo <= strong.lo + 1e-9);
  CHECK(union_hi >= strong.hi - 1e-9);

  const auto again = bootstrap_band(counts, est, grid, 1000, 0.05, 7);
  CHECK(again.critical_value == band.critical_value);
  const auto other = bootstrap_band(counts, est, grid, 1000, 0.05, 8);
  CHECK(other.critical_value != band.critical_value);

  CHECK_THROWS_AS(bootstrap_band(counts, est, grid, 199, 0.05, 7), ValidationError);
  CHECK_THROWS_AS(bootstrap_band(counts, est, {}, 500, 0.05, 7), ValidationError);
}

TEST_CASE("resampling keeps arm sizes") {
  const auto counts = pertussis();
  const auto a = resample_counts(counts, 1, 0);
  CHECK(a.arm_total(0) == counts.arm_total(0));
  CHECK(a.arm_total(1) == counts.arm_total(1));
  CHECK_FALSE(a.outcome_defined_when_s0());
  CHECK(resample_counts(counts, 1, 0) == a);
  CHECK_FALSE(resample_counts(counts, 1, 1) == a);
}
