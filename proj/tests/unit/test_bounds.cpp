#include <random>

#include "doctest.h"
#include "partialid/bounds.hpp"

using namespace partialid;

namespace {

TwoArmCounts azt_counts() {
  TwoArmCounts::Cells cells{};
  cells[1][1] = 500;
  cells[0][1] = 900;
  cells[1][0] = 500;
  cells[0][0] = 100;
  return TwoArmCounts::from_cells(cells);
}

AteSummary<double> random_summary(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double p1 = u(rng);
  return AteSummary<double>::make({u(rng), u(rng)}, {1.0 - p1, p1});
}

TwoArmCounts random_counts(std::mt19937_64& rng) {
  std::uniform_int_distribution<int> cell(0, 40);
  TwoArmCounts::Cells c{};
  for (auto& row : c)
    for (auto& v : row) v = cell(rng);
  c[0][0] += 1;
  c[0][1] += 1;
  return TwoArmCounts::from_cells(c);
}

}  // namespace

TEST_CASE("AZT bounds, exact") {
  const auto s = ate_summary<Rational>(azt_counts());
  CHECK(no_assumption_bounds(s) == Interval<Rational>{Rational(-7, 10), Rational(3, 10)});
  CHECK(naive_estimate(s) == Rational(-10, 21));
  CHECK(mts_bounds(s) == Interval<Rational>{Rational(-7, 10), Rational(-10, 21)});
  CHECK(mtr_bounds(s) == Interval<Rational>{Rational(0), Rational(3, 10)});
}

TEST_CASE("AZT bounds, double") {
  const auto s = ate_summary<double>(azt_counts());
  CHECK(naive_estimate(s) == doctest::Approx(-0.476).epsilon(0.002));
  const auto na = no_assumption_bounds(s);
  CHECK(na.lo == doctest::Approx(-0.7));
  CHECK(na.hi == doctest::Approx(0.3));
  CHECK(mts_bounds(s).hi == doctest::Approx(-0.4762).epsilon(1e-3));
}

TEST_CASE("all-zero outcomes") {
  const auto s = AteSummary<double>::make({0.0, 0.0}, {0.5, 0.5});
  const auto na = no_assumption_bounds(s);
  CHECK(na.lo == -0.5);
  CHECK(na.hi == 0.5);
  CHECK(mts_bounds(s).hi == 0.0);
  CHECK(naive_estimate(s) == 0.0);
}

TEST_CASE("degenerate treated arm") {
  const auto s = AteSummary<double>::make({0.0, 1.0}, {0.0, 1.0});
  const auto mtr = mtr_bounds(s);
  CHECK(mtr.lo == 0.0);
  CHECK(mtr.hi == 1.0);
}

TEST_CASE("summary invariants") {
  CHECK_THROWS_AS(AteSummary<double>::make({1.2, 0.0}, {0.5, 0.5}), ValidationError);
  CHECK_THROWS_AS(AteSummary<double>::make({0.2, 0.0}, {0.5, 0.6}), ValidationError);
  CHECK_THROWS_AS(ConfounderScenario::make(1.5, 0.0), ValidationError);
  CHECK_THROWS_AS(ConfounderScenario::make(0.0, -1.1), ValidationError);
}

TEST_CASE("random summaries: width one, nesting") {
  std::mt19937_64 rng(3);
  for (int rep = 0; rep < 2000; ++rep) {
    const auto s = random_summary(rng);
    const auto na = no_assumption_bounds(s);
    CHECK(na.width() == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(na.contains(0.0));
    CHECK(na.lo >= -1.0);
    CHECK(na.hi <= 1.0);
    CHECK(na.contains(mts_bounds(s)));
    CHECK(na.contains(mtr_bounds(s)));
    CHECK(mtr_bounds(s).lo == 0.0);
  }
  // Exact width on rational summaries built from counts.
  for (int rep = 0; rep < 200; ++rep) {
    const auto na = no_assumption_bounds(ate_summary<Rational>(random_counts(rng)));
    CHECK(na.hi - na.lo == Rational(1));
  }
}

TEST_CASE("combining assumptions") {
  const auto s = ate_summary<double>(azt_counts());
  CHECK(combined_bounds(s, {}) == no_assumption_bounds(s));
  CHECK(combined_bounds(s, {true, false}) == mts_bounds(s));
  CHECK(combined_bounds(s, {false, true}) == mtr_bounds(s));
  try {
    combined_bounds(s, {true, true});
    FAIL("expected the joint assumptions to be rejected");
  } catch (const InfeasibleError& e) {
    REQUIRE(e.residuals().size() == 1);
    CHECK(e.residuals()[0] < 0.0);
  }
  // Positive naive contrast: MTS and MTR overlap on [0, naive].
  const auto pos = AteSummary<double>::make({0.2, 0.6}, {0.5, 0.5});
  const auto both = combined_bounds(pos, {true, true});
  CHECK(both.lo == 0.0);
  CHECK(both.hi == doctest::Approx(0.4));
}

TEST_CASE("confounder bias adjustment") {
  CHECK(bias_adjusted_naive(-0.48, ConfounderScenario::make(-0.48, 1.0)) == doctest::Approx(0.0));
  CHECK(bias_adjusted_naive(-0.48, ConfounderScenario::make(0.0, 0.7)) == -0.48);
  CHECK(bias_adjusted_naive(-0.48, ConfounderScenario::make(0.5, 0.2)) == doctest::Approx(-0.58));

  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int rep = 0; rep < 200; ++rep) {
    const double naive = u(rng), g0 = u(rng), g1 = u(rng);
    const double a = bias_adjusted_naive(naive, ConfounderScenario::make(g0, g1));
    const double b = bias_adjusted_naive(naive, ConfounderScenario::make(-g0, -g1));
    CHECK(a == doctest::Approx(b));
    // Linear in gamma0.
    const double mid = bias_adjusted_naive(naive, ConfounderScenario::make(g0 / 2, g1));
    CHECK(mid == doctest::Approx((a + naive) / 2));
  }
}

TEST_CASE("feasible gamma0 range") {
  const auto s = ate_summary<double>(azt_counts());
  const auto g = gamma0_feasible(s, 1.0);
  CHECK(g.lo == doctest::Approx(-0.643).epsilon(1e-3));
  CHECK(g.hi == doctest::Approx(0.167).epsilon(2e-3));
  const auto full = gamma0_feasible(s, 0.0);
  CHECK(full.lo == -1.0);
  CHECK(full.hi == 1.0);
  const auto mirrored = gamma0_feasible(s, -1.0);
  CHECK(mirrored.lo == doctest::Approx(-g.hi));
  CHECK(mirrored.hi == doctest::Approx(-g.lo));

  const auto edge = gamma0_feasible(AteSummary<double>::make({0.0, 1.0}, {0.5, 0.5}), 1.0);
  CHECK(edge.lo == 0.0);
  CHECK(edge.hi == 1.0);
  CHECK_THROWS_AS(gamma0_feasible(s, 1.5), ValidationError);
}

TEST_CASE("rescaled summaries") {
  MeanSummary m;
  m.mean_y = {20.0, 60.0};
  m.pz = {0.5, 0.5};
  const auto unit = rescale_means(m, 0.0, 100.0);
  CHECK(unit.mean_y[0] == doctest::Approx(0.2));
  const auto b = rescale_effect(no_assumption_bounds(ate_summary(unit)), 0.0, 100.0);
  CHECK(b.hi - b.lo == doctest::Approx(100.0));
  CHECK_THROWS_AS(rescale_means(m, 50.0, 100.0), ValidationError);
  CHECK_THROWS_AS(rescale_means(m, 1.0, 1.0), ValidationError);
}

TEST_CASE("stratified bounds") {
  const auto azt = azt_counts();
  const auto single = StratifiedCounts::make({Stratum{"all", 1.0, azt}});
  const auto pooled = no_assumption_bounds(ate_summary<double>(azt));
  const auto one = stratified_bounds(single, [](const AteSummary<double>& s) { return no_assumption_bounds(s); });
  CHECK(one.lo == doctest::Approx(pooled.lo));
  CHECK(one.hi == doctest::Approx(pooled.hi));

  const auto twin = StratifiedCounts::make({Stratum{"a", 0.5, azt}, Stratum{"b", 0.5, azt}});
  const auto two = stratified_bounds(twin, [](const AteSummary<double>& s) { return mts_bounds(s); });
  CHECK(two.lo == doctest::Approx(mts_bounds(ate_summary<double>(azt)).lo));
  CHECK(two.hi == doctest::Approx(mts_bounds(ate_summary<double>(azt)).hi));

  // Random mixtures: stratum weights are the stratum shares, so the pooled
  // table is the sum of the stratum tables.
  std::mt19937_64 rng(9);
  for (int rep = 0; rep < 500; ++rep) {
    const auto a = random_counts(rng);
    const auto b = random_counts(rng);
    TwoArmCounts::Cells sum{};
    for (int y = 0; y < 2; ++y)
      for (int z = 0; z < 2; ++z) sum[y][z] = a.count(y, z) + b.count(y, z);
    const auto joint = TwoArmCounts::from_cells(sum);
    const double wa = static_cast<double>(a.total()) / static_cast<double>(joint.total());
    const auto sc = StratifiedCounts::make({Stratum{"a", wa, a}, Stratum{"b", 1.0 - wa, b}});
    const auto strat = stratified_bounds(sc, [](const AteSummary<double>& s) { return no_assumption_bounds(s); });
    const auto pool = no_assumption_bounds(ate_summary<double>(joint));
    CHECK(strat.lo >= pool.lo - 1e-12);
    CHECK(strat.hi <= pool.hi + 1e-12);
  }
}

TEST_CASE("stratum errors carry the label") {
  ThreeVarCounts::Cells cells{};
  cells[0][0][0] = 3;
  cells[0][1][0] = 2;
  cells[0][0][1] = 4;
  cells[0][1][1] = 1;
  const auto three = ThreeVarCounts::from_cells(cells, false);
  const auto sc = StratifiedCounts::make({Stratum{"clinic-7", 1.0, three}});
  try {
    stratified_bounds(sc, [](const AteSummary<double>& s) { return no_assumption_bounds(s); });
    FAIL("expected a domain error");
  } catch (const DomainError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("clinic-7") != std::string::npos);
    CHECK(msg.rfind("bounds: ", 0) == 0);
    CHECK(msg.find("bounds: bounds:") == std::string::npos);
  }
}
