#include "doctest.h"
#include "partialid/grid.hpp"

using namespace partialid;

TEST_CASE("plain range") {
  const auto g = parse_gamma_grid("-5:5:0.25");
  REQUIRE(g.size() == 41);
  CHECK(g.front() == ExtendedGamma::finite(-5.0));
  CHECK(g.back() == ExtendedGamma::finite(5.0));
  CHECK(g[1].value() == -4.75);
  for (std::size_t i = 1; i < g.size(); ++i) CHECK(g[i - 1] < g[i]);
}

TEST_CASE("decimal steps print cleanly") {
  const auto g = parse_finite_grid("-1:1:0.1");
  REQUIRE(g.size() == 21);
  CHECK(g[13] == 0.3);
  CHECK(g[10] == 0.0);
}

TEST_CASE("upper end is kept when the step overshoots") {
  const auto g = parse_finite_grid("0:1:0.3");
  REQUIRE(g.size() == 5);
  CHECK(g.back() == 1.0);
}

TEST_CASE("lists, mixes and duplicates") {
  const auto g = parse_gamma_grid("3, -1,0:2:1,inf,-inf,3");
  REQUIRE(g.size() == 7);
  CHECK(g.front() == ExtendedGamma::minus_infinity());
  CHECK(g[1].value() == -1.0);
  CHECK(g[5].value() == 3.0);
  CHECK(g.back() == ExtendedGamma::plus_infinity());
}

TEST_CASE("infinite range ends are capped and appended") {
  const auto g = parse_gamma_grid("-inf:inf:1");
  REQUIRE(g.size() == 103);
  CHECK(g.front() == ExtendedGamma::minus_infinity());
  CHECK(g[1].value() == -50.0);
  CHECK(g[101].value() == 50.0);
  CHECK(g.back() == ExtendedGamma::plus_infinity());

  const auto h = parse_gamma_grid("0:inf:10");
  REQUIRE(h.size() == 7);
  CHECK(h[5].value() == 50.0);
  CHECK(h.back() == ExtendedGamma::plus_infinity());
}

TEST_CASE("finite grids refuse infinity") {
  CHECK_THROWS_AS(parse_finite_grid("-1:inf:0.5"), ParseError);
  CHECK_THROWS_AS(parse_finite_grid("inf"), ParseError);
}

TEST_CASE("malformed grids") {
  for (const char* bad : {"", "1:2", "1:2:0", "1:2:-1", "2:1:0.5", "a:b:c", "1,,2", "1:2:3:4", "0:1e9:1e-3", "nan"}) {
    CAPTURE(bad);
    CHECK_THROWS_AS(parse_gamma_grid(bad), ParseError);
  }
}

TEST_CASE("ranges") {
  const auto r = parse_gamma_range("-3:3");
  CHECK(r.lo == ExtendedGamma::finite(-3.0));
  CHECK(r.hi == ExtendedGamma::finite(3.0));
  const auto w = parse_gamma_range("-inf:inf");
  CHECK(w.lo == ExtendedGamma::minus_infinity());
  CHECK(w.hi == ExtendedGamma::plus_infinity());
  const auto p = parse_gamma_range("0");
  CHECK(p.lo == p.hi);
  CHECK_THROWS_AS(parse_gamma_range("3:-3"), ParseError);
  CHECK_THROWS_AS(parse_gamma_range("1:2:3"), ParseError);
  CHECK_THROWS_AS(parse_gamma_range(""), ParseError);
}
