#pragma once

#include <algorithm>
#include <optional>

#include "partialid/error.hpp"
#include "partialid/rational.hpp"

namespace partialid {

// Closed interval [lo, hi] with lo <= hi.
template <class Scalar = double>
struct Interval {
  Scalar lo{};
  Scalar hi{};

  static Interval make(Scalar lo, Scalar hi) {
    if (hi < lo) throw ValidationError("interval", "lower end exceeds upper end");
    return Interval{std::move(lo), std::move(hi)};
  }

  // As make, but absorbs a crossing no larger than the scalar's rounding
  // tolerance (zero for exact scalars).
  static Interval make_rounded(Scalar lo, Scalar hi) {
    if (hi < lo && !(lo - hi > ScalarTraits<Scalar>::tolerance())) hi = lo;
    return make(std::move(lo), std::move(hi));
  }

  static Interval point(Scalar v) { return Interval{v, v}; }

  Scalar width() const { return hi - lo; }
  bool contains(const Scalar& v) const { return lo <= v && v <= hi; }
  bool contains(const Interval& o) const { return lo <= o.lo && o.hi <= hi; }
  bool excludes_zero() const { return Scalar(0) < lo || hi < Scalar(0); }

  Interval<double> to_double() const {
    return {partialid::to_double(lo), partialid::to_double(hi)};
  }

  friend bool operator==(const Interval& a, const Interval& b) {
    return a.lo == b.lo && a.hi == b.hi;
  }
};

template <class Scalar>
std::optional<Interval<Scalar>> intersect(const Interval<Scalar>& a, const Interval<Scalar>& b) {
  Scalar lo = std::max(a.lo, b.lo);
  Scalar hi = std::min(a.hi, b.hi);
  if (hi < lo) return std::nullopt;
  return Interval<Scalar>{lo, hi};
}

}  // namespace partialid
