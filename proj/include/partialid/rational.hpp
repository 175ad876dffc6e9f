#pragma once

// Exact rational scalar usable inside Eigen dense types.
//
// boost::multiprecision's own number<> type does not compose with Eigen's
// scalar-times-matrix promotion under C++20, so it is wrapped here behind a
// minimal arithmetic surface.

#include <cstdint>
#include <ostream>
#include <stdexcept>
#include <string>

#include <Eigen/Core>
#include <boost/multiprecision/cpp_int.hpp>

namespace partialid {

class Rational {
 public:
  using Impl = boost::multiprecision::cpp_rational;

  Rational() = default;
  Rational(int v) : v_(v) {}
  Rational(long v) : v_(v) {}
  Rational(long long v) : v_(v) {}
  Rational(std::int64_t num, std::int64_t den) : v_(Impl(num) / Impl(den)) {}

  // Exact conversion from a decimal literal such as "0.919" or "-3/7".
  static Rational parse(const std::string& text);

  double to_double() const { return v_.convert_to<double>(); }
  std::string str() const { return v_.str(); }
  const Impl& impl() const { return v_; }

  Rational operator-() const { return from_impl(-v_); }
  Rational& operator+=(const Rational& o) { v_ += o.v_; return *this; }
  Rational& operator-=(const Rational& o) { v_ -= o.v_; return *this; }
  Rational& operator*=(const Rational& o) { v_ *= o.v_; return *this; }
  Rational& operator/=(const Rational& o) { v_ /= o.v_; return *this; }

  friend Rational operator+(Rational a, const Rational& b) { return a += b; }
  friend Rational operator-(Rational a, const Rational& b) { return a -= b; }
  friend Rational operator*(Rational a, const Rational& b) { return a *= b; }
  friend Rational operator/(Rational a, const Rational& b) { return a /= b; }

  friend bool operator==(const Rational& a, const Rational& b) { return a.v_ == b.v_; }
  friend bool operator!=(const Rational& a, const Rational& b) { return a.v_ != b.v_; }
  friend bool operator<(const Rational& a, const Rational& b) { return a.v_ < b.v_; }
  friend bool operator>(const Rational& a, const Rational& b) { return a.v_ > b.v_; }
  friend bool operator<=(const Rational& a, const Rational& b) { return a.v_ <= b.v_; }
  friend bool operator>=(const Rational& a, const Rational& b) { return a.v_ >= b.v_; }

  friend Rational abs(const Rational& a) { return a.v_ < 0 ? -a : a; }

  friend std::ostream& operator<<(std::ostream& os, const Rational& r) {
    return os << r.str();
  }

 private:
  static Rational from_impl(Impl v) {
    Rational r;
    r.v_ = std::move(v);
    return r;
  }

  Impl v_{0};
};

namespace detail {

// cpp_int reads a leading 0 as an octal prefix, so digits are accumulated
// by hand.
inline boost::multiprecision::cpp_int parse_decimal_integer(const std::string& text) {
  boost::multiprecision::cpp_int v = 0;
  bool negative = false;
  std::size_t i = 0;
  if (i < text.size() && (text[i] == '-' || text[i] == '+')) {
    negative = text[i] == '-';
    ++i;
  }
  if (i == text.size()) throw std::invalid_argument("empty number: '" + text + "'");
  for (; i < text.size(); ++i) {
    const char c = text[i];
    if (c < '0' || c > '9') throw std::invalid_argument("bad digit in '" + text + "'");
    v = v * 10 + (c - '0');
  }
  return negative ? -v : v;
}

}  // namespace detail

inline Rational Rational::parse(const std::string& text) {
  const auto slash = text.find('/');
  if (slash != std::string::npos) {
    const auto den = detail::parse_decimal_integer(text.substr(slash + 1));
    if (den == 0) throw std::invalid_argument("zero denominator in '" + text + "'");
    return from_impl(Impl(detail::parse_decimal_integer(text.substr(0, slash))) / Impl(den));
  }
  std::string digits;
  std::int64_t scale = 0;
  bool after_point = false;
  for (char c : text) {
    if (c == '.') {
      if (after_point) throw std::invalid_argument("bad number: '" + text + "'");
      after_point = true;
      continue;
    }
    digits.push_back(c);
    if (after_point) ++scale;
  }
  boost::multiprecision::cpp_int den = 1;
  for (std::int64_t i = 0; i < scale; ++i) den *= 10;
  return from_impl(Impl(detail::parse_decimal_integer(digits)) / Impl(den));
}

// Uniform access to tolerances and conversions for the scalar types the
// templated modules are instantiated with.
template <class Scalar>
struct ScalarTraits;

template <>
struct ScalarTraits<double> {
  static constexpr bool exact = false;
  static double tolerance() { return 1e-10; }
  static double to_double(double v) { return v; }
  static double ratio(std::int64_t num, std::int64_t den) {
    return static_cast<double>(num) / static_cast<double>(den);
  }
};

template <>
struct ScalarTraits<Rational> {
  static constexpr bool exact = true;
  static Rational tolerance() { return Rational(0); }
  static double to_double(const Rational& v) { return v.to_double(); }
  static Rational ratio(std::int64_t num, std::int64_t den) { return Rational(num, den); }
};

template <class Scalar>
double to_double(const Scalar& v) {
  return ScalarTraits<Scalar>::to_double(v);
}

}  // namespace partialid

namespace Eigen {

template <>
struct NumTraits<partialid::Rational> : GenericNumTraits<partialid::Rational> {
  using Real = partialid::Rational;
  using NonInteger = partialid::Rational;
  using Nested = partialid::Rational;
  using Literal = partialid::Rational;
  enum {
    IsComplex = 0,
    IsInteger = 0,
    IsSigned = 1,
    RequireInitialization = 1,
    ReadCost = 1,
    AddCost = 8,
    MulCost = 16
  };
  static Real epsilon() { return Real(0); }
  static Real dummy_precision() { return Real(0); }
  static int digits10() { return 0; }
};

}  // namespace Eigen
