#include "partialid/grid.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "partialid/error.hpp"

namespace partialid {

namespace {

constexpr double kCap = 50.0;
constexpr std::size_t kMaxPoints = 100001;

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, sep)) out.push_back(trim(item));
  if (!s.empty() && s.back() == sep) out.emplace_back();
  return out;
}

double parse_token(const std::string& tok) {
  if (tok == "inf" || tok == "+inf" || tok == "Inf" || tok == "+Inf") {
    return std::numeric_limits<double>::infinity();
  }
  if (tok == "-inf" || tok == "-Inf") return -std::numeric_limits<double>::infinity();
  try {
    std::size_t used = 0;
    const double v = std::stod(tok, &used);
    if (used != tok.size() || !std::isfinite(v)) throw std::invalid_argument(tok);
    return v;
  } catch (const std::exception&) {
    throw ParseError("grid", "bad number '" + tok + "'");
  }
}

// Finite part of one comma item plus any infinite endpoints it names.
void expand_item(const std::string& item, std::vector<double>& finite, std::vector<double>& infinite) {
  const auto parts = split(item, ':');
  if (parts.size() == 1) {
    const double v = parse_token(parts[0]);
    (std::isfinite(v) ? finite : infinite).push_back(v);
    return;
  }
  if (parts.size() != 3) throw ParseError("grid", "expected lo:hi:step, got '" + item + "'");
  double lo = parse_token(parts[0]);
  double hi = parse_token(parts[1]);
  const double step = parse_token(parts[2]);
  if (!std::isfinite(step) || !(step > 0.0)) throw ParseError("grid", "step must be positive in '" + item + "'");
  if (!(lo <= hi)) throw ParseError("grid", "lo must not exceed hi in '" + item + "'");
  if (std::isinf(lo)) {
    infinite.push_back(lo);
    lo = std::isinf(hi) || hi >= -kCap ? -kCap : hi;
  }
  if (std::isinf(hi)) {
    infinite.push_back(hi);
    hi = std::max(lo, kCap);
  }
  const double count = std::floor((hi - lo) / step + 1e-9);
  if (count + 1 > static_cast<double>(kMaxPoints)) throw ParseError("grid", "'" + item + "' has too many points");
  for (long i = 0; i <= static_cast<long>(count); ++i) {
    // Rounded so that 0.1 steps print as 0.3, not 0.30000000000000004.
    finite.push_back(std::round((lo + static_cast<double>(i) * step) * 1e12) / 1e12);
  }
  if (hi - finite.back() > 1e-9 * std::max(1.0, std::abs(hi))) finite.push_back(hi);
}

void collect(const std::string& spec, std::vector<double>& finite, std::vector<double>& infinite) {
  if (trim(spec).empty()) throw ParseError("grid", "empty grid");
  for (const auto& item : split(spec, ',')) {
    if (item.empty()) throw ParseError("grid", "empty item in '" + spec + "'");
    expand_item(item, finite, infinite);
  }
  std::sort(finite.begin(), finite.end());
  finite.erase(std::unique(finite.begin(), finite.end()), finite.end());
}

}  // namespace

std::vector<ExtendedGamma> parse_gamma_grid(const std::string& spec) {
  std::vector<double> finite;
  std::vector<double> infinite;
  collect(spec, finite, infinite);
  std::vector<ExtendedGamma> out;
  for (double v : finite) out.push_back(ExtendedGamma::finite(v));
  for (double v : infinite) out.push_back(ExtendedGamma::finite(v));  // maps to the infinite kinds
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

std::vector<double> parse_finite_grid(const std::string& spec) {
  std::vector<double> finite;
  std::vector<double> infinite;
  collect(spec, finite, infinite);
  if (!infinite.empty()) throw ParseError("grid", "infinite values are not allowed here");
  return finite;
}

GammaRange parse_gamma_range(const std::string& spec) {
  const auto parts = split(trim(spec), ':');
  if (parts.empty() || parts.size() > 2 || parts[0].empty()) {
    throw ParseError("grid", "expected lo:hi, got '" + spec + "'");
  }
  const double lo = parse_token(parts[0]);
  const double hi = parts.size() == 2 ? parse_token(parts[1]) : lo;
  if (!(lo <= hi)) throw ParseError("grid", "lo must not exceed hi in '" + spec + "'");
  return {ExtendedGamma::finite(lo), ExtendedGamma::finite(hi)};
}

}  // namespace partialid
