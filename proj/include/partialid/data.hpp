#pragma once

// Observed study data: count tables, the empirical observed-data law, and
// file ingestion (JSON and CSV).

#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "partialid/error.hpp"
#include "partialid/rational.hpp"

namespace partialid {

// Counts n_{yz} for binary outcome y and binary treatment z.
class TwoArmCounts {
 public:
  using Cells = std::array<std::array<std::int64_t, 2>, 2>;  // [y][z]

  // Throws ValidationError naming the offending cell.
  static TwoArmCounts from_cells(const Cells& cells);

  std::int64_t count(int y, int z) const { return cells_[y][z]; }
  std::int64_t arm_total(int z) const { return cells_[0][z] + cells_[1][z]; }
  std::int64_t total() const { return arm_total(0) + arm_total(1); }
  const Cells& cells() const { return cells_; }

  friend bool operator==(const TwoArmCounts&, const TwoArmCounts&) = default;

 private:
  Cells cells_{};
};

// Counts n_{ysz} for outcome y, intermediate s and assignment z.
//
// When the outcome is undefined for s = 0 (principal stratification data),
// each arm carries a single merged s = 0 count. It is stored in the (y=0, s=0)
// cell and the (y=1, s=0) cell is held at zero.
class ThreeVarCounts {
 public:
  using Cells = std::array<std::array<std::array<std::int64_t, 2>, 2>, 2>;  // [y][s][z]

  static ThreeVarCounts from_cells(const Cells& cells, bool outcome_defined_when_s0 = true);
  static ThreeVarCounts with_merged_s0(const std::array<std::array<std::int64_t, 2>, 2>& s1_cells,
                                       const std::array<std::int64_t, 2>& s0_totals);

  std::int64_t count(int y, int s, int z) const { return cells_[y][s][z]; }
  std::int64_t s_total(int s, int z) const { return cells_[0][s][z] + cells_[1][s][z]; }
  std::int64_t arm_total(int z) const { return s_total(0, z) + s_total(1, z); }
  std::int64_t total() const { return arm_total(0) + arm_total(1); }
  bool outcome_defined_when_s0() const { return outcome_defined_when_s0_; }
  const Cells& cells() const { return cells_; }

  friend bool operator==(const ThreeVarCounts&, const ThreeVarCounts&) = default;

 private:
  Cells cells_{};
  bool outcome_defined_when_s0_ = true;
};

// Arm means of a bounded outcome, already or to be rescaled to [0, 1].
struct MeanSummary {
  std::array<double, 2> mean_y{};  // E[Y | Z = z]
  std::array<double, 2> pz{};      // Pr[Z = z]
  std::optional<std::int64_t> n;

  friend bool operator==(const MeanSummary&, const MeanSummary&) = default;
};

struct Stratum {
  std::string label;
  double weight = 0.0;
  std::variant<TwoArmCounts, ThreeVarCounts> counts;

  friend bool operator==(const Stratum&, const Stratum&) = default;
};

// Finite covariate strata with weights Pr[X = x].
class StratifiedCounts {
 public:
  static StratifiedCounts make(std::vector<Stratum> strata);

  const std::vector<Stratum>& strata() const { return strata_; }

  friend bool operator==(const StratifiedCounts&, const StratifiedCounts&) = default;

 private:
  std::vector<Stratum> strata_;
};

using CountData = std::variant<TwoArmCounts, ThreeVarCounts, StratifiedCounts, MeanSummary>;

// Observed-data law p_{ys.z} = Pr[Y=y, S=s | Z=z] with arm probabilities.
template <class Scalar = double>
class ObservedLaw {
 public:
  using Cells = std::array<std::array<std::array<Scalar, 2>, 2>, 2>;  // [y][s][z]

  // Checks entries in [0,1], per-arm sums of 1 (1e-12 for double, exact for
  // Rational) and pz summing to 1.
  static ObservedLaw make(const Cells& p, const std::array<Scalar, 2>& pz,
                          std::optional<std::int64_t> n = std::nullopt,
                          bool outcome_defined_when_s0 = true);

  const Scalar& cell(int y, int s, int z) const { return p_[y][s][z]; }
  const Scalar& pz(int z) const { return pz_[z]; }
  const std::optional<std::int64_t>& n() const { return n_; }
  bool outcome_defined_when_s0() const { return outcome_defined_when_s0_; }

  Scalar s_prob(int s, int z) const { return p_[0][s][z] + p_[1][s][z]; }
  Scalar y_mean(int z) const { return p_[1][0][z] + p_[1][1][z]; }
  const Cells& cells() const { return p_; }

  ObservedLaw<double> to_double() const;

 private:
  Cells p_{};
  std::array<Scalar, 2> pz_{};
  std::optional<std::int64_t> n_;
  bool outcome_defined_when_s0_ = true;
};

// p_{ysz} = n_{ysz} / n_z, pz = n_z / n.
template <class Scalar = double>
ObservedLaw<Scalar> empirical_law(const ThreeVarCounts& counts);

enum class FileFormat { json, csv };

FileFormat parse_file_format(const std::string& text);

CountData load_counts(const std::filesystem::path& path, FileFormat format);
CountData parse_counts_json(const std::string& text);
CountData parse_counts_csv(const std::string& text);

// Canonical JSON text (sorted keys, two-space indent, trailing newline).
std::string serialize_counts_json(const CountData& data);

std::string design_name(const CountData& data);

// ---------------------------------------------------------------------------

template <class Scalar>
ObservedLaw<Scalar> ObservedLaw<Scalar>::make(const Cells& p, const std::array<Scalar, 2>& pz,
                                              std::optional<std::int64_t> n,
                                              bool outcome_defined_when_s0) {
  using std::abs;
  const Scalar zero(0);
  const Scalar one(1);
  Scalar tol(0);
  if constexpr (!ScalarTraits<Scalar>::exact) tol = Scalar(1e-12);
  for (int z = 0; z < 2; ++z) {
    Scalar sum(0);
    for (int y = 0; y < 2; ++y) {
      for (int s = 0; s < 2; ++s) {
        const Scalar& v = p[y][s][z];
        if constexpr (!ScalarTraits<Scalar>::exact) {
          if (!std::isfinite(v)) {
            throw ValidationError("data", "law cell p_" + std::to_string(y) + std::to_string(s) +
                                              "." + std::to_string(z) + " is not finite");
          }
        }
        if (v < zero || v > one) {
          throw ValidationError("data", "law cell p_" + std::to_string(y) + std::to_string(s) +
                                            "." + std::to_string(z) + " outside [0,1]");
        }
        sum += v;
      }
    }
    if (abs(sum - one) > tol) {
      throw ValidationError("data", "law cells for arm z=" + std::to_string(z) +
                                        " do not sum to 1");
    }
    if (pz[z] < zero || pz[z] > one) {
      throw ValidationError("data", "Pr[Z=" + std::to_string(z) + "] outside [0,1]");
    }
  }
  if (abs(pz[0] + pz[1] - one) > tol) {
    throw ValidationError("data", "arm probabilities do not sum to 1");
  }
  if (n && *n < 1) throw ValidationError("data", "sample size must be positive");
  ObservedLaw law;
  law.p_ = p;
  law.pz_ = pz;
  law.n_ = n;
  law.outcome_defined_when_s0_ = outcome_defined_when_s0;
  return law;
}

template <class Scalar>
ObservedLaw<double> ObservedLaw<Scalar>::to_double() const {
  typename ObservedLaw<double>::Cells p{};
  for (int y = 0; y < 2; ++y)
    for (int s = 0; s < 2; ++s)
      for (int z = 0; z < 2; ++z) p[y][s][z] = partialid::to_double(p_[y][s][z]);
  return ObservedLaw<double>::make(
      p, {partialid::to_double(pz_[0]), partialid::to_double(pz_[1])}, n_,
      outcome_defined_when_s0_);
}

template <class Scalar>
ObservedLaw<Scalar> empirical_law(const ThreeVarCounts& counts) {
  typename ObservedLaw<Scalar>::Cells p{};
  for (int z = 0; z < 2; ++z) {
    const std::int64_t nz = counts.arm_total(z);
    for (int y = 0; y < 2; ++y)
      for (int s = 0; s < 2; ++s)
        p[y][s][z] = ScalarTraits<Scalar>::ratio(counts.count(y, s, z), nz);
  }
  const std::int64_t n = counts.total();
  return ObservedLaw<Scalar>::make(
      p, {ScalarTraits<Scalar>::ratio(counts.arm_total(0), n),
          ScalarTraits<Scalar>::ratio(counts.arm_total(1), n)},
      n, counts.outcome_defined_when_s0());
}

}  // namespace partialid
