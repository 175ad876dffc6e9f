#pragma once

// Sensitivity-parameter grids: "lo:hi:step", comma lists, or a mix
// ("-inf,-5:5:1,inf"). The tokens inf / -inf stand for the infinite gammas.

#include <string>
#include <vector>

#include "partialid/principal.hpp"
#include "partialid/uncertainty.hpp"

namespace partialid {

// Ascending and duplicate-free. In a range an infinite endpoint is cut at
// +-50 for the finite part and the infinite gamma itself is appended.
std::vector<ExtendedGamma> parse_gamma_grid(const std::string& spec);

// Same syntax without infinite tokens.
std::vector<double> parse_finite_grid(const std::string& spec);

// "lo:hi" or a single value; endpoints may be -inf / inf.
GammaRange parse_gamma_range(const std::string& spec);

}  // namespace partialid
