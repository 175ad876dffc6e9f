#pragma once

// Random observed-data laws for oracle comparisons.

#include <random>
#include <string>
#include <vector>

#include "partialid/data.hpp"
#include "partialid/lp.hpp"

namespace testsupport {

// Dirichlet(1) draw; about one in five draws has some entries forced to 0.
inline std::vector<double> random_simplex(std::mt19937_64& rng, std::size_t k) {
  std::gamma_distribution<double> g(1.0, 1.0);
  std::bernoulli_distribution sparse(0.2), drop(0.4);
  const bool make_sparse = sparse(rng);
  std::vector<double> v(k);
  double sum = 0.0;
  for (auto& x : v) {
    x = make_sparse && drop(rng) ? 0.0 : g(rng);
    sum += x;
  }
  if (sum == 0.0) {
    v[0] = 1.0;
    sum = 1.0;
  }
  for (auto& x : v) x /= sum;
  return v;
}

// Margins Pr[Y=y, S=s | Z=z] implied by a latent law q over the states.
inline partialid::ObservedLaw<double> law_from_latent(const partialid::LatentStateSpace& space,
                                                      const std::vector<double>& q) {
  partialid::ObservedLaw<double>::Cells p{};
  for (std::size_t st = 0; st < space.size(); ++st) {
    for (int z = 0; z < 2; ++z) {
      const int s = space.value(st, "S(" + std::to_string(z) + ")");
      const int y = space.value(st, "Y(" + std::to_string(z) + "," + std::to_string(s) + ")");
      p[y][s][z] += q[st];
    }
  }
  // Re-normalize each arm to absorb rounding.
  for (int z = 0; z < 2; ++z) {
    double sum = 0.0;
    for (int y = 0; y < 2; ++y)
      for (int s = 0; s < 2; ++s) sum += p[y][s][z];
    for (int y = 0; y < 2; ++y)
      for (int s = 0; s < 2; ++s) p[y][s][z] /= sum;
  }
  return partialid::ObservedLaw<double>::make(p, {0.5, 0.5});
}

// Unrestricted law: independent Dirichlet draws per arm.
inline partialid::ObservedLaw<double> random_law(std::mt19937_64& rng) {
  partialid::ObservedLaw<double>::Cells p{};
  for (int z = 0; z < 2; ++z) {
    const auto v = random_simplex(rng, 4);
    for (int k = 0; k < 4; ++k) p[k / 2][k % 2][z] = v[k];
  }
  return partialid::ObservedLaw<double>::make(p, {0.5, 0.5});
}

}  // namespace testsupport
