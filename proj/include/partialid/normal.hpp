#pragma once

namespace partialid {

// Standard normal cdf, via erfc so the lower tail keeps full precision.
double norm_cdf(double x);

// Inverse standard normal cdf. Acklam's rational approximation followed by
// one Halley step, which brings the error below 1e-12 on (0, 1).
double norm_quantile(double p);

// Upper tail of the chi-square distribution with one degree of freedom.
double chi2_sf_df1(double x);

}  // namespace partialid
