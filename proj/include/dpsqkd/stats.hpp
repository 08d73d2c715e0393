#pragma once

namespace dpsqkd::stats {

// Standard normal CDF.
double norm_cdf(double x);

// Standard normal quantile (Acklam's rational approximation, |err| < 1.2e-9).
double norm_ppf(double p);

}  // namespace dpsqkd::stats
