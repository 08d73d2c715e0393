#include "dpsqkd/stats.hpp"

#include <cmath>
#include <limits>

namespace dpsqkd::stats {

double norm_cdf(double x) {
    return 0.5 * std::erfc(-x * M_SQRT1_2);
}

double norm_ppf(double p) {
    if (p <= 0.0 || p >= 1.0) return std::numeric_limits<double>::quiet_NaN();

    static const double a1 = -39.69683028665376, a2 = 220.9460984245205, a3 = -275.9285104469687,
                        a4 = 138.3577518672690, a5 = -30.66479806614716, a6 = 2.506628277459239;
    static const double b1 = -54.47609879822406, b2 = 161.5858368580409, b3 = -155.6989798598866,
                        b4 = 66.80131188771972, b5 = -13.28068155288572;
    static const double c1 = -7.784894002430293e-03, c2 = -3.223964580411365e-01, c3 = -2.400758277161838,
                        c4 = -2.549732539343734, c5 = 4.374664141464968, c6 = 2.938163982698783;
    static const double d1 = 7.784695709041462e-03, d2 = 3.224671290700398e-01, d3 = 2.445134137142996,
                        d4 = 3.754408661907416;

    const double plow = 0.02425;
    const double phigh = 1.0 - plow;
    if (p < plow) {
        double q = std::sqrt(-2.0 * std::log(p));
        return (((((c1 * q + c2) * q + c3) * q + c4) * q + c5) * q + c6) /
               ((((d1 * q + d2) * q + d3) * q + d4) * q + 1.0);
    }
    if (p > phigh) {
        double q = std::sqrt(-2.0 * std::log(1.0 - p));
        return -(((((c1 * q + c2) * q + c3) * q + c4) * q + c5) * q + c6) /
               ((((d1 * q + d2) * q + d3) * q + d4) * q + 1.0);
    }
    double q = p - 0.5;
    double r = q * q;
    return (((((a1 * r + a2) * r + a3) * r + a4) * r + a5) * r + a6) * q /
           (((((b1 * r + b2) * r + b3) * r + b4) * r + b5) * r + 1.0);
}

}  // namespace dpsqkd::stats
