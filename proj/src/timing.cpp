#include "dpsqkd/timing.hpp"

#include <algorithm>
#include <cmath>

#include "dpsqkd/stats.hpp"

namespace dpsqkd {

namespace {

constexpr double kFwhmToSigma = 2.3548200450309493;  // 2*sqrt(2 ln 2)

double acceptance_total(double sigma_fs, int64_t window_fs, int64_t period_fs) {
    double own, leak;
    acceptance_parts(sigma_fs, window_fs, period_fs, own, leak);
    return own + leak;
}

}  // namespace

void acceptance_parts(double sigma_fs, int64_t window_fs, int64_t period_fs, double& own, double& leak) {
    const double half_w = double(window_fs) / 2.0;
    if (sigma_fs <= 0.0) {
        own = window_fs > 0 ? 1.0 : 0.0;
        leak = 0.0;
        return;
    }
    own = 2.0 * stats::norm_cdf(half_w / sigma_fs) - 1.0;
    leak = 0.0;
    for (int k = 1; k < 64; ++k) {
        const double lo = (double(k) * double(period_fs) - half_w) / sigma_fs;
        const double hi = (double(k) * double(period_fs) + half_w) / sigma_fs;
        const double term = 2.0 * (stats::norm_cdf(hi) - stats::norm_cdf(lo));
        leak += term;
        if (term < 1e-15) break;
    }
}

double window_acceptance(double jitter_fwhm_ps, double window_width_ps) {
    if (jitter_fwhm_ps <= 0.0) return 1.0;
    const double sigma = jitter_fwhm_ps / kFwhmToSigma;
    return 2.0 * stats::norm_cdf(window_width_ps / (2.0 * sigma)) - 1.0;
}

TimingModel make_timing_model(const SystemParams& params) {
    const int64_t period = params.period_fs();
    const int64_t window = params.window_fs();

    TimingModel m;
    if (params.window_acceptance_override) {
        // Solve own(sigma)+leak(sigma) = override. The total acceptance is
        // strictly decreasing in sigma down to the uniform floor w/T.
        const double target = *params.window_acceptance_override;
        const double floor = double(window) / double(period);
        if (target <= floor + 1e-9) {
            throw ValidationError(ValidationError::Code::BadOverride, "window_acceptance_override",
                                  "override below the uniform-jitter floor window/period");
        }
        double lo = 1e-3 * double(window);
        double hi = 50.0 * double(period);
        for (int it = 0; it < 200; ++it) {
            double mid = 0.5 * (lo + hi);
            if (acceptance_total(mid, window, period) > target)
                lo = mid;
            else
                hi = mid;
        }
        m.sigma_fs = 0.5 * (lo + hi);
    } else {
        m.sigma_fs = params.jitter_fwhm_ps * 1000.0 / kFwhmToSigma;
    }

    acceptance_parts(m.sigma_fs, window, period, m.own, m.leak);
    if (params.window_acceptance_override) {
        // remove the bisection residual so the analytic total is exact
        const double scale = *params.window_acceptance_override / (m.own + m.leak);
        m.own *= scale;
        m.leak *= scale;
    }
    m.total = m.own + m.leak;

    // flip*own + 0.5*leak = baseline * total
    if (m.own > 0.0) {
        m.flip_prob = std::clamp((params.baseline_error * m.total - 0.5 * m.leak) / m.own, 0.0, 0.5);
    } else {
        m.flip_prob = 0.0;
    }
    return m;
}

}  // namespace dpsqkd
