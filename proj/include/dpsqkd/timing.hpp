#pragma once

#include <cstdint>

#include "dpsqkd/params.hpp"

namespace dpsqkd {

// Gaussian-jitter window model for one clock slot.
//
// own:   fraction of clicks that stay in their emitting slot and land
//        inside the window.
// leak:  fraction re-rounded into a neighboring slot that still lands
//        inside that slot's window (inter-symbol interference; those bits
//        are uncorrelated with the neighboring slot's phase difference).
// total: own + leak — the acceptance the sifted rate actually sees.
//
// With window_acceptance_override set, sigma is solved from
// own(sigma) + leak(sigma) = override, so the engine reproduces the
// measured acceptance exactly; otherwise sigma = fwhm / (2*sqrt(2 ln 2)).
struct TimingModel {
    double sigma_fs = 0.0;
    double own = 1.0;
    double leak = 0.0;
    double total = 1.0;
    // Per-click flip probability that makes the innocent signal error rate
    // equal baseline_error once the 50%-random leak bits are folded in.
    double flip_prob = 0.0;
};

TimingModel make_timing_model(const SystemParams& params);

// 2*Phi(w/(2*sigma)) - 1 with sigma = fwhm/(2*sqrt(2 ln 2)).
double window_acceptance(double jitter_fwhm_ps, double window_width_ps);

// Acceptance split for an explicit sigma, all in femtoseconds.
void acceptance_parts(double sigma_fs, int64_t window_fs, int64_t period_fs, double& own, double& leak);

}  // namespace dpsqkd
