#include "dpsqkd/attacks.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <thread>
#include <vector>

#include "dpsqkd/kernels.hpp"
#include "dpsqkd/rng.hpp"
#include "dpsqkd/timing.hpp"

namespace dpsqkd {

double pns_fraction(double mu) {
    if (!(mu >= 0.0) || mu > 0.5) {
        throw AttackError(AttackError::Code::OutOfDomain, "pns_fraction needs mu in [0, 0.5]");
    }
    return 2.0 * mu;
}

double usd_success(double mu) {
    if (!(mu >= 0.0)) throw AttackError(AttackError::Code::OutOfDomain, "usd_success needs mu >= 0");
    return 1.0 - std::exp(-2.0 * mu);
}

double usd_interior_click_prob(const SystemParams& params, double resend_mu) {
    const TimingModel timing = make_timing_model(params);
    return std::min(1.0, resend_mu * params.detector_qe * timing.total *
                             db_to_transmittance(params.interferometer_loss_db));
}

namespace {

void check_attack_params(const UsdAttackParams& attack) {
    if (attack.min_run < 1 || attack.resend_prob < 0.0 || attack.resend_prob > 1.0 || !(attack.resend_mu > 0.0)) {
        throw AttackError(AttackError::Code::OutOfDomain, "bad USD attack parameters");
    }
}

}  // namespace

UsdAttackOutcome simulate_usd(const SystemParams& params, const UsdAttackParams& attack, uint64_t n_slots,
                              uint64_t seed, int workers) {
    const SystemParams p = validate_params(params);
    check_attack_params(attack);
    const double q = usd_success(p.mu);
    const double p_int = usd_interior_click_prob(p, attack.resend_mu);

    const uint64_t thr_success = rng::bernoulli_threshold(q);
    const uint64_t thr_resend = rng::bernoulli_threshold(attack.resend_prob);
    const uint64_t thr_int = rng::bernoulli_threshold(p_int);
    const uint64_t thr_boundary = rng::bernoulli_threshold(p_int / 2.0);
    const uint64_t thr_half = rng::bernoulli_threshold(0.5);
    const uint64_t thr_base = rng::bernoulli_threshold(p.baseline_error);

    // USD success per pulse; parallel fill, sequential run scan.
    const uint64_t words = (n_slots + 63) / 64;
    std::vector<uint64_t> mask(words);
    {
        constexpr uint64_t kChunk = uint64_t(1) << 22;
        std::vector<std::pair<uint64_t, uint64_t>> chunks;
        for (uint64_t lo = 0; lo < n_slots; lo += kChunk) chunks.push_back({lo, std::min(n_slots, lo + kChunk)});
        std::atomic<size_t> next{0};
        auto worker = [&] {
            for (;;) {
                size_t i = next.fetch_add(1);
                if (i >= chunks.size()) return;
                auto [lo, hi] = chunks[i];
                // chunks are 64-aligned, so words never straddle workers
                kern::bernoulli_mask(seed, rng::Stream::usd_success, lo, hi - lo, thr_success,
                                     mask.data() + lo / 64);
            }
        };
        const int n = std::clamp(workers, 1, int(chunks.size()));
        if (n <= 1) {
            worker();
        } else {
            std::vector<std::thread> pool;
            for (int t = 0; t < n; ++t) pool.emplace_back(worker);
            for (auto& th : pool) th.join();
        }
    }

    auto success_at = [&](uint64_t i) { return (mask[i / 64] >> (i % 64)) & 1; };

    UsdAttackOutcome out;
    out.slots = n_slots;

    uint64_t run_start = 0;
    bool in_run = false;
    auto close_run = [&](uint64_t run_end) {  // pulses [run_start, run_end] all succeeded
        const uint64_t m = run_end - run_start + 1;
        bool resend = false;
        if (m > attack.min_run) {
            resend = true;
        } else if (m == attack.min_run) {
            resend = (rng::philox(seed, rng::Stream::usd_resend, run_start).lo64() >> 11) < thr_resend;
        }
        if (!resend) return;
        out.block_stats[uint32_t(std::min<uint64_t>(m, 0xffffffffu))]++;

        const uint64_t first_slot = std::max<uint64_t>(1, run_start);
        const uint64_t last_slot = std::min<uint64_t>(n_slots - 1, run_end + 1);
        for (uint64_t t = first_slot; t <= last_slot; ++t) {
            const bool boundary = (t == run_start) || (t == run_end + 1);
            const rng::Block draw = rng::philox(seed, rng::Stream::usd_click, t);
            const uint64_t u_click = draw.lo64() >> 11;
            if (u_click >= (boundary ? thr_boundary : thr_int)) continue;
            ++out.clicks;
            const uint64_t u_err = draw.hi64() >> 11;
            if (boundary) {
                ++out.boundary_clicks;
                if (u_err < thr_half) ++out.errors;
            } else {
                ++out.interior_clicks;
                if (u_err < thr_base) ++out.errors;
            }
        }
    };

    for (uint64_t i = 0; i < n_slots; ++i) {
        if (success_at(i)) {
            if (!in_run) {
                run_start = i;
                in_run = true;
            }
        } else if (in_run) {
            close_run(i - 1);
            in_run = false;
        }
    }
    if (in_run) close_run(n_slots - 1);

    out.yield = n_slots > 0 ? double(out.clicks) / double(n_slots) : 0.0;
    out.error_rate = out.clicks > 0 ? double(out.errors) / double(out.clicks) : 0.0;
    return out;
}

UsdStrategyRates usd_strategy_rates(const SystemParams& params, const UsdAttackParams& attack) {
    check_attack_params(attack);
    const double q = usd_success(params.mu);
    const double p_int = usd_interior_click_prob(params, attack.resend_mu);
    const double b = params.baseline_error;
    const uint32_t M = attack.min_run;
    const double p = attack.resend_prob;
    const double one_minus_q = 1.0 - q;

    // Maximal-run density (1-q)^2 q^m per slot; geometric tails above M.
    const double qM = std::pow(q, double(M));
    const double qM1 = qM * q;
    const double sum_tail = qM1 / one_minus_q;                                       // sum q^m, m > M
    const double sum_m_tail = qM1 * ((double(M) + 1.0) - double(M) * q) / (one_minus_q * one_minus_q);

    const double density2 = one_minus_q * one_minus_q;
    const double yield = p_int * density2 * (sum_m_tail + p * double(M) * qM);
    const double errors =
        p_int * density2 *
        (b * (sum_m_tail - sum_tail) + 0.5 * sum_tail + p * qM * ((double(M) - 1.0) * b + 0.5));

    UsdStrategyRates r;
    r.yield = yield;
    r.error_rate = yield > 0.0 ? errors / yield : 0.0;
    return r;
}

UsdThresholdReport usd_threshold(const SystemParams& params) {
    const SystemParams p = validate_params(params);
    const AnalyticRates legit = analytic_rates(p);
    const double target_yield = legit.sifted_rate / p.clock_rate_hz;

    static const double kResendMuGrid[] = {0.2, 0.5, 1.0, 2.0, 5.0, 1e9};

    UsdThresholdReport report;
    report.channel_loss_db = p.channel_loss_total_db();
    report.yield = target_yield;

    bool found = false;
    double best_e = 1.0;
    UsdAttackParams best;

    for (double resend_mu : kResendMuGrid) {
        const double p_int = usd_interior_click_prob(p, resend_mu);
        if (p_int <= 0.0) continue;
        for (uint32_t M = 1; M <= 512; ++M) {
            UsdAttackParams lo{M, 0.0, resend_mu};
            UsdAttackParams hi{M, 1.0, resend_mu};
            const double y0 = usd_strategy_rates(p, lo).yield;
            const double y1 = usd_strategy_rates(p, hi).yield;
            if (y1 < target_yield * 0.99) break;  // longer runs only lose yield
            if (y0 > target_yield * 1.01) continue;
            double prob = y1 > y0 ? std::clamp((target_yield - y0) / (y1 - y0), 0.0, 1.0) : 0.0;
            UsdAttackParams candidate{M, prob, resend_mu};
            const UsdStrategyRates rates = usd_strategy_rates(p, candidate);
            if (std::abs(rates.yield - target_yield) > 0.01 * target_yield) continue;
            if (!found || rates.error_rate < best_e) {
                found = true;
                best_e = rates.error_rate;
                best = candidate;
            }
        }
    }

    if (!found) {
        throw AttackError(AttackError::Code::YieldUnreachable,
                          "no (M, p, resend_mu) strategy reaches the legitimate yield");
    }

    report.best_strategy = best;
    report.e_star = best_e;
    report.individual_threshold = error_threshold_individual(p.mu, p.ec_model);
    report.binding_bound = report.individual_threshold < report.e_star ? "individual" : "usd";
    return report;
}

}  // namespace dpsqkd
