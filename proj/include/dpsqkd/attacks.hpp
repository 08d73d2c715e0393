#pragma once

#include <cstdint>
#include <map>
#include <string>

#include "dpsqkd/params.hpp"
#include "dpsqkd/security.hpp"

namespace dpsqkd {

class AttackError : public std::runtime_error {
  public:
    enum class Code { OutOfDomain, YieldUnreachable };
    AttackError(Code code, std::string what) : std::runtime_error(std::move(what)), code_(code) {}
    Code code() const { return code_; }

  private:
    Code code_;
};

// Fraction of key information a photon-number-splitting attack yields: 2 mu.
double pns_fraction(double mu);

// Per-pulse unambiguous-state-discrimination success probability 1 - exp(-2 mu).
double usd_success(double mu);

struct UsdAttackParams {
    uint32_t min_run = 1;     // M: runs longer than this are always resent
    double resend_prob = 0.0; // p: resend probability for runs of exactly M
    double resend_mu = 1.0;   // mean photon number of Eve's resent trains

    bool operator==(const UsdAttackParams&) const = default;
};

struct UsdAttackOutcome {
    uint64_t slots = 0;
    uint64_t clicks = 0;
    uint64_t errors = 0;
    uint64_t boundary_clicks = 0;
    uint64_t interior_clicks = 0;
    double yield = 0.0;       // clicks per slot
    double error_rate = 0.0;  // erroneous fraction of sifted bits
    std::map<uint32_t, uint64_t> block_stats;  // resent run count by length
};

// Monte Carlo of the sequential USD attack: per-slot USD successes, maximal
// runs resent as coherent trains, interior slots click at p_int with
// baseline-flipped correct bits, the two pulse/vacuum boundary slots click
// at p_int/2 with random bits. Eve-side only; Bob's dark counts are not
// part of the attack channel.
UsdAttackOutcome simulate_usd(const SystemParams& params, const UsdAttackParams& attack, uint64_t n_slots,
                              uint64_t seed, int workers = 1);

struct UsdStrategyRates {
    double yield = 0.0;
    double error_rate = 0.0;
};

// Closed-form expectation of yield and error rate for a strategy.
UsdStrategyRates usd_strategy_rates(const SystemParams& params, const UsdAttackParams& attack);

// Interior click probability for Eve's resent trains.
double usd_interior_click_prob(const SystemParams& params, double resend_mu);

struct UsdThresholdReport {
    double channel_loss_db = 0.0;
    double yield = 0.0;  // Bob's legitimate clicks per slot
    UsdAttackParams best_strategy;
    double e_star = 0.0;
    double individual_threshold = 0.0;
    std::string binding_bound;  // "individual" or "usd"
};

// Searches (M, p, resend_mu) strategies whose yield matches the legitimate
// channel within 1% and returns the lowest error rate Eve can present.
UsdThresholdReport usd_threshold(const SystemParams& params);

}  // namespace dpsqkd
