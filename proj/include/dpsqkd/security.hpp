#pragma once

#include <optional>
#include <stdexcept>
#include <vector>

#include "dpsqkd/params.hpp"
#include "dpsqkd/timing.hpp"

namespace dpsqkd {

class SecurityError : public std::runtime_error {
  public:
    enum class Code { OutOfDomain, NoPositiveRegion };
    SecurityError(Code code, std::string what) : std::runtime_error(std::move(what)), code_(code) {}
    Code code() const { return code_; }

  private:
    Code code_;
};

// h(e) = -e log2 e - (1-e) log2(1-e), h(0) = h(1) = 0.
double binary_entropy(double e);

// Per-bit collision bound 1 - e^2 - (1-6e)^2/2, clamped to [0, 1].
double collision_bound(double e);

// Privacy-amplification compression factor -(1-2mu) log2(p_c0), floored at 0.
double compression_factor(double e, double mu);

// Error-correction inefficiency f(e) >= 1 under the given model.
double ec_efficiency(double e, const EcModel& model);

struct SecurityReport {
    double qber = 0.0;
    double sifted_rate = 0.0;      // bits/s
    uint64_t sifted_length = 0;    // rate-per-second proxy for the n-bit key
    double p_c0 = 0.0;
    double tau = 0.0;
    double ec_leakage = 0.0;       // f(e) * h(e)
    double secure_rate = 0.0;      // bits/s
    double secure_fraction = 0.0;
};

struct AnalyticRates {
    double sifted_rate = 0.0;  // bits/s
    double qber = 0.0;
    double p_sig = 0.0;        // signal detections per slot (window applied)
    double p_dark = 0.0;       // accepted darks per slot, both detectors
    double acceptance = 0.0;   // window acceptance used for p_sig
};

// Closed-form sifted rate and QBER for one channel setting.
AnalyticRates analytic_rates(const SystemParams& params);

// R_secure = R_sifted * max(0, tau - f(e) h(e)).
SecurityReport secure_rate(double sifted_rate, double e, double mu, const EcModel& model);

// Smallest e with tau(e, mu) <= f(e) h(e), bisected to 1e-6.
double error_threshold_individual(double mu, const EcModel& model);

struct Bb84SourceSpec {
    enum class Kind { single_photon, weak_coherent };
    Kind kind = Kind::single_photon;
    // single photon source
    double g2 = 0.0;       // second-order correlation at zero delay
    double eta_src = 1.0;  // emission probability per clock
    // weak coherent source
    double mu_wcp = 0.1;
    bool optimize = false;  // numerically optimize mu per loss point

    static Bb84SourceSpec single_photon(double g2, double eta_src = 1.0) {
        return {Kind::single_photon, g2, eta_src, 0.0, false};
    }
    static Bb84SourceSpec weak_coherent(double mu, bool optimize) {
        return {Kind::weak_coherent, 0.0, 1.0, mu, optimize};
    }
};

struct Bb84Rates {
    double sifted_rate = 0.0;
    double qber = 0.0;
    double delta = 0.0;  // tagged multiphoton fraction
    double secure_rate = 0.0;
    double mu_used = 0.0;
};

// Multiphoton-tagging bound for BB84 with two detectors and active
// demodulation (no interferometer loss).
Bb84Rates bb84_rates(const SystemParams& params, const Bb84SourceSpec& source);
double bb84_secure_rate(const SystemParams& params, const Bb84SourceSpec& source);

struct RateCurvePoint {
    double loss_db = 0.0;
    double fiber_km = 0.0;
    double sifted_rate = 0.0;
    double qber = 0.0;
    double tau = 0.0;
    double secure_rate = 0.0;
};

struct RateCurve {
    std::vector<RateCurvePoint> points;
    std::optional<double> cutoff_db;  // midpoint of last positive / first zero
};

// Evaluates the analytic chain (DPS, or BB84 when a source is given) over a
// monotone grid of channel losses.
RateCurve sweep_rates(const SystemParams& params, const std::vector<double>& loss_grid_db,
                      const std::optional<Bb84SourceSpec>& bb84_source = std::nullopt, int workers = 1);

std::vector<double> make_loss_grid(double start_db, double stop_db, double step_db);

}  // namespace dpsqkd
