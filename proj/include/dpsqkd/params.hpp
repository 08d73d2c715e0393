#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace dpsqkd {

// Error-correction efficiency model f(e) >= 1.
struct EcModel {
    enum class Type { constant, table };
    Type type = Type::table;
    double constant = 1.16;  // used in constant mode

    bool operator==(const EcModel&) const = default;
};

enum class DarkRateInterpretation {
    per_detector,  // dark_rate counts each detector separately
    summed,        // dark_rate is the total over both detectors
};

enum class DarkWindowMode {
    window,       // darks accepted in proportion to the time window
    full_period,  // darks accepted over the whole clock period
};

struct FiberSpec {
    double length_km = 0.0;
    double loss_coeff_db_per_km = 0.2;

    bool operator==(const FiberSpec&) const = default;
};

// Full physical configuration of one DPS-QKD link.
struct SystemParams {
    double clock_rate_hz = 1e10;
    double mu = 0.2;  // mean photon number per pulse

    // exactly one channel mode must be set
    std::optional<FiberSpec> fiber;
    std::optional<double> channel_loss_db;

    double interferometer_loss_db = 2.5;
    double detector_qe = 0.014;
    double dark_rate_hz = 50.0;
    DarkRateInterpretation dark_rate_interpretation = DarkRateInterpretation::per_detector;
    DarkWindowMode dark_window_mode = DarkWindowMode::window;
    double jitter_fwhm_ps = 60.0;
    double window_width_ps = 50.0;
    std::optional<double> window_acceptance_override;
    double baseline_error = 0.023;
    EcModel ec_model;

    bool operator==(const SystemParams&) const = default;

    int64_t period_fs() const;
    int64_t window_fs() const;
    double channel_loss_total_db() const;
    // total dark rate over both detectors, in Hz
    double dark_rate_total_hz() const;
};

class ValidationError : public std::runtime_error {
  public:
    enum class Code {
        NonPositiveMu,
        QeOutOfRange,
        WindowExceedsPeriod,
        AmbiguousChannelSpec,
        NegativeRate,
        BadBaselineError,
        BadOverride,
        BadClockRate,
    };

    ValidationError(Code code, std::string field, std::string what)
        : std::runtime_error(std::move(what)), code_(code), field_(std::move(field)) {}

    Code code() const { return code_; }
    const std::string& field() const { return field_; }

  private:
    Code code_;
    std::string field_;
};

// Returns the input unchanged if every invariant holds; throws
// ValidationError naming the violated field otherwise. Idempotent.
SystemParams validate_params(const SystemParams& raw);

// 10^(-loss_db/10) for the channel loss alone (interferometer loss is
// accounted separately by callers).
double channel_transmittance(const SystemParams& params);
double db_to_transmittance(double loss_db);

// Built-in presets; names resolve without file access.
std::optional<SystemParams> preset_params(const std::string& name);
std::vector<std::string> preset_names();

}  // namespace dpsqkd
