#pragma once

#include <optional>
#include <string>

#include <json.hpp>

#include "dpsqkd/attacks.hpp"
#include "dpsqkd/mc.hpp"
#include "dpsqkd/params.hpp"
#include "dpsqkd/security.hpp"

namespace dpsqkd {

class ConfigError : public std::runtime_error {
  public:
    enum class Code { MalformedConfig, UnknownField, MissingField };
    ConfigError(Code code, std::string what) : std::runtime_error(std::move(what)), code_(code) {}
    Code code() const { return code_; }

  private:
    Code code_;
};

class IoError : public std::runtime_error {
  public:
    explicit IoError(std::string what) : std::runtime_error(std::move(what)) {}
};

// Parses the JSON config schema. Fields absent from the file fall back to
// `base` (the preset) when one is given; without a base every physical
// field must be present. Unknown keys are rejected.
SystemParams load_config_json(const nlohmann::json& doc, const std::optional<SystemParams>& base);
SystemParams load_config(const std::string& path, const std::optional<SystemParams>& base);

nlohmann::ordered_json params_to_json(const SystemParams& params);

nlohmann::ordered_json security_report_json(const SecurityReport& report, double loss_db,
                                            std::optional<double> fiber_km);
nlohmann::ordered_json usd_report_json(const UsdThresholdReport& report);

std::string curve_csv(const RateCurve& curve);
std::string histogram_csv(const Histogram& hist);
std::string records_csv(const std::vector<DetectionRecord>& records);

void write_file(const std::string& path, const std::string& contents);

}  // namespace dpsqkd
