#include "dpsqkd/io.hpp"

#include <cinttypes>
#include <cstdio>
#include <fstream>
#include <set>

namespace dpsqkd {

namespace {

using nlohmann::json;

[[noreturn]] void malformed(const std::string& what) {
    throw ConfigError(ConfigError::Code::MalformedConfig, what);
}

void check_keys(const json& obj, const std::set<std::string>& allowed, const std::string& where) {
    for (auto it = obj.begin(); it != obj.end(); ++it) {
        if (!allowed.count(it.key())) {
            throw ConfigError(ConfigError::Code::UnknownField, "unknown field `" + it.key() + "` in " + where);
        }
    }
}

double require_number(const json& obj, const std::string& key) {
    if (!obj.contains(key)) {
        throw ConfigError(ConfigError::Code::MissingField,
                          "field `" + key + "` required when no preset is given");
    }
    if (!obj[key].is_number()) malformed("field `" + key + "` must be a number");
    return obj[key].get<double>();
}

std::string fmt9(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.9g", v);
    return buf;
}

}  // namespace

SystemParams load_config_json(const json& doc, const std::optional<SystemParams>& base) {
    if (!doc.is_object()) malformed("config root must be a JSON object");
    check_keys(doc,
               {"clock_rate", "mu", "channel_spec", "interferometer_loss", "detector_qe", "dark_rate",
                "dark_rate_interpretation", "dark_window_mode", "jitter_fwhm", "window_width",
                "window_acceptance_override", "baseline_error", "ec_model"},
               "config");

    SystemParams p = base.value_or(SystemParams{});
    if (!base) {
        // no preset: physical fields are mandatory
        p.clock_rate_hz = require_number(doc, "clock_rate");
        p.mu = require_number(doc, "mu");
        p.interferometer_loss_db = require_number(doc, "interferometer_loss");
        p.detector_qe = require_number(doc, "detector_qe");
        p.dark_rate_hz = require_number(doc, "dark_rate");
        p.jitter_fwhm_ps = require_number(doc, "jitter_fwhm");
        p.window_width_ps = require_number(doc, "window_width");
        p.baseline_error = require_number(doc, "baseline_error");
        p.window_acceptance_override.reset();
    }

    auto number_if = [&](const char* key, double& out) {
        if (doc.contains(key)) {
            if (!doc[key].is_number()) malformed(std::string("field `") + key + "` must be a number");
            out = doc[key].get<double>();
        }
    };
    number_if("clock_rate", p.clock_rate_hz);
    number_if("mu", p.mu);
    number_if("interferometer_loss", p.interferometer_loss_db);
    number_if("detector_qe", p.detector_qe);
    number_if("dark_rate", p.dark_rate_hz);
    number_if("jitter_fwhm", p.jitter_fwhm_ps);
    number_if("window_width", p.window_width_ps);
    number_if("baseline_error", p.baseline_error);

    if (doc.contains("window_acceptance_override")) {
        const auto& v = doc["window_acceptance_override"];
        if (v.is_null()) {
            p.window_acceptance_override.reset();
        } else if (v.is_number()) {
            p.window_acceptance_override = v.get<double>();
        } else {
            malformed("window_acceptance_override must be a number or null");
        }
    }

    if (doc.contains("dark_rate_interpretation")) {
        const std::string v = doc["dark_rate_interpretation"].get<std::string>();
        if (v == "per_detector")
            p.dark_rate_interpretation = DarkRateInterpretation::per_detector;
        else if (v == "summed")
            p.dark_rate_interpretation = DarkRateInterpretation::summed;
        else
            malformed("dark_rate_interpretation must be per_detector or summed");
    }
    if (doc.contains("dark_window_mode")) {
        const std::string v = doc["dark_window_mode"].get<std::string>();
        if (v == "window")
            p.dark_window_mode = DarkWindowMode::window;
        else if (v == "full_period")
            p.dark_window_mode = DarkWindowMode::full_period;
        else
            malformed("dark_window_mode must be window or full_period");
    }

    if (doc.contains("channel_spec")) {
        const auto& ch = doc["channel_spec"];
        if (!ch.is_object()) malformed("channel_spec must be an object");
        check_keys(ch, {"fiber_length", "fiber_loss_coeff", "channel_loss"}, "channel_spec");
        p.fiber.reset();
        p.channel_loss_db.reset();
        if (ch.contains("channel_loss")) {
            if (ch.contains("fiber_length") || ch.contains("fiber_loss_coeff")) {
                throw ValidationError(ValidationError::Code::AmbiguousChannelSpec, "channel_spec",
                                      "channel_spec mixes direct loss and fiber fields");
            }
            p.channel_loss_db = ch["channel_loss"].get<double>();
        } else if (ch.contains("fiber_length")) {
            FiberSpec f;
            f.length_km = ch["fiber_length"].get<double>();
            if (ch.contains("fiber_loss_coeff")) f.loss_coeff_db_per_km = ch["fiber_loss_coeff"].get<double>();
            p.fiber = f;
        } else {
            malformed("channel_spec needs channel_loss or fiber_length");
        }
    }

    if (doc.contains("ec_model")) {
        const auto& ec = doc["ec_model"];
        if (!ec.is_object()) malformed("ec_model must be an object");
        check_keys(ec, {"type", "value"}, "ec_model");
        const std::string type = ec.value("type", "table");
        if (type == "table") {
            p.ec_model = EcModel{EcModel::Type::table, 1.16};
        } else if (type == "constant") {
            p.ec_model.type = EcModel::Type::constant;
            p.ec_model.constant = ec.value("value", 1.16);
        } else {
            malformed("ec_model.type must be table or constant");
        }
    }

    return p;
}

SystemParams load_config(const std::string& path, const std::optional<SystemParams>& base) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config file " + path);
    json doc;
    try {
        in >> doc;
    } catch (const json::parse_error& e) {
        malformed(std::string("config is not valid JSON: ") + e.what());
    }
    return load_config_json(doc, base);
}

nlohmann::ordered_json params_to_json(const SystemParams& p) {
    nlohmann::ordered_json j;
    j["clock_rate"] = p.clock_rate_hz;
    j["mu"] = p.mu;
    if (p.fiber) {
        j["channel_spec"] = {{"fiber_length", p.fiber->length_km},
                             {"fiber_loss_coeff", p.fiber->loss_coeff_db_per_km}};
    } else if (p.channel_loss_db) {
        j["channel_spec"] = {{"channel_loss", *p.channel_loss_db}};
    }
    j["interferometer_loss"] = p.interferometer_loss_db;
    j["detector_qe"] = p.detector_qe;
    j["dark_rate"] = p.dark_rate_hz;
    j["dark_rate_interpretation"] =
        p.dark_rate_interpretation == DarkRateInterpretation::per_detector ? "per_detector" : "summed";
    j["dark_window_mode"] = p.dark_window_mode == DarkWindowMode::window ? "window" : "full_period";
    j["jitter_fwhm"] = p.jitter_fwhm_ps;
    j["window_width"] = p.window_width_ps;
    if (p.window_acceptance_override) j["window_acceptance_override"] = *p.window_acceptance_override;
    j["baseline_error"] = p.baseline_error;
    if (p.ec_model.type == EcModel::Type::table) {
        j["ec_model"] = {{"type", "table"}};
    } else {
        j["ec_model"] = {{"type", "constant"}, {"value", p.ec_model.constant}};
    }
    return j;
}

nlohmann::ordered_json security_report_json(const SecurityReport& r, double loss_db,
                                            std::optional<double> fiber_km) {
    nlohmann::ordered_json j;
    j["channel_loss_db"] = loss_db;
    if (fiber_km)
        j["fiber_km"] = *fiber_km;
    else
        j["fiber_km"] = nullptr;
    j["sifted_rate_hz"] = r.sifted_rate;
    j["qber"] = r.qber;
    j["sifted_length"] = r.sifted_length;
    j["p_c0"] = r.p_c0;
    j["tau"] = r.tau;
    j["ec_leakage"] = r.ec_leakage;
    j["secure_rate_hz"] = r.secure_rate;
    j["secure_fraction"] = r.secure_fraction;
    return j;
}

nlohmann::ordered_json usd_report_json(const UsdThresholdReport& r) {
    nlohmann::ordered_json j;
    j["channel_loss_db"] = r.channel_loss_db;
    j["yield"] = r.yield;
    j["best_strategy"] = {{"M", r.best_strategy.min_run},
                          {"p", r.best_strategy.resend_prob},
                          {"resend_mu", r.best_strategy.resend_mu}};
    j["e_star"] = r.e_star;
    j["individual_threshold"] = r.individual_threshold;
    j["binding_bound"] = r.binding_bound;
    return j;
}

std::string curve_csv(const RateCurve& curve) {
    std::string out = "loss_db,fiber_km,sifted_rate_hz,qber,tau,secure_rate_hz\n";
    for (const auto& pt : curve.points) {
        out += fmt9(pt.loss_db);
        out += ',';
        out += fmt9(pt.fiber_km);
        out += ',';
        out += fmt9(pt.sifted_rate);
        out += ',';
        out += fmt9(pt.qber);
        out += ',';
        out += fmt9(pt.tau);
        out += ',';
        out += fmt9(pt.secure_rate);
        out += '\n';
    }
    return out;
}

std::string histogram_csv(const Histogram& hist) {
    std::string out = "bin_start_ps,count\n";
    char buf[96];
    for (size_t i = 0; i < hist.counts.size(); ++i) {
        const double start_ps = double(hist.origin_fs + int64_t(i) * hist.bin_width_fs) / 1000.0;
        std::snprintf(buf, sizeof(buf), "%.3f,%" PRIu64 "\n", start_ps, hist.counts[i]);
        out += buf;
    }
    return out;
}

std::string records_csv(const std::vector<DetectionRecord>& records) {
    std::string out = "true_slot,assigned_slot,detector,offset_ps,cause\n";
    char buf[160];
    for (const auto& r : records) {
        std::snprintf(buf, sizeof(buf), "%" PRIu64 ",%" PRIu64 ",%s,%.3f,%s\n", r.true_slot, r.assigned_slot,
                      r.detector == Detector::d0 ? "D0" : "D1", double(r.offset_fs) / 1000.0,
                      r.cause == Cause::signal ? "signal" : "dark");
        out += buf;
    }
    return out;
}

void write_file(const std::string& path, const std::string& contents) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open output file " + path);
    out.write(contents.data(), std::streamsize(contents.size()));
    if (!out) throw IoError("write failed for " + path);
}

}  // namespace dpsqkd
