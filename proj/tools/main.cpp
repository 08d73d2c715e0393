#include <CLI11.hpp>

#include <cmath>
#include <cstdio>
#include <iostream>
#include <optional>
#include <string>
#include <thread>

#include "dpsqkd/attacks.hpp"
#include "dpsqkd/io.hpp"
#include "dpsqkd/mc.hpp"
#include "dpsqkd/security.hpp"
#include "dpsqkd/session.hpp"
#include "dpsqkd/sift.hpp"

namespace {

using namespace dpsqkd;

constexpr int kExitUsage = 2;
constexpr int kExitValidation = 3;
constexpr int kExitRuntime = 4;

class UsageError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

struct CommonOpts {
    std::string preset;
    std::string config_path;
    std::optional<double> loss_db;
    std::optional<double> length_km;
    double loss_per_km = 0.2;
    std::string out_path;
    int workers = 1;
};

void add_common(CLI::App* cmd, CommonOpts& opts, bool with_channel = true) {
    cmd->add_option("--preset", opts.preset, "built-in parameter preset (paper-10ghz, paper-1ghz)");
    cmd->add_option("--config", opts.config_path, "JSON parameter file");
    if (with_channel) {
        auto* loss = cmd->add_option("--loss-db", opts.loss_db, "direct channel loss in dB");
        auto* len = cmd->add_option("--length-km", opts.length_km, "fiber length in km");
        cmd->add_option("--loss-per-km", opts.loss_per_km, "fiber loss coefficient, dB/km")->default_val(0.2);
        loss->excludes(len);
        len->excludes(loss);
    }
    cmd->add_option("--out", opts.out_path, "output path");
    cmd->add_option("--workers", opts.workers, "worker threads (never changes results)")->default_val(1);
}

SystemParams resolve_params(const CommonOpts& opts, bool need_channel) {
    std::optional<SystemParams> base;
    if (!opts.preset.empty()) {
        base = preset_params(opts.preset);
        if (!base) throw UsageError("unknown preset `" + opts.preset + "` (try paper-10ghz, paper-1ghz)");
    }
    SystemParams params;
    if (!opts.config_path.empty()) {
        params = load_config(opts.config_path, base);
    } else if (base) {
        params = *base;
    } else {
        throw UsageError("need --preset or --config");
    }
    if (opts.loss_db) {
        params.fiber.reset();
        params.channel_loss_db = opts.loss_db;
    } else if (opts.length_km) {
        params.channel_loss_db.reset();
        params.fiber = FiberSpec{*opts.length_km, opts.loss_per_km};
    }
    if (need_channel) {
        return validate_params(params);
    }
    return params;
}

uint64_t parse_count(const std::string& text, const char* what) {
    try {
        const double v = std::stod(text);
        if (!(v >= 1.0) || v != std::floor(v) || v > 1e15) throw UsageError(std::string("bad ") + what);
        return uint64_t(v);
    } catch (const std::invalid_argument&) {
        throw UsageError(std::string("bad ") + what + " `" + text + "`");
    }
}

std::vector<double> parse_grid(const std::string& spec) {
    double start = 0, stop = 0, step = 0;
    if (std::sscanf(spec.c_str(), "%lf:%lf:%lf", &start, &stop, &step) != 3 || step <= 0.0 || stop < start) {
        throw UsageError("bad --grid, expected start:stop:step with step > 0");
    }
    return make_loss_grid(start, stop, step);
}

SessionMode parse_mode(const std::string& text) {
    if (text == "full") return SessionMode::full();
    if (text.rfind("sampled:", 0) == 0) {
        return SessionMode::sample(uint32_t(parse_count(text.substr(8), "sample size")));
    }
    throw UsageError("bad --mode, expected full or sampled:K");
}

void emit_json(const nlohmann::ordered_json& doc, const std::string& out_path) {
    const std::string text = doc.dump(2) + "\n";
    if (out_path.empty()) {
        std::fputs(text.c_str(), stdout);
    } else {
        write_file(out_path, text);
    }
}

std::string sibling_json_path(const std::string& path) {
    const auto dot = path.rfind('.');
    const auto slash = path.rfind('/');
    if (dot != std::string::npos && (slash == std::string::npos || dot > slash)) {
        return path.substr(0, dot) + ".json";
    }
    return path + ".json";
}

int cmd_analyze(const CommonOpts& opts) {
    SystemParams params = resolve_params(opts, true);
    AnalyticRates rates = analytic_rates(params);
    SecurityReport report = secure_rate(rates.sifted_rate, rates.qber, params.mu, params.ec_model);
    std::optional<double> fiber_km;
    if (params.fiber) fiber_km = params.fiber->length_km;
    emit_json(security_report_json(report, params.channel_loss_total_db(), fiber_km), opts.out_path);
    return 0;
}

int cmd_simulate(const CommonOpts& opts, const std::string& slots_text, std::optional<uint64_t> seed,
                 const std::string& hist_out, double hist_bin_ps, uint64_t hist_span,
                 const std::string& hist_windowed_out, const std::string& records_out) {
    if (!seed) throw UsageError("--seed is required for simulate");
    SystemParams params = resolve_params(opts, true);
    const uint64_t slots = parse_count(slots_text, "--slots");

    PhaseSequence phases = generate_phases(slots, *seed);
    auto records = simulate_detection(params, phases, *seed, opts.workers);
    auto windowed = apply_window(records, params.window_width_ps);
    auto [bob_key, disclose] = bob_extract(windowed);
    SiftedKey alice_key = alice_sift(phases, disclose);
    auto [errors, compared] = measure_qber(alice_key, bob_key);

    if (!hist_out.empty()) {
        write_file(hist_out, histogram_csv(arrival_histogram(records, hist_bin_ps, hist_span, params.period_fs())));
    }
    if (!hist_windowed_out.empty()) {
        write_file(hist_windowed_out,
                   histogram_csv(arrival_histogram(windowed, hist_bin_ps, hist_span, params.period_fs())));
    }
    if (!records_out.empty()) {
        write_file(records_out, records_csv(records));
    }

    AnalyticRates model = analytic_rates(params);
    nlohmann::ordered_json j;
    j["slots"] = slots;
    j["seed"] = *seed;
    j["records_total"] = records.size();
    j["records_windowed"] = windowed.size();
    j["sifted_bits"] = bob_key.entries.size();
    j["errors"] = errors;
    j["compared"] = compared;
    j["qber_measured"] = compared ? double(errors) / double(compared) : 0.0;
    j["sifted_rate_hz_measured"] = double(bob_key.entries.size()) * params.clock_rate_hz / double(slots);
    j["analytic"] = {{"sifted_rate_hz", model.sifted_rate}, {"qber", model.qber}};
    emit_json(j, opts.out_path);
    return 0;
}

int cmd_sweep(const CommonOpts& opts, const std::string& grid_spec, const std::string& protocol) {
    SystemParams params = resolve_params(opts, false);
    const std::vector<double> grid = parse_grid(grid_spec);

    std::optional<Bb84SourceSpec> source;
    if (protocol == "dps") {
        source.reset();
    } else if (protocol.rfind("bb84-sp:", 0) == 0) {
        double g2 = 0.0, eta = 1.0;
        const int n = std::sscanf(protocol.c_str(), "bb84-sp:%lf:%lf", &g2, &eta);
        if (n < 1) throw UsageError("bad --protocol, expected bb84-sp:G2[:ETA]");
        source = Bb84SourceSpec::single_photon(g2, eta);
    } else if (protocol == "bb84-wcp-opt") {
        source = Bb84SourceSpec::weak_coherent(0.1, true);
    } else if (protocol.rfind("bb84-wcp:", 0) == 0) {
        double mu = 0.0;
        if (std::sscanf(protocol.c_str(), "bb84-wcp:%lf", &mu) != 1) {
            throw UsageError("bad --protocol, expected bb84-wcp:MU");
        }
        source = Bb84SourceSpec::weak_coherent(mu, false);
    } else {
        throw UsageError("bad --protocol `" + protocol + "`");
    }

    RateCurve curve = sweep_rates(params, grid, source, opts.workers);
    const std::string csv = curve_csv(curve);

    nlohmann::ordered_json summary;
    summary["protocol"] = protocol;
    summary["points"] = curve.points.size();
    if (curve.cutoff_db)
        summary["cutoff_db"] = *curve.cutoff_db;
    else
        summary["cutoff_db"] = nullptr;

    if (opts.out_path.empty()) {
        std::fputs(csv.c_str(), stdout);
    } else {
        write_file(opts.out_path, csv);
        write_file(sibling_json_path(opts.out_path), summary.dump(2) + "\n");
    }
    return 0;
}

int cmd_usd_threshold(const CommonOpts& opts, std::optional<uint64_t> seed, bool audit,
                      const std::string& audit_slots_text) {
    SystemParams params = resolve_params(opts, true);
    UsdThresholdReport report = usd_threshold(params);
    nlohmann::ordered_json j = usd_report_json(report);
    if (audit) {
        if (!seed) throw UsageError("--seed is required with --audit");
        const uint64_t audit_slots = parse_count(audit_slots_text, "--audit-slots");
        UsdAttackOutcome out = simulate_usd(params, report.best_strategy, audit_slots, *seed, opts.workers);
        j["audit"] = {{"slots", out.slots},
                      {"clicks", out.clicks},
                      {"yield", out.yield},
                      {"error_rate", out.error_rate},
                      {"boundary_clicks", out.boundary_clicks},
                      {"interior_clicks", out.interior_clicks}};
    }
    emit_json(j, opts.out_path);
    return 0;
}

int cmd_bb84_compare(const CommonOpts& opts, const std::string& grid_spec, const std::string& sources_text) {
    SystemParams params = resolve_params(opts, false);
    const std::vector<double> grid = parse_grid(grid_spec);

    std::vector<std::pair<std::string, std::optional<Bb84SourceSpec>>> sources;
    std::string token;
    std::stringstream ss(sources_text);
    while (std::getline(ss, token, ',')) {
        if (token == "dps") {
            sources.push_back({token, std::nullopt});
        } else if (token.rfind("g2=", 0) == 0) {
            sources.push_back({token, Bb84SourceSpec::single_photon(std::stod(token.substr(3)), 1.0)});
        } else if (token == "wcp-opt") {
            sources.push_back({token, Bb84SourceSpec::weak_coherent(0.1, true)});
        } else {
            throw UsageError("bad --sources entry `" + token + "`");
        }
    }
    if (sources.empty()) throw UsageError("--sources must name at least one curve");

    std::string csv = "source,loss_db,sifted_rate_hz,qber,secure_rate_hz\n";
    nlohmann::ordered_json cutoffs;
    char buf[192];
    for (const auto& [name, source] : sources) {
        RateCurve curve = sweep_rates(params, grid, source, opts.workers);
        for (const auto& pt : curve.points) {
            std::snprintf(buf, sizeof(buf), "%s,%.9g,%.9g,%.9g,%.9g\n", name.c_str(), pt.loss_db, pt.sifted_rate,
                          pt.qber, pt.secure_rate);
            csv += buf;
        }
        if (curve.cutoff_db)
            cutoffs[name] = *curve.cutoff_db;
        else
            cutoffs[name] = nullptr;
    }

    nlohmann::ordered_json summary;
    summary["cutoffs_db"] = cutoffs;
    if (opts.out_path.empty()) {
        std::fputs(csv.c_str(), stdout);
        std::fputs((summary.dump(2) + "\n").c_str(), stdout);
    } else {
        write_file(opts.out_path, csv);
        write_file(sibling_json_path(opts.out_path), summary.dump(2) + "\n");
    }
    return 0;
}

int cmd_session(const CommonOpts& opts, const std::string& role_text, const std::string& listen_addr,
                const std::string& connect_addr, const std::string& slots_text, std::optional<uint64_t> seed,
                const std::string& mode_text, const std::string& log_out) {
    if (!seed) throw UsageError("--seed is required for session");
    if (listen_addr.empty() == connect_addr.empty()) {
        throw UsageError("session needs exactly one of --listen or --connect");
    }
    Role role;
    if (role_text == "alice")
        role = Role::alice;
    else if (role_text == "bob")
        role = Role::bob;
    else
        throw UsageError("--role must be alice or bob");

    SystemParams params = resolve_params(opts, true);
    const uint64_t slots = parse_count(slots_text, "--slots");
    const SessionMode mode = parse_mode(mode_text);

    std::unique_ptr<ByteStream> stream =
        listen_addr.empty() ? tcp_connect(connect_addr) : tcp_listen_accept(listen_addr);
    SessionResult result = run_session(*stream, role, params, slots, *seed, mode, opts.workers);

    if (!log_out.empty()) {
        std::string log_bytes;
        for (const auto& frame : result.log) {
            log_bytes.push_back(frame.outgoing ? char(0x00) : char(0x01));
            log_bytes.append(frame.bytes.begin(), frame.bytes.end());
        }
        write_file(log_out, log_bytes);
    }

    nlohmann::ordered_json j;
    j["role"] = role_text;
    j["slots"] = slots;
    j["seed"] = *seed;
    j["key_bits"] = result.key.entries.size();
    j["errors"] = result.errors;
    j["compared"] = result.compared;
    j["qber_estimate"] = result.qber_estimate;
    j["frames_sent"] = std::count_if(result.log.begin(), result.log.end(),
                                     [](const LoggedFrame& f) { return f.outgoing; });
    j["frames_received"] = std::count_if(result.log.begin(), result.log.end(),
                                         [](const LoggedFrame& f) { return !f.outgoing; });
    emit_json(j, opts.out_path);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"DPS-QKD simulation and security analysis toolkit"};
    app.require_subcommand(1);

    CommonOpts analyze_opts, simulate_opts, sweep_opts, usd_opts, bb84_opts, session_opts;

    auto* analyze = app.add_subcommand("analyze", "closed-form rates and security report at one channel setting");
    add_common(analyze, analyze_opts);

    auto* simulate = app.add_subcommand("simulate", "photon-level Monte Carlo session in-process");
    add_common(simulate, simulate_opts);
    std::string slots_text = "1000000";
    std::optional<uint64_t> sim_seed;
    std::string hist_out, hist_windowed_out, records_out;
    double hist_bin_ps = 1.0;
    uint64_t hist_span = 5;
    simulate->add_option("--slots", slots_text, "number of clock slots (accepts 1e8 style)");
    simulate->add_option("--seed", sim_seed, "root random seed (required)");
    simulate->add_option("--hist-out", hist_out, "arrival-time histogram CSV (before windowing)");
    simulate->add_option("--hist-windowed-out", hist_windowed_out, "arrival-time histogram CSV (after windowing)");
    simulate->add_option("--hist-bin-ps", hist_bin_ps, "histogram bin width, ps")->default_val(1.0);
    simulate->add_option("--hist-span", hist_span, "histogram span, slots")->default_val(5);
    simulate->add_option("--records-out", records_out, "debug record dump CSV");

    auto* sweep = app.add_subcommand("sweep", "rate curve over a channel-loss grid");
    add_common(sweep, sweep_opts, false);
    std::string grid_spec = "0:50:0.1";
    std::string protocol = "dps";
    sweep->add_option("--grid", grid_spec, "loss grid start:stop:step in dB")->default_val("0:50:0.1");
    sweep->add_option("--protocol", protocol, "dps | bb84-sp:G2[:ETA] | bb84-wcp:MU | bb84-wcp-opt")
        ->default_val("dps");

    auto* usd = app.add_subcommand("usd-threshold", "sequential-USD attack threshold search");
    add_common(usd, usd_opts);
    std::optional<uint64_t> usd_seed;
    bool audit = false;
    std::string audit_slots = "10000000";
    usd->add_option("--seed", usd_seed, "root random seed for the Monte Carlo audit");
    usd->add_flag("--audit", audit, "cross-check the best strategy with the attack simulator");
    usd->add_option("--audit-slots", audit_slots, "slots for the audit run")->default_val("10000000");

    auto* bb84 = app.add_subcommand("bb84-compare", "DPS vs BB84 source family over a loss grid");
    add_common(bb84, bb84_opts, false);
    std::string bb84_grid = "0:60:0.1";
    std::string sources = "dps,g2=0,g2=1e-6,g2=1e-5,g2=1e-2,wcp-opt";
    bb84->add_option("--grid", bb84_grid, "loss grid start:stop:step in dB")->default_val("0:60:0.1");
    bb84->add_option("--sources", sources, "comma list: dps, g2=VALUE, wcp-opt")
        ->default_val("dps,g2=0,g2=1e-6,g2=1e-5,g2=1e-2,wcp-opt");

    auto* session = app.add_subcommand("session", "two-party sifting protocol over TCP");
    add_common(session, session_opts);
    std::string role_text, listen_addr, connect_addr, mode_text = "full", log_out, session_slots = "1000000";
    std::optional<uint64_t> session_seed;
    session->add_option("--role", role_text, "alice | bob")->required();
    session->add_option("--listen", listen_addr, "listen address host:port");
    session->add_option("--connect", connect_addr, "connect address host:port");
    session->add_option("--slots", session_slots, "number of clock slots");
    session->add_option("--seed", session_seed, "shared root seed (required)");
    session->add_option("--mode", mode_text, "full | sampled:K")->default_val("full");
    session->add_option("--log-out", log_out, "binary message log path");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitUsage;
    }

    try {
        if (analyze->parsed()) return cmd_analyze(analyze_opts);
        if (simulate->parsed()) {
            return cmd_simulate(simulate_opts, slots_text, sim_seed, hist_out, hist_bin_ps, hist_span,
                                hist_windowed_out, records_out);
        }
        if (sweep->parsed()) return cmd_sweep(sweep_opts, grid_spec, protocol);
        if (usd->parsed()) return cmd_usd_threshold(usd_opts, usd_seed, audit, audit_slots);
        if (bb84->parsed()) return cmd_bb84_compare(bb84_opts, bb84_grid, sources);
        if (session->parsed()) {
            return cmd_session(session_opts, role_text, listen_addr, connect_addr, session_slots, session_seed,
                               mode_text, log_out);
        }
        std::fprintf(stderr, "no command given\n");
        return kExitUsage;
    } catch (const UsageError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitUsage;
    } catch (const ValidationError& e) {
        std::fprintf(stderr, "invalid parameters (%s): %s\n", e.field().c_str(), e.what());
        return kExitValidation;
    } catch (const ConfigError& e) {
        std::fprintf(stderr, "bad config: %s\n", e.what());
        return kExitValidation;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitRuntime;
    }
}
