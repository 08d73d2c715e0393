#include "dpsqkd/security.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <thread>

namespace dpsqkd {

namespace {

struct TableAnchor {
    double e;
    double f;
};

// Interactive-code performance anchors; flat beyond the last one.
constexpr TableAnchor kEcTable[] = {
    {0.00, 1.00}, {0.01, 1.16}, {0.05, 1.16}, {0.10, 1.22}, {0.15, 1.35},
};

void check_unit_range(double e, double hi, const char* what) {
    if (!(e >= 0.0) || e > hi) {
        throw SecurityError(SecurityError::Code::OutOfDomain, std::string(what) + " out of domain");
    }
}

}  // namespace

double binary_entropy(double e) {
    check_unit_range(e, 1.0, "binary_entropy argument");
    if (e == 0.0 || e == 1.0) return 0.0;
    return -e * std::log2(e) - (1.0 - e) * std::log2(1.0 - e);
}

double collision_bound(double e) {
    check_unit_range(e, 0.5, "collision_bound argument");
    const double one_minus_6e = 1.0 - 6.0 * e;
    const double v = 1.0 - e * e - one_minus_6e * one_minus_6e / 2.0;
    return std::clamp(v, 0.0, 1.0);
}

double compression_factor(double e, double mu) {
    if (!(mu > 0.0)) throw SecurityError(SecurityError::Code::OutOfDomain, "mu must be positive");
    if (mu >= 0.5) return 0.0;
    const double pc0 = collision_bound(e);
    return -(1.0 - 2.0 * mu) * std::log2(pc0);
}

double ec_efficiency(double e, const EcModel& model) {
    check_unit_range(e, 0.5, "ec_efficiency argument");
    if (model.type == EcModel::Type::constant) {
        return e == 0.0 ? 1.0 : model.constant;
    }
    constexpr size_t n = sizeof(kEcTable) / sizeof(kEcTable[0]);
    if (e >= kEcTable[n - 1].e) return kEcTable[n - 1].f;
    for (size_t i = 1; i < n; ++i) {
        if (e <= kEcTable[i].e) {
            const double t = (e - kEcTable[i - 1].e) / (kEcTable[i].e - kEcTable[i - 1].e);
            return kEcTable[i - 1].f + t * (kEcTable[i].f - kEcTable[i - 1].f);
        }
    }
    return kEcTable[n - 1].f;
}

AnalyticRates analytic_rates(const SystemParams& params) {
    const SystemParams p = validate_params(params);
    const TimingModel timing = make_timing_model(p);

    AnalyticRates r;
    r.acceptance = timing.total;
    r.p_sig = p.mu * channel_transmittance(p) * db_to_transmittance(p.interferometer_loss_db) * p.detector_qe *
              timing.total;
    const double dark_total = p.dark_rate_total_hz();
    if (p.dark_window_mode == DarkWindowMode::window) {
        r.p_dark = dark_total * p.window_width_ps * 1e-12;
    } else {
        r.p_dark = dark_total / p.clock_rate_hz;
    }
    const double p_total = r.p_sig + r.p_dark;
    r.sifted_rate = p.clock_rate_hz * p_total;
    r.qber = p_total > 0.0 ? (p.baseline_error * r.p_sig + 0.5 * r.p_dark) / p_total : 0.0;
    return r;
}

SecurityReport secure_rate(double sifted_rate, double e, double mu, const EcModel& model) {
    SecurityReport rep;
    rep.qber = e;
    rep.sifted_rate = sifted_rate;
    rep.sifted_length = sifted_rate > 0.0 ? uint64_t(std::llround(sifted_rate)) : 0;
    rep.p_c0 = collision_bound(e);
    rep.tau = compression_factor(e, mu);
    rep.ec_leakage = ec_efficiency(e, model) * binary_entropy(e);
    rep.secure_rate = sifted_rate * std::max(0.0, rep.tau - rep.ec_leakage);
    rep.secure_fraction = sifted_rate > 0.0 ? rep.secure_rate / sifted_rate : 0.0;
    return rep;
}

double error_threshold_individual(double mu, const EcModel& model) {
    if (!(mu > 0.0) || mu >= 0.5) {
        throw SecurityError(SecurityError::Code::NoPositiveRegion, "no positive-rate region for this mu");
    }
    auto margin = [&](double e) { return compression_factor(e, mu) - ec_efficiency(e, model) * binary_entropy(e); };
    double lo = 0.0;          // margin(0) = (1-2mu) > 0
    double hi = 1.0 / 6.0;    // tau(1/6) < f*h(1/6) always
    if (margin(hi) > 0.0) {
        throw SecurityError(SecurityError::Code::NoPositiveRegion, "no zero crossing below e = 1/6");
    }
    while (hi - lo > 1e-6) {
        const double mid = 0.5 * (lo + hi);
        if (margin(mid) > 0.0)
            lo = mid;
        else
            hi = mid;
    }
    return 0.5 * (lo + hi);
}

Bb84Rates bb84_rates(const SystemParams& params, const Bb84SourceSpec& source) {
    const SystemParams p = validate_params(params);
    const TimingModel timing = make_timing_model(p);
    const double t_ch = channel_transmittance(p);
    const double acceptance = timing.total;

    const double dark_total = p.dark_rate_total_hz();
    const double p_dark = p.dark_window_mode == DarkWindowMode::window ? dark_total * p.window_width_ps * 1e-12
                                                                       : dark_total / p.clock_rate_hz;

    auto evaluate = [&](double mu_src, double p_multi) {
        Bb84Rates r;
        r.mu_used = mu_src;
        const double p_sig = mu_src * t_ch * p.detector_qe * acceptance;
        const double p_click = p_sig + p_dark;
        r.sifted_rate = 0.5 * p.clock_rate_hz * p_click;
        r.qber = p_click > 0.0 ? (p.baseline_error * p_sig + 0.5 * p_dark) / p_click : 0.0;
        r.delta = p_click > 0.0 ? std::min(1.0, p_multi / p_click) : 1.0;
        const double f_h = ec_efficiency(r.qber, p.ec_model) * binary_entropy(r.qber);
        double pa_term = 0.0;
        if (r.delta < 1.0) {
            const double e_adj = std::min(0.5, r.qber / (1.0 - r.delta));
            pa_term = (1.0 - r.delta) * (1.0 - binary_entropy(e_adj));
        }
        r.secure_rate = r.sifted_rate * std::max(0.0, pa_term - f_h);
        return r;
    };

    if (source.kind == Bb84SourceSpec::Kind::single_photon) {
        if (source.g2 < 0.0 || !(source.eta_src > 0.0) || source.eta_src > 1.0) {
            throw SecurityError(SecurityError::Code::OutOfDomain, "bad single-photon source spec");
        }
        return evaluate(source.eta_src, 0.5 * source.g2 * source.eta_src * source.eta_src);
    }

    if (!(source.mu_wcp > 0.0)) {
        throw SecurityError(SecurityError::Code::OutOfDomain, "mu_wcp must be positive");
    }
    auto rate_at = [&](double mu) { return evaluate(mu, 0.5 * mu * mu); };
    if (!source.optimize) return rate_at(source.mu_wcp);

    // golden-section search for the best mean photon number in (0, 1]
    const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
    double a = 1e-6, b = 1.0;
    double c = b - inv_phi * (b - a);
    double d = a + inv_phi * (b - a);
    for (int it = 0; it < 120; ++it) {
        // ties shrink from above so the zero plateau past the tagging
        // bound cannot capture the bracket
        if (rate_at(c).secure_rate >= rate_at(d).secure_rate)
            b = d;
        else
            a = c;
        c = b - inv_phi * (b - a);
        d = a + inv_phi * (b - a);
    }
    return rate_at(0.5 * (a + b));
}

double bb84_secure_rate(const SystemParams& params, const Bb84SourceSpec& source) {
    return bb84_rates(params, source).secure_rate;
}

std::vector<double> make_loss_grid(double start_db, double stop_db, double step_db) {
    if (!(step_db > 0.0) || stop_db < start_db) throw std::invalid_argument("bad grid spec");
    std::vector<double> grid;
    const int count = int(std::floor((stop_db - start_db) / step_db + 1e-9)) + 1;
    grid.reserve(size_t(count));
    for (int i = 0; i < count; ++i) grid.push_back(start_db + step_db * i);
    return grid;
}

RateCurve sweep_rates(const SystemParams& params, const std::vector<double>& loss_grid_db,
                      const std::optional<Bb84SourceSpec>& bb84_source, int workers) {
    SystemParams base = params;
    const double km_per_db =
        1.0 / (base.fiber && base.fiber->loss_coeff_db_per_km > 0.0 ? base.fiber->loss_coeff_db_per_km : 0.2);

    RateCurve curve;
    curve.points.resize(loss_grid_db.size());

    auto eval_point = [&](size_t i) {
        SystemParams p = base;
        p.fiber.reset();
        p.channel_loss_db = loss_grid_db[i];
        RateCurvePoint& pt = curve.points[i];
        pt.loss_db = loss_grid_db[i];
        pt.fiber_km = loss_grid_db[i] * km_per_db;
        if (bb84_source) {
            Bb84Rates r = bb84_rates(p, *bb84_source);
            pt.sifted_rate = r.sifted_rate;
            pt.qber = r.qber;
            pt.tau = 0.0;
            pt.secure_rate = r.secure_rate;
        } else {
            AnalyticRates r = analytic_rates(p);
            SecurityReport rep = secure_rate(r.sifted_rate, r.qber, p.mu, p.ec_model);
            pt.sifted_rate = r.sifted_rate;
            pt.qber = r.qber;
            pt.tau = rep.tau;
            pt.secure_rate = rep.secure_rate;
        }
    };

    if (workers <= 1 || curve.points.size() < 2) {
        for (size_t i = 0; i < curve.points.size(); ++i) eval_point(i);
    } else {
        std::atomic<size_t> next{0};
        auto worker = [&] {
            for (;;) {
                size_t i = next.fetch_add(1);
                if (i >= curve.points.size()) return;
                eval_point(i);
            }
        };
        std::vector<std::thread> pool;
        const int n = std::min<int>(workers, int(curve.points.size()));
        for (int t = 0; t < n; ++t) pool.emplace_back(worker);
        for (auto& th : pool) th.join();
    }

    for (size_t i = 0; i + 1 < curve.points.size(); ++i) {
        if (curve.points[i].secure_rate > 0.0 && curve.points[i + 1].secure_rate <= 0.0) {
            curve.cutoff_db = 0.5 * (curve.points[i].loss_db + curve.points[i + 1].loss_db);
            break;
        }
    }
    return curve;
}

}  // namespace dpsqkd
