#include <doctest.h>

#include <chrono>
#include <cmath>

#include "dpsqkd/security.hpp"
#include "dpsqkd/stats.hpp"

using namespace dpsqkd;

namespace {

SystemParams paper_at_loss(double loss_db) {
    SystemParams p = *preset_params("paper-10ghz");
    p.channel_loss_db = loss_db;
    return p;
}

// direct high-precision evaluation, independent of the library routine
long double entropy_oracle(long double e) {
    if (e <= 0.0L || e >= 1.0L) return 0.0L;
    return (-e * std::log2(e) - (1.0L - e) * std::log2(1.0L - e));
}

}  // namespace

TEST_CASE("binary entropy") {
    CHECK(binary_entropy(0.0) == 0.0);
    CHECK(binary_entropy(1.0) == 0.0);
    CHECK(binary_entropy(0.5) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(std::abs(binary_entropy(0.023) - 0.1580) < 1e-4);
    CHECK(binary_entropy(0.023) == doctest::Approx(double(entropy_oracle(0.023L))).epsilon(1e-12));
    CHECK_THROWS_AS(binary_entropy(-0.1), SecurityError);
    CHECK_THROWS_AS(binary_entropy(1.1), SecurityError);
}

TEST_CASE("per-bit collision bound") {
    CHECK(collision_bound(0.0) == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(collision_bound(1.0 / 6.0) == doctest::Approx(35.0 / 36.0).epsilon(1e-12));
    CHECK(std::abs(collision_bound(0.04) - 0.7096) < 1e-4);
    CHECK_THROWS_AS(collision_bound(0.51), SecurityError);
}

TEST_CASE("compression factor") {
    CHECK(compression_factor(0.0, 0.2) == doctest::Approx(0.6).epsilon(1e-12));
    CHECK(compression_factor(0.1, 0.5) == 0.0);
    CHECK(compression_factor(0.3, 0.5) == 0.0);
    CHECK(std::abs(compression_factor(0.04, 0.2) - 0.2969) < 5e-4);
}

TEST_CASE("collision bound and compression stay consistent over the trusted range") {
    for (int i = 0; i <= 100; ++i) {
        const double e = (1.0 / 6.0) * i / 100.0;
        const double pc0 = collision_bound(e);
        CHECK(pc0 >= 0.5);
        CHECK(pc0 <= 1.0);
        const double tau = compression_factor(e, 0.2);
        if (i == 0) {
            CHECK(tau == doctest::Approx(0.6).epsilon(1e-12));
        } else {
            CHECK(tau < 0.6);
        }
    }
}

TEST_CASE("error correction efficiency table") {
    EcModel table;  // default
    CHECK(ec_efficiency(0.0, table) == doctest::Approx(1.0));
    CHECK(ec_efficiency(0.01, table) == doctest::Approx(1.16));
    CHECK(ec_efficiency(0.075, table) == doctest::Approx(0.5 * (1.16 + 1.22)));  // midpoint of anchors
    CHECK(ec_efficiency(0.30, table) == doctest::Approx(1.35));                  // flat beyond the last anchor

    EcModel constant{EcModel::Type::constant, 1.2};
    CHECK(ec_efficiency(0.0, constant) == doctest::Approx(1.0));
    CHECK(ec_efficiency(0.04, constant) == doctest::Approx(1.2));
}

TEST_CASE("window acceptance from the jitter model") {
    CHECK(window_acceptance(60.0, 1e9) == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(std::abs(window_acceptance(60.0, 50.0) - 0.672) < 0.005);
    // window equal to the FWHM
    const double expected = 2.0 * stats::norm_cdf(1.1774) - 1.0;
    CHECK(window_acceptance(80.0, 80.0) == doctest::Approx(expected).epsilon(1e-4));
    CHECK(window_acceptance(80.0, 80.0) == doctest::Approx(0.761).epsilon(2e-3));
}

TEST_CASE("analytic rates at the preset operating points") {
    // zero darks, zero baseline -> zero error
    SystemParams clean = paper_at_loss(20.0);
    clean.dark_rate_hz = 0.0;
    clean.baseline_error = 0.0;
    CHECK(analytic_rates(clean).qber == 0.0);

    // channel to zero -> darks dominate -> e -> 0.5
    SystemParams dead = paper_at_loss(300.0);
    CHECK(analytic_rates(dead).qber == doctest::Approx(0.5).epsilon(1e-4));

    // 105 km at 0.2 dB/km
    AnalyticRates at105 = analytic_rates(paper_at_loss(21.0));
    CHECK(std::abs(at105.sifted_rate - 8.0e4) < 0.2 * 8.0e4);
    CHECK(std::abs(at105.qber - 0.024) < 0.2 * 0.024);
}

TEST_CASE("dark acceptance follows the configured window mode") {
    SystemParams p = *preset_params("paper-10ghz");
    p.channel_loss_db = 40.0;
    AnalyticRates windowed = analytic_rates(p);
    // 50 ps window in a 100 ps period: full-period acceptance doubles darks
    p.dark_window_mode = DarkWindowMode::full_period;
    AnalyticRates full = analytic_rates(p);
    CHECK(full.p_dark == doctest::Approx(2.0 * windowed.p_dark));
    CHECK(full.qber > windowed.qber);
    CHECK(full.p_sig == doctest::Approx(windowed.p_sig));

    // per-detector interpretation doubles the configured rate
    p.dark_window_mode = DarkWindowMode::window;
    p.dark_rate_interpretation = DarkRateInterpretation::per_detector;
    AnalyticRates per_det = analytic_rates(p);
    CHECK(per_det.p_dark == doctest::Approx(2.0 * windowed.p_dark));
}

TEST_CASE("secure rate accounting") {
    EcModel table;
    SecurityReport r = secure_rate(1000.0, 0.0, 0.2, table);
    CHECK(r.secure_rate == doctest::Approx(600.0).epsilon(1e-9));
    CHECK(r.secure_fraction == doctest::Approx(0.6).epsilon(1e-9));

    // clamp when leakage exceeds the compression budget
    r = secure_rate(1000.0, 0.10, 0.2, table);
    CHECK(r.secure_rate == 0.0);

    // 105 km headline number
    AnalyticRates at105 = analytic_rates(paper_at_loss(21.0));
    SecurityReport rep = secure_rate(at105.sifted_rate, at105.qber, 0.2, table);
    CHECK(std::abs(rep.secure_rate - 1.7e4) < 0.5 * 1.7e4);
}

TEST_CASE("secure rate is nonincreasing in the error rate") {
    EcModel table;
    double prev = 1e12;
    for (int i = 0; i <= 60; ++i) {
        const double e = 0.08 * i / 60.0;
        const double rate = secure_rate(1e6, e, 0.2, table).secure_rate;
        CHECK(rate <= prev + 1e-6);
        prev = rate;
    }
}

TEST_CASE("individual-attack error threshold") {
    EcModel table;
    const auto start = std::chrono::steady_clock::now();
    const double e_star = error_threshold_individual(0.2, table);
    const auto elapsed = std::chrono::steady_clock::now() - start;
    CHECK(std::chrono::duration_cast<std::chrono::milliseconds>(elapsed).count() < 100);
    CHECK(std::abs(e_star - 0.041) < 0.003);

    // the bisection found the first sign change: margin positive just below
    const double margin_below = compression_factor(e_star - 1e-4, 0.2) -
                                ec_efficiency(e_star - 1e-4, table) * binary_entropy(e_star - 1e-4);
    const double margin_above = compression_factor(e_star + 1e-4, 0.2) -
                                ec_efficiency(e_star + 1e-4, table) * binary_entropy(e_star + 1e-4);
    CHECK(margin_below > 0.0);
    CHECK(margin_above < 0.0);

    CHECK_THROWS_AS(error_threshold_individual(0.5, table), SecurityError);

    double prev = 1.0;
    for (double mu = 0.05; mu <= 0.451; mu += 0.05) {
        const double t = error_threshold_individual(mu, table);
        CHECK(t < prev);
        prev = t;
    }
}

TEST_CASE("bb84 tagging bound") {
    SystemParams p = paper_at_loss(10.0);

    // all clicks potentially tagged -> zero
    Bb84Rates tagged = bb84_rates(p, Bb84SourceSpec::single_photon(1.0, 1.0));
    CHECK(tagged.delta == doctest::Approx(1.0));
    CHECK(tagged.secure_rate == 0.0);

    // ideal limit: g2 = 0, no darks, no baseline, lossless channel
    SystemParams ideal = paper_at_loss(0.0);
    ideal.dark_rate_hz = 0.0;
    ideal.baseline_error = 0.0;
    Bb84Rates best = bb84_rates(ideal, Bb84SourceSpec::single_photon(0.0, 1.0));
    const double acceptance = 0.64;  // preset override
    CHECK(best.secure_rate ==
          doctest::Approx(0.5 * ideal.clock_rate_hz * ideal.detector_qe * acceptance).epsilon(1e-9));
}

TEST_CASE("bb84 family ordering is pointwise monotone in g2") {
    SystemParams p = *preset_params("paper-10ghz");
    const std::vector<double> grid = make_loss_grid(0.0, 50.0, 2.5);
    const double g2s[] = {0.0, 1e-6, 1e-5, 1e-2};
    std::vector<RateCurve> curves;
    for (double g2 : g2s) {
        curves.push_back(sweep_rates(p, grid, Bb84SourceSpec::single_photon(g2, 1.0)));
    }
    for (size_t i = 0; i + 1 < curves.size(); ++i) {
        for (size_t k = 0; k < grid.size(); ++k) {
            CHECK(curves[i].points[k].secure_rate >= curves[i + 1].points[k].secure_rate - 1e-12);
        }
    }
}

TEST_CASE("sweep composes the analytic chain and reports the cutoff") {
    SystemParams p = *preset_params("paper-10ghz");

    RateCurve single = sweep_rates(p, {21.0});
    AnalyticRates direct = analytic_rates(paper_at_loss(21.0));
    SecurityReport rep = secure_rate(direct.sifted_rate, direct.qber, p.mu, p.ec_model);
    CHECK(single.points.size() == 1);
    CHECK(single.points[0].sifted_rate == doctest::Approx(direct.sifted_rate));
    CHECK(single.points[0].secure_rate == doctest::Approx(rep.secure_rate));
    CHECK(!single.cutoff_db);

    RateCurve curve = sweep_rates(p, make_loss_grid(0.0, 50.0, 0.1));
    REQUIRE(curve.cutoff_db.has_value());
    CHECK(std::abs(*curve.cutoff_db - 42.1) < 2.0);
    double prev = 1e18;
    for (const auto& pt : curve.points) {
        CHECK(pt.secure_rate <= prev + 1e-9);
        prev = pt.secure_rate;
    }

    // grid workers never change the outcome
    RateCurve parallel = sweep_rates(p, make_loss_grid(0.0, 50.0, 0.1), std::nullopt, 4);
    REQUIRE(parallel.points.size() == curve.points.size());
    for (size_t i = 0; i < curve.points.size(); ++i) {
        CHECK(parallel.points[i].secure_rate == curve.points[i].secure_rate);
    }
}
