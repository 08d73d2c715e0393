#include <doctest.h>

#include <sys/socket.h>

#include <cmath>
#include <thread>

#include "dpsqkd/rng.hpp"
#include "dpsqkd/security.hpp"
#include "dpsqkd/session.hpp"
#include "dpsqkd/sift.hpp"

using namespace dpsqkd;

namespace {

DetectionRecord make_record(uint64_t slot, Detector det, Cause cause = Cause::signal) {
    DetectionRecord r;
    r.true_slot = slot;
    r.assigned_slot = slot;
    r.offset_fs = 0;
    r.detector = det;
    r.cause = cause;
    return r;
}

SystemParams paper_at_loss(double loss_db) {
    SystemParams p = *preset_params("paper-10ghz");
    p.channel_loss_db = loss_db;
    return p;
}

ClassicalMessage random_message(uint64_t seed, uint64_t index) {
    const rng::Block b = rng::philox(seed, 17, index);
    switch (b.v[0] % 6) {
        case 0: {
            msg::Hello h;
            h.session_id = b.lo64();
            h.clock_rate_hz = b.v[1];
            h.slot_count = b.v[2];
            return h;
        }
        case 1: {
            msg::Disclose d;
            uint64_t slot = 0;
            for (uint32_t i = 0; i < b.v[1] % 50; ++i) {
                slot += 1 + rng::philox(seed, 18, index * 64 + i).v[0] % 1000;
                d.slot_indices.push_back(slot);
            }
            return d;
        }
        case 2: {
            msg::SampleRequest s;
            uint32_t pos = 0;
            for (uint32_t i = 0; i < b.v[1] % 50; ++i) {
                pos += 1 + rng::philox(seed, 19, index * 64 + i).v[0] % 100;
                s.key_positions.push_back(pos);
            }
            return s;
        }
        case 3: {
            msg::SampleBits s;
            s.bit_count = b.v[1] % 200;
            s.packed.assign((s.bit_count + 7) / 8, 0);
            for (size_t i = 0; i < s.packed.size(); ++i) {
                s.packed[i] = uint8_t(rng::philox(seed, 20, index * 64 + i).v[0]);
            }
            if (s.bit_count % 8) s.packed.back() &= uint8_t((1u << (s.bit_count % 8)) - 1);
            return s;
        }
        case 4:
            return msg::QberReport{b.v[1], b.v[1] + b.v[2] % 1000};
        default:
            return msg::Done{};
    }
}

}  // namespace

TEST_CASE("bob extraction maps detectors to bits and discloses only slots") {
    auto [empty_key, empty_disc] = bob_extract({});
    CHECK(empty_key.entries.empty());
    CHECK(empty_disc.slot_indices.empty());

    auto [key, disc] = bob_extract({make_record(5, Detector::d0), make_record(9, Detector::d1)});
    REQUIRE(key.entries.size() == 2);
    CHECK(key.entries[0] == SiftedEntry{5, 0});
    CHECK(key.entries[1] == SiftedEntry{9, 1});
    CHECK(disc.slot_indices == std::vector<uint64_t>{5, 9});

    CHECK_THROWS_AS(bob_extract({make_record(5, Detector::d0), make_record(5, Detector::d1)}), SiftError);
}

TEST_CASE("disclosure bytes are independent of detector labels") {
    std::vector<DetectionRecord> recs;
    std::vector<DetectionRecord> swapped;
    for (uint64_t i = 1; i <= 64; ++i) {
        const Detector det = (i % 3 == 0) ? Detector::d1 : Detector::d0;
        const Detector other = det == Detector::d0 ? Detector::d1 : Detector::d0;
        recs.push_back(make_record(3 * i, det));
        swapped.push_back(make_record(3 * i, other));
    }
    auto bytes_a = encode_message(bob_extract(recs).second);
    auto bytes_b = encode_message(bob_extract(swapped).second);
    CHECK(bytes_a == bytes_b);
}

TEST_CASE("alice reconstructs bits from her modulation record") {
    PhaseSequence phases(2);
    phases.set_pi(0, false);
    phases.set_pi(1, false);
    msg::Disclose disc;
    disc.slot_indices = {1};
    SiftedKey key = alice_sift(phases, disc);
    REQUIRE(key.entries.size() == 1);
    CHECK(key.entries[0] == SiftedEntry{1, 0});

    phases.set_pi(1, true);
    key = alice_sift(phases, disc);
    CHECK(key.entries[0] == SiftedEntry{1, 1});

    CHECK(alice_sift(phases, msg::Disclose{}).entries.empty());

    msg::Disclose bad;
    bad.slot_indices = {2};
    CHECK_THROWS_AS(alice_sift(phases, bad), SiftError);
    bad.slot_indices = {0};
    CHECK_THROWS_AS(alice_sift(phases, bad), SiftError);
}

TEST_CASE("qber measurement is exact") {
    SiftedKey a;
    SiftedKey b;
    for (uint64_t i = 1; i <= 100; ++i) {
        a.entries.push_back({i, uint8_t(i % 2)});
        b.entries.push_back({i, uint8_t(i % 2)});
    }
    CHECK(measure_qber(a, b) == std::pair<uint32_t, uint32_t>{0, 100});

    SiftedKey flipped = b;
    for (auto& e : flipped.entries) e.bit ^= 1;
    CHECK(measure_qber(a, flipped) == std::pair<uint32_t, uint32_t>{100, 100});

    SiftedKey other = b;
    other.entries[7].slot = 9999;
    CHECK_THROWS_AS(measure_qber(a, other), SiftError);
    other = b;
    other.entries.pop_back();
    CHECK_THROWS_AS(measure_qber(a, other), SiftError);
}

TEST_CASE("disclose frame layout is pinned byte for byte") {
    msg::Disclose d;
    d.slot_indices = {5, 9};
    const std::vector<uint8_t> expected = {
        0x02,                    // type
        0x14, 0x00, 0x00, 0x00,  // payload length 20
        0x02, 0x00, 0x00, 0x00,  // count 2
        0x05, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00,
        0x09, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00,
    };
    CHECK(encode_message(d) == expected);
}

TEST_CASE("codec roundtrip over randomized messages") {
    for (uint64_t i = 0; i < 2000; ++i) {
        ClassicalMessage m = random_message(0x5eed, i);
        std::vector<uint8_t> bytes = encode_message(m);
        CHECK(decode_message(bytes) == m);
    }
}

TEST_CASE("codec rejects malformed frames") {
    msg::Disclose d;
    d.slot_indices = {5, 9, 12};
    std::vector<uint8_t> bytes = encode_message(d);

    std::vector<uint8_t> cut(bytes.begin(), bytes.end() - 3);
    try {
        decode_message(cut);
        FAIL("expected CodecError");
    } catch (const CodecError& e) {
        CHECK(e.code() == CodecError::Code::TruncatedFrame);
    }

    std::vector<uint8_t> unknown = bytes;
    unknown[0] = 0x7f;
    try {
        decode_message(unknown);
        FAIL("expected CodecError");
    } catch (const CodecError& e) {
        CHECK(e.code() == CodecError::Code::UnknownType);
    }

    msg::Disclose bad;
    bad.slot_indices = {9, 5};
    CHECK_THROWS_AS(encode_message(bad), CodecError);

    // same payload, reordered on the wire
    std::vector<uint8_t> tampered = bytes;
    std::swap_ranges(tampered.begin() + 9, tampered.begin() + 17, tampered.begin() + 17);
    try {
        decode_message(tampered);
        FAIL("expected CodecError");
    } catch (const CodecError& e) {
        CHECK(e.code() == CodecError::Code::NonMonotonicSlots);
    }
}

TEST_CASE("loopback session is deterministic and self-consistent") {
    SystemParams p = paper_at_loss(5.0);
    const uint64_t slots = 200000;
    const uint64_t seed = 424242;

    auto run_once = [&](SessionMode mode) {
        auto [alice_end, bob_end] = make_loopback_pair();
        SessionResult alice_result;
        std::thread alice_thread(
            [&] { alice_result = run_session(*alice_end, Role::alice, p, slots, seed, mode); });
        SessionResult bob_result = run_session(*bob_end, Role::bob, p, slots, seed, mode);
        alice_thread.join();
        return std::pair{std::move(alice_result), std::move(bob_result)};
    };

    auto [alice1, bob1] = run_once(SessionMode::full());
    auto [alice2, bob2] = run_once(SessionMode::full());

    CHECK(alice1.log == alice2.log);
    CHECK(bob1.log == bob2.log);
    auto [errs, cmp] = measure_qber(alice1.key, bob1.key);
    CHECK(cmp == uint32_t(bob1.key.entries.size()));
    CHECK(errs == bob1.errors);
    CHECK(bob1.compared == cmp);

    // QBER close to the analytic model
    AnalyticRates model = analytic_rates(p);
    const double sigma = std::sqrt(model.qber * (1 - model.qber) / double(bob1.compared));
    CHECK(std::abs(bob1.qber_estimate - model.qber) < 3.0 * sigma + 1e-3);
}

TEST_CASE("noiseless sessions give identical keys at both ends") {
    SystemParams p = paper_at_loss(10.0);
    p.dark_rate_hz = 0.0;
    p.baseline_error = 0.0;
    p.jitter_fwhm_ps = 0.5;
    p.window_acceptance_override.reset();

    for (uint64_t seed = 1; seed <= 20; ++seed) {
        auto [alice_end, bob_end] = make_loopback_pair();
        SessionResult alice_result;
        std::thread alice_thread([&] {
            alice_result = run_session(*alice_end, Role::alice, p, 100000, seed, SessionMode::full());
        });
        SessionResult bob_result = run_session(*bob_end, Role::bob, p, 100000, seed, SessionMode::full());
        alice_thread.join();
        CHECK(alice_result.key == bob_result.key);
        CHECK(bob_result.errors == 0);
    }
}

TEST_CASE("sampled mode removes the disclosed sample from both keys") {
    SystemParams p = paper_at_loss(0.0);
    const uint64_t slots = 1000000;
    auto [alice_end, bob_end] = make_loopback_pair();
    SessionResult alice_result;
    std::thread alice_thread([&] {
        alice_result = run_session(*alice_end, Role::alice, p, slots, 7, SessionMode::sample(200));
    });
    SessionResult bob_result = run_session(*bob_end, Role::bob, p, slots, 7, SessionMode::sample(200));
    alice_thread.join();

    CHECK(bob_result.compared == 200);
    CHECK(alice_result.key.entries.size() == bob_result.key.entries.size());
    // remaining keys cover identical slot sets
    auto [errs, compared] = measure_qber(alice_result.key, bob_result.key);
    CHECK(compared == uint32_t(alice_result.key.entries.size()));
    (void)errs;
}

TEST_CASE("sampled estimates agree with full comparison on average") {
    SystemParams p;
    p.clock_rate_hz = 1e10;
    p.mu = -std::log(0.98);  // ~2% clicks
    p.channel_loss_db = 0.0;
    p.interferometer_loss_db = 0.0;
    p.detector_qe = 1.0;
    p.dark_rate_hz = 0.0;
    p.jitter_fwhm_ps = 10.0;
    p.window_width_ps = 100.0;
    p.baseline_error = 0.05;
    const uint64_t slots = 100000;

    double sampled_sum = 0.0;
    double full_sum = 0.0;
    uint64_t sampled_bits = 0;
    const int runs = 20;
    for (int i = 0; i < runs; ++i) {
        for (bool sampled : {false, true}) {
            auto [alice_end, bob_end] = make_loopback_pair();
            SessionMode mode = sampled ? SessionMode::sample(500) : SessionMode::full();
            SessionResult alice_result;
            std::thread alice_thread(
                [&] { alice_result = run_session(*alice_end, Role::alice, p, slots, 1000 + uint64_t(i), mode); });
            SessionResult bob_result = run_session(*bob_end, Role::bob, p, slots, 1000 + uint64_t(i), mode);
            alice_thread.join();
            if (sampled) {
                sampled_sum += bob_result.qber_estimate;
                sampled_bits += bob_result.compared;
            } else {
                full_sum += bob_result.qber_estimate;
            }
        }
    }
    const double sampled_mean = sampled_sum / runs;
    const double full_mean = full_sum / runs;
    const double sigma = std::sqrt(full_mean * (1 - full_mean) / double(sampled_bits));
    CHECK(std::abs(sampled_mean - full_mean) < 3.0 * sigma);
}

TEST_CASE("protocol order is enforced") {
    SystemParams p = paper_at_loss(10.0);
    auto [alice_end, bob_end] = make_loopback_pair();

    std::exception_ptr alice_error;
    std::thread alice_thread([&] {
        try {
            run_session(*alice_end, Role::alice, p, 1000, 5, SessionMode::full());
        } catch (...) {
            alice_error = std::current_exception();
        }
    });

    // SampleBits cannot precede Hello/Disclose
    msg::SampleBits bits;
    bits.bit_count = 0;
    auto frame = encode_message(bits);
    bob_end->write_all(frame.data(), frame.size());
    alice_thread.join();
    REQUIRE(alice_error);
    try {
        std::rethrow_exception(alice_error);
    } catch (const ProtocolError& e) {
        CHECK(e.code() == ProtocolError::Code::ProtocolOrderViolation);
    }
}

TEST_CASE("version and parameter mismatches are rejected") {
    SystemParams p = paper_at_loss(10.0);

    {
        auto [alice_end, bob_end] = make_loopback_pair();
        std::exception_ptr alice_error;
        std::thread alice_thread([&] {
            try {
                run_session(*alice_end, Role::alice, p, 1000, 5, SessionMode::full());
            } catch (...) {
                alice_error = std::current_exception();
            }
        });
        msg::Hello hello;
        hello.session_id = 1;
        hello.clock_rate_hz = 10000000000ull;
        hello.slot_count = 1000;
        hello.version = 0x0002;
        auto frame = encode_message(hello);
        bob_end->write_all(frame.data(), frame.size());
        alice_thread.join();
        REQUIRE(alice_error);
        try {
            std::rethrow_exception(alice_error);
        } catch (const ProtocolError& e) {
            CHECK(e.code() == ProtocolError::Code::VersionMismatch);
        }
    }

    {
        // transport closed before any frame
        auto [alice_end, bob_end] = make_loopback_pair();
        std::exception_ptr alice_error;
        std::thread alice_thread([&] {
            try {
                run_session(*alice_end, Role::alice, p, 1000, 5, SessionMode::full());
            } catch (...) {
                alice_error = std::current_exception();
            }
        });
        bob_end.reset();
        alice_thread.join();
        REQUIRE(alice_error);
        try {
            std::rethrow_exception(alice_error);
        } catch (const ProtocolError& e) {
            CHECK(e.code() == ProtocolError::Code::TransportClosed);
        }
    }
}

TEST_CASE("socket-pair sessions and in-process runs see the same error rate") {
    SystemParams p = paper_at_loss(3.0);
    const uint64_t slots = 300000;

    uint64_t session_errors = 0, session_bits = 0;
    for (uint64_t seed = 500; seed < 510; ++seed) {
        int fds[2];
        REQUIRE(::socketpair(AF_UNIX, SOCK_STREAM, 0, fds) == 0);
        auto alice_stream = make_fd_stream(fds[0]);
        auto bob_stream = make_fd_stream(fds[1]);
        SessionResult alice_result;
        std::thread alice_thread(
            [&] { alice_result = run_session(*alice_stream, Role::alice, p, slots, seed, SessionMode::full()); });
        SessionResult bob_result = run_session(*bob_stream, Role::bob, p, slots, seed, SessionMode::full());
        alice_thread.join();
        session_errors += bob_result.errors;
        session_bits += bob_result.compared;
    }

    uint64_t direct_errors = 0, direct_bits = 0;
    for (uint64_t seed = 900; seed < 910; ++seed) {
        PhaseSequence phases = generate_phases(slots, seed);
        auto windowed = apply_window(simulate_detection(p, phases, seed), p.window_width_ps);
        auto [bob_key, disclose] = bob_extract(windowed);
        auto [errs, compared] = measure_qber(alice_sift(phases, disclose), bob_key);
        direct_errors += errs;
        direct_bits += compared;
    }

    const double session_qber = double(session_errors) / double(session_bits);
    const double direct_qber = double(direct_errors) / double(direct_bits);
    const double pooled = (double(session_errors) + double(direct_errors)) / (double(session_bits) + double(direct_bits));
    const double sigma = std::sqrt(pooled * (1.0 - pooled) * (1.0 / double(session_bits) + 1.0 / double(direct_bits)));
    CHECK(std::abs(session_qber - direct_qber) < 3.0 * sigma);
}

TEST_CASE("sessions run over a real socket pair") {
    SystemParams p = paper_at_loss(5.0);
    int fds[2];
    REQUIRE(::socketpair(AF_UNIX, SOCK_STREAM, 0, fds) == 0);
    auto alice_stream = make_fd_stream(fds[0]);
    auto bob_stream = make_fd_stream(fds[1]);

    SessionResult alice_result;
    std::thread alice_thread(
        [&] { alice_result = run_session(*alice_stream, Role::alice, p, 100000, 77, SessionMode::full()); });
    SessionResult bob_result = run_session(*bob_stream, Role::bob, p, 100000, 77, SessionMode::full());
    alice_thread.join();

    CHECK(alice_result.compared == bob_result.compared);
    CHECK(alice_result.errors == bob_result.errors);
    CHECK(measure_qber(alice_result.key, bob_result.key).second == bob_result.compared);
}
