#include "dpsqkd/session.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_set>

#include "dpsqkd/rng.hpp"

namespace dpsqkd {

namespace {

class FrameIo {
  public:
    FrameIo(ByteStream& stream, std::vector<LoggedFrame>& log) : stream_(stream), log_(log) {}

    void send(const ClassicalMessage& m) {
        std::vector<uint8_t> frame = encode_message(m);
        stream_.write_all(frame.data(), frame.size());
        log_.push_back({true, std::move(frame)});
    }

    ClassicalMessage receive() {
        while (buf_.size() < 5 || buf_.size() < 5 + frame_len()) {
            uint8_t chunk[4096];
            size_t n = stream_.read_some(chunk, sizeof(chunk));
            if (n == 0) {
                throw ProtocolError(ProtocolError::Code::TransportClosed, "peer closed mid-protocol");
            }
            buf_.insert(buf_.end(), chunk, chunk + n);
        }
        size_t consumed = 0;
        ClassicalMessage m = decode_message(buf_, consumed);
        log_.push_back({false, std::vector<uint8_t>(buf_.begin(), buf_.begin() + consumed)});
        buf_.erase(buf_.begin(), buf_.begin() + consumed);
        return m;
    }

  private:
    size_t frame_len() const {
        uint32_t len = 0;
        for (int i = 0; i < 4; ++i) len |= uint32_t(buf_[1 + i]) << (8 * i);
        return len;
    }

    ByteStream& stream_;
    std::vector<LoggedFrame>& log_;
    std::vector<uint8_t> buf_;
};

std::vector<uint32_t> draw_sample_positions(uint64_t seed, uint32_t key_len, uint32_t k) {
    k = std::min(k, key_len);
    // Floyd's sampling: k distinct positions, deterministic in seed.
    std::unordered_set<uint32_t> chosen;
    uint64_t draw_index = 0;
    for (uint32_t i = key_len - k; i < key_len; ++i) {
        uint32_t j = uint32_t(rng::philox(seed, rng::Stream::sample_positions, draw_index++).lo64() % (i + 1));
        if (!chosen.insert(j).second) chosen.insert(i);
    }
    std::vector<uint32_t> positions(chosen.begin(), chosen.end());
    std::sort(positions.begin(), positions.end());
    return positions;
}

msg::SampleBits pack_bits(const SiftedKey& key, const std::vector<uint32_t>& positions) {
    msg::SampleBits out;
    out.bit_count = uint32_t(positions.size());
    out.packed.assign((positions.size() + 7) / 8, 0);
    for (size_t i = 0; i < positions.size(); ++i) {
        if (positions[i] >= key.entries.size()) {
            throw CodecError(CodecError::Code::Malformed, "sample position beyond key length");
        }
        if (key.entries[positions[i]].bit) out.packed[i / 8] |= uint8_t(1) << (i % 8);
    }
    return out;
}

void erase_positions(SiftedKey& key, const std::vector<uint32_t>& sorted_positions) {
    if (sorted_positions.empty()) return;
    std::vector<SiftedEntry> kept;
    kept.reserve(key.entries.size() - sorted_positions.size());
    size_t p = 0;
    for (size_t i = 0; i < key.entries.size(); ++i) {
        if (p < sorted_positions.size() && sorted_positions[p] == i) {
            ++p;
            continue;
        }
        kept.push_back(key.entries[i]);
    }
    key.entries = std::move(kept);
}

SessionResult run_bob(FrameIo& io, const SystemParams& params, uint64_t slot_count, uint64_t seed, SessionMode mode,
                      int workers) {
    PhaseSequence phases = generate_phases(slot_count, seed);
    auto records = apply_window(simulate_detection(params, phases, seed, workers), params.window_width_ps);
    auto [key, disclose] = bob_extract(records);

    msg::Hello hello;
    hello.session_id = rng::philox(seed, rng::Stream::session_id, 0).lo64();
    hello.clock_rate_hz = uint64_t(std::llround(params.clock_rate_hz));
    hello.slot_count = slot_count;
    io.send(hello);
    io.send(disclose);

    const uint32_t key_len = uint32_t(key.entries.size());
    std::vector<uint32_t> positions;
    if (mode.sampled) {
        positions = draw_sample_positions(seed, key_len, mode.sample_size);
    } else {
        positions.resize(key_len);
        for (uint32_t i = 0; i < key_len; ++i) positions[i] = i;
    }

    msg::SampleRequest request;
    request.key_positions = positions;
    io.send(request);

    ClassicalMessage reply = io.receive();
    auto* bits = std::get_if<msg::SampleBits>(&reply);
    if (!bits) {
        throw ProtocolError(ProtocolError::Code::ProtocolOrderViolation, "expected SampleBits after SampleRequest");
    }
    if (bits->bit_count != positions.size()) {
        throw ProtocolError(ProtocolError::Code::ProtocolOrderViolation, "SampleBits count mismatch");
    }

    uint32_t errors = 0;
    for (size_t i = 0; i < positions.size(); ++i) {
        const int alice_bit = (bits->packed[i / 8] >> (i % 8)) & 1;
        if (alice_bit != key.entries[positions[i]].bit) ++errors;
    }
    const uint32_t compared = uint32_t(positions.size());

    io.send(msg::QberReport{errors, compared});
    io.send(msg::Done{});

    if (mode.sampled) erase_positions(key, positions);

    SessionResult result;
    result.key = std::move(key);
    result.errors = errors;
    result.compared = compared;
    result.qber_estimate = compared ? double(errors) / double(compared) : 0.0;
    return result;
}

SessionResult run_alice(FrameIo& io, const SystemParams& params, uint64_t slot_count, uint64_t seed,
                        SessionMode mode) {
    PhaseSequence phases = generate_phases(slot_count, seed);

    ClassicalMessage m = io.receive();
    auto* hello = std::get_if<msg::Hello>(&m);
    if (!hello) {
        throw ProtocolError(ProtocolError::Code::ProtocolOrderViolation, "expected Hello first");
    }
    if (hello->version != msg::kProtocolVersion) {
        throw ProtocolError(ProtocolError::Code::VersionMismatch,
                            "peer protocol version " + std::to_string(hello->version));
    }
    if (hello->slot_count != slot_count ||
        hello->clock_rate_hz != uint64_t(std::llround(params.clock_rate_hz))) {
        throw ProtocolError(ProtocolError::Code::VersionMismatch, "session parameters disagree with peer");
    }

    m = io.receive();
    auto* disclose = std::get_if<msg::Disclose>(&m);
    if (!disclose) {
        throw ProtocolError(ProtocolError::Code::ProtocolOrderViolation, "expected Disclose after Hello");
    }
    SiftedKey key = alice_sift(phases, *disclose);

    std::vector<uint32_t> sampled_union;
    std::optional<msg::QberReport> report;
    for (;;) {
        m = io.receive();
        if (auto* request = std::get_if<msg::SampleRequest>(&m)) {
            if (report) {
                throw ProtocolError(ProtocolError::Code::ProtocolOrderViolation,
                                    "SampleRequest after QberReport");
            }
            io.send(pack_bits(key, request->key_positions));
            sampled_union.insert(sampled_union.end(), request->key_positions.begin(),
                                 request->key_positions.end());
            continue;
        }
        if (auto* r = std::get_if<msg::QberReport>(&m)) {
            if (report) {
                throw ProtocolError(ProtocolError::Code::ProtocolOrderViolation, "duplicate QberReport");
            }
            report = *r;
            continue;
        }
        if (std::get_if<msg::Done>(&m)) {
            if (!report) {
                throw ProtocolError(ProtocolError::Code::ProtocolOrderViolation, "Done before QberReport");
            }
            break;
        }
        throw ProtocolError(ProtocolError::Code::ProtocolOrderViolation, "unexpected message for this state");
    }

    if (mode.sampled) {
        std::sort(sampled_union.begin(), sampled_union.end());
        sampled_union.erase(std::unique(sampled_union.begin(), sampled_union.end()), sampled_union.end());
        erase_positions(key, sampled_union);
    }

    SessionResult result;
    result.key = std::move(key);
    result.errors = report->errors;
    result.compared = report->compared;
    result.qber_estimate = report->compared ? double(report->errors) / double(report->compared) : 0.0;
    return result;
}

}  // namespace

SessionResult run_session(ByteStream& transport, Role role, const SystemParams& params, uint64_t slot_count,
                          uint64_t seed, SessionMode mode, int workers) {
    const SystemParams p = validate_params(params);
    std::vector<LoggedFrame> log;
    FrameIo io(transport, log);
    SessionResult result =
        role == Role::bob ? run_bob(io, p, slot_count, seed, mode, workers) : run_alice(io, p, slot_count, seed, mode);
    result.log = std::move(log);
    return result;
}

}  // namespace dpsqkd
