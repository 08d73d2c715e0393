#include "dpsqkd/sift.hpp"

#include <algorithm>

namespace dpsqkd {

namespace {

void put_u16(std::vector<uint8_t>& out, uint16_t v) {
    out.push_back(uint8_t(v));
    out.push_back(uint8_t(v >> 8));
}

void put_u32(std::vector<uint8_t>& out, uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(uint8_t(v >> (8 * i)));
}

void put_u64(std::vector<uint8_t>& out, uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(uint8_t(v >> (8 * i)));
}

class Reader {
  public:
    Reader(const uint8_t* data, size_t size) : data_(data), size_(size) {}

    uint16_t u16() { return uint16_t(u8()) | uint16_t(u8()) << 8; }
    uint32_t u32() {
        uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= uint32_t(u8()) << (8 * i);
        return v;
    }
    uint64_t u64() {
        uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= uint64_t(u8()) << (8 * i);
        return v;
    }
    uint8_t u8() {
        if (pos_ >= size_) throw CodecError(CodecError::Code::TruncatedFrame, "frame payload cut short");
        return data_[pos_++];
    }
    bool done() const { return pos_ == size_; }

  private:
    const uint8_t* data_;
    size_t size_;
    size_t pos_ = 0;
};

constexpr uint8_t kTypeHello = 0x01;
constexpr uint8_t kTypeDisclose = 0x02;
constexpr uint8_t kTypeSampleRequest = 0x03;
constexpr uint8_t kTypeSampleBits = 0x04;
constexpr uint8_t kTypeQberReport = 0x05;
constexpr uint8_t kTypeDone = 0x06;

template <typename T>
void check_strictly_increasing(const std::vector<T>& v, const char* what) {
    for (size_t i = 1; i < v.size(); ++i) {
        if (v[i] <= v[i - 1]) {
            throw CodecError(CodecError::Code::NonMonotonicSlots, std::string(what) + " not strictly increasing");
        }
    }
}

}  // namespace

std::vector<uint8_t> encode_message(const ClassicalMessage& m) {
    std::vector<uint8_t> payload;
    uint8_t type = 0;

    std::visit(
        [&](const auto& v) {
            using T = std::decay_t<decltype(v)>;
            if constexpr (std::is_same_v<T, msg::Hello>) {
                type = kTypeHello;
                put_u64(payload, v.session_id);
                put_u64(payload, v.clock_rate_hz);
                put_u64(payload, v.slot_count);
                put_u16(payload, v.version);
            } else if constexpr (std::is_same_v<T, msg::Disclose>) {
                type = kTypeDisclose;
                check_strictly_increasing(v.slot_indices, "slot_indices");
                put_u32(payload, uint32_t(v.slot_indices.size()));
                for (uint64_t s : v.slot_indices) put_u64(payload, s);
            } else if constexpr (std::is_same_v<T, msg::SampleRequest>) {
                type = kTypeSampleRequest;
                check_strictly_increasing(v.key_positions, "key_positions");
                put_u32(payload, uint32_t(v.key_positions.size()));
                for (uint32_t p : v.key_positions) put_u32(payload, p);
            } else if constexpr (std::is_same_v<T, msg::SampleBits>) {
                type = kTypeSampleBits;
                if (v.packed.size() != (size_t(v.bit_count) + 7) / 8) {
                    throw CodecError(CodecError::Code::Malformed, "SampleBits size mismatch");
                }
                put_u32(payload, v.bit_count);
                payload.insert(payload.end(), v.packed.begin(), v.packed.end());
            } else if constexpr (std::is_same_v<T, msg::QberReport>) {
                type = kTypeQberReport;
                put_u32(payload, v.errors);
                put_u32(payload, v.compared);
            } else {
                type = kTypeDone;
            }
        },
        m);

    std::vector<uint8_t> frame;
    frame.reserve(5 + payload.size());
    frame.push_back(type);
    put_u32(frame, uint32_t(payload.size()));
    frame.insert(frame.end(), payload.begin(), payload.end());
    return frame;
}

ClassicalMessage decode_message(const std::vector<uint8_t>& bytes, size_t& consumed) {
    if (bytes.size() < 5) throw CodecError(CodecError::Code::TruncatedFrame, "frame header cut short");
    const uint8_t type = bytes[0];
    uint32_t len = 0;
    for (int i = 0; i < 4; ++i) len |= uint32_t(bytes[1 + i]) << (8 * i);
    if (bytes.size() < size_t(5) + len) throw CodecError(CodecError::Code::TruncatedFrame, "frame payload cut short");
    consumed = size_t(5) + len;

    Reader r(bytes.data() + 5, len);
    switch (type) {
        case kTypeHello: {
            msg::Hello h;
            h.session_id = r.u64();
            h.clock_rate_hz = r.u64();
            h.slot_count = r.u64();
            h.version = r.u16();
            if (!r.done()) throw CodecError(CodecError::Code::Malformed, "Hello payload too long");
            return h;
        }
        case kTypeDisclose: {
            msg::Disclose d;
            const uint32_t count = r.u32();
            d.slot_indices.reserve(count);
            for (uint32_t i = 0; i < count; ++i) d.slot_indices.push_back(r.u64());
            if (!r.done()) throw CodecError(CodecError::Code::Malformed, "Disclose payload too long");
            check_strictly_increasing(d.slot_indices, "slot_indices");
            return d;
        }
        case kTypeSampleRequest: {
            msg::SampleRequest s;
            const uint32_t count = r.u32();
            s.key_positions.reserve(count);
            for (uint32_t i = 0; i < count; ++i) s.key_positions.push_back(r.u32());
            if (!r.done()) throw CodecError(CodecError::Code::Malformed, "SampleRequest payload too long");
            check_strictly_increasing(s.key_positions, "key_positions");
            return s;
        }
        case kTypeSampleBits: {
            msg::SampleBits s;
            s.bit_count = r.u32();
            const size_t nbytes = (size_t(s.bit_count) + 7) / 8;
            s.packed.reserve(nbytes);
            for (size_t i = 0; i < nbytes; ++i) s.packed.push_back(r.u8());
            if (!r.done()) throw CodecError(CodecError::Code::Malformed, "SampleBits payload too long");
            return s;
        }
        case kTypeQberReport: {
            msg::QberReport q;
            q.errors = r.u32();
            q.compared = r.u32();
            if (!r.done()) throw CodecError(CodecError::Code::Malformed, "QberReport payload too long");
            return q;
        }
        case kTypeDone: {
            if (len != 0) throw CodecError(CodecError::Code::Malformed, "Done payload must be empty");
            return msg::Done{};
        }
        default:
            throw CodecError(CodecError::Code::UnknownType, "unknown frame type " + std::to_string(type));
    }
}

ClassicalMessage decode_message(const std::vector<uint8_t>& bytes) {
    size_t consumed = 0;
    ClassicalMessage m = decode_message(bytes, consumed);
    if (consumed != bytes.size()) throw CodecError(CodecError::Code::Malformed, "trailing bytes after frame");
    return m;
}

std::pair<SiftedKey, msg::Disclose> bob_extract(const std::vector<DetectionRecord>& records) {
    SiftedKey key;
    msg::Disclose disclose;
    key.entries.reserve(records.size());
    disclose.slot_indices.reserve(records.size());
    for (const auto& r : records) {
        if (!key.entries.empty() && r.assigned_slot <= key.entries.back().slot) {
            throw SiftError(SiftError::Code::DuplicateSlot,
                            "records not deduplicated/ordered at slot " + std::to_string(r.assigned_slot));
        }
        key.entries.push_back({r.assigned_slot, uint8_t(r.detector == Detector::d1 ? 1 : 0)});
        disclose.slot_indices.push_back(r.assigned_slot);
    }
    return {std::move(key), std::move(disclose)};
}

SiftedKey alice_sift(const PhaseSequence& phases, const msg::Disclose& disclose) {
    SiftedKey key;
    key.entries.reserve(disclose.slot_indices.size());
    for (uint64_t slot : disclose.slot_indices) {
        if (slot < 1 || slot >= phases.size()) {
            throw SiftError(SiftError::Code::SlotOutOfRange, "disclosed slot " + std::to_string(slot) +
                                                                 " outside [1, " + std::to_string(phases.size()) +
                                                                 ")");
        }
        key.entries.push_back({slot, uint8_t(phases.diff_bit(slot))});
    }
    return key;
}

std::pair<uint32_t, uint32_t> measure_qber(const SiftedKey& a, const SiftedKey& b) {
    if (a.entries.size() != b.entries.size()) {
        throw SiftError(SiftError::Code::SlotSetMismatch, "keys cover different slot sets");
    }
    uint32_t errors = 0;
    for (size_t i = 0; i < a.entries.size(); ++i) {
        if (a.entries[i].slot != b.entries[i].slot) {
            throw SiftError(SiftError::Code::SlotSetMismatch, "keys cover different slot sets");
        }
        if (a.entries[i].bit != b.entries[i].bit) ++errors;
    }
    return {errors, uint32_t(a.entries.size())};
}

}  // namespace dpsqkd
