#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "dpsqkd/mc.hpp"

namespace dpsqkd {

struct SiftedEntry {
    uint64_t slot = 0;
    uint8_t bit = 0;

    bool operator==(const SiftedEntry&) const = default;
};

// Slot-ordered sifted bit material; bit 0 for D0, 1 for D1.
struct SiftedKey {
    std::vector<SiftedEntry> entries;

    bool operator==(const SiftedKey&) const = default;
};

namespace msg {

constexpr uint16_t kProtocolVersion = 0x0001;

struct Hello {
    uint64_t session_id = 0;
    uint64_t clock_rate_hz = 0;
    uint64_t slot_count = 0;
    uint16_t version = kProtocolVersion;

    bool operator==(const Hello&) const = default;
};

// Click time instances only; which-detector information never enters this
// payload.
struct Disclose {
    std::vector<uint64_t> slot_indices;  // strictly increasing

    bool operator==(const Disclose&) const = default;
};

struct SampleRequest {
    std::vector<uint32_t> key_positions;  // strictly increasing

    bool operator==(const SampleRequest&) const = default;
};

struct SampleBits {
    uint32_t bit_count = 0;
    std::vector<uint8_t> packed;  // LSB-first

    bool operator==(const SampleBits&) const = default;
};

struct QberReport {
    uint32_t errors = 0;
    uint32_t compared = 0;

    bool operator==(const QberReport&) const = default;
};

struct Done {
    bool operator==(const Done&) const = default;
};

}  // namespace msg

using ClassicalMessage =
    std::variant<msg::Hello, msg::Disclose, msg::SampleRequest, msg::SampleBits, msg::QberReport, msg::Done>;

class CodecError : public std::runtime_error {
  public:
    enum class Code { TruncatedFrame, UnknownType, NonMonotonicSlots, Malformed };
    CodecError(Code code, std::string what) : std::runtime_error(std::move(what)), code_(code) {}
    Code code() const { return code_; }

  private:
    Code code_;
};

class SiftError : public std::runtime_error {
  public:
    enum class Code { DuplicateSlot, SlotOutOfRange, SlotSetMismatch };
    SiftError(Code code, std::string what) : std::runtime_error(std::move(what)), code_(code) {}
    Code code() const { return code_; }

  private:
    Code code_;
};

// Frame = [type u8][payload_length u32 LE][payload].
std::vector<uint8_t> encode_message(const ClassicalMessage& m);

// Decodes one frame from the front of `bytes`; `consumed` reports its size.
ClassicalMessage decode_message(const std::vector<uint8_t>& bytes, size_t& consumed);
ClassicalMessage decode_message(const std::vector<uint8_t>& bytes);

// Bob: windowed, deduplicated records -> key + disclosure of time instances.
std::pair<SiftedKey, msg::Disclose> bob_extract(const std::vector<DetectionRecord>& records);

// Alice: reconstructs Bob's bits from her modulation record.
SiftedKey alice_sift(const PhaseSequence& phases, const msg::Disclose& disclose);

// (errors, compared) over two keys with identical slot sets.
std::pair<uint32_t, uint32_t> measure_qber(const SiftedKey& a, const SiftedKey& b);

}  // namespace dpsqkd
