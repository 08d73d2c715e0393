#pragma once

#include <cstdint>
#include <stdexcept>
#include <vector>

#include "dpsqkd/params.hpp"
#include "dpsqkd/timing.hpp"

namespace dpsqkd {

// Alice's {0, pi} modulation stream, one bit per slot (1 = pi).
class PhaseSequence {
  public:
    PhaseSequence() = default;
    explicit PhaseSequence(uint64_t n) : n_(n), words_((n + 63) / 64, 0) {}

    uint64_t size() const { return n_; }
    bool pi_at(uint64_t slot) const { return (words_[slot / 64] >> (slot % 64)) & 1; }
    void set_pi(uint64_t slot, bool pi) {
        uint64_t bit = uint64_t(1) << (slot % 64);
        if (pi)
            words_[slot / 64] |= bit;
        else
            words_[slot / 64] &= ~bit;
    }
    // 0 if phases of slot-1 and slot agree, 1 otherwise; slot >= 1.
    int diff_bit(uint64_t slot) const { return pi_at(slot - 1) != pi_at(slot) ? 1 : 0; }

    std::vector<uint64_t>& words() { return words_; }
    const std::vector<uint64_t>& words() const { return words_; }

  private:
    uint64_t n_ = 0;
    std::vector<uint64_t> words_;
};

enum class Detector : uint8_t { d0 = 0, d1 = 1 };
enum class Cause : uint8_t { signal = 0, dark = 1 };

struct DetectionRecord {
    uint64_t true_slot = 0;      // emitting clock slot (darks: same as assigned)
    uint64_t assigned_slot = 0;  // slot after jitter re-rounding
    int64_t offset_fs = 0;       // arrival relative to assigned slot center
    Detector detector = Detector::d0;
    Cause cause = Cause::signal;  // diagnostic only; never feeds sifting

    bool operator==(const DetectionRecord&) const = default;
};

struct Histogram {
    int64_t bin_width_fs = 0;
    int64_t origin_fs = 0;
    std::vector<uint64_t> counts;
};

class McError : public std::runtime_error {
  public:
    enum class Code { PhasesTooShort };
    McError(Code code, std::string what) : std::runtime_error(std::move(what)), code_(code) {}
    Code code() const { return code_; }

  private:
    Code code_;
};

// n independent fair binary phases, deterministic in seed.
PhaseSequence generate_phases(uint64_t n, uint64_t seed);

// One photon-level session: source, channel, 1-bit-delay interferometer,
// jittered detectors, dark counts. Returns at most one record per assigned
// slot (same-detector pile-ups keep the earliest arrival; opposite-detector
// pile-ups discard the slot). Slot 0 and out-of-range slots are dropped.
// Output is identical for any worker count.
std::vector<DetectionRecord> simulate_detection(const SystemParams& params, const PhaseSequence& phases,
                                                uint64_t seed, int workers = 1);

// Keeps records with |offset| <= window/2, order preserved.
std::vector<DetectionRecord> apply_window(const std::vector<DetectionRecord>& records, double window_width_ps);

// Absolute arrival times folded across `span` slots.
Histogram arrival_histogram(const std::vector<DetectionRecord>& records, double bin_width_ps, uint64_t span_slots,
                            int64_t period_fs);

}  // namespace dpsqkd
