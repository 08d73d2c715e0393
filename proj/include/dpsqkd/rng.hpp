#pragma once

#include <cstdint>

// Counter-based random streams (Philox4x32-10).
//
// Every random draw in the project is a pure function of
// (root seed, stream id, 64-bit index): draw i of stream s never depends on
// draw j, so slot ranges can be evaluated in any order by any number of
// workers and the results are bit-identical. One Philox block yields 128
// bits; we expose them as two independent 64-bit words.

namespace dpsqkd::rng {

struct Block {
    uint32_t v[4];

    uint64_t lo64() const { return uint64_t(v[0]) | (uint64_t(v[1]) << 32); }
    uint64_t hi64() const { return uint64_t(v[2]) | (uint64_t(v[3]) << 32); }
};

// Stream ids keep module substreams disjoint under one root seed.
enum class Stream : uint32_t {
    phases = 1,
    click = 2,
    click_aux = 3,
    dark_d0 = 4,
    dark_d1 = 5,
    usd_success = 6,
    usd_resend = 7,
    usd_click = 8,
    sample_positions = 9,
    session_id = 10,
};

// Full-counter form, matching the published Philox4x32-10 test vectors.
Block philox_raw(uint32_t c0, uint32_t c1, uint32_t c2, uint32_t c3, uint32_t k0, uint32_t k1);

inline Block philox(uint64_t key, uint32_t stream, uint64_t index) {
    return philox_raw(uint32_t(index), uint32_t(index >> 32), stream, 0, uint32_t(key), uint32_t(key >> 32));
}

inline Block philox(uint64_t key, Stream stream, uint64_t index) {
    return philox(key, static_cast<uint32_t>(stream), index);
}

// 53-bit threshold for "uniform < p". p is clamped to [0,1].
uint64_t bernoulli_threshold(double p);

// Uniform double in (0,1), never exactly 0 or 1.
inline double to_unit_open(uint64_t word) {
    return (double((word >> 11)) + 0.5) * 0x1.0p-53;
}

// Buffered sequential view of one stream, for consumers that draw an
// unpredictable number of values (e.g. exponential gap sampling).
class SequentialStream {
  public:
    SequentialStream(uint64_t key, Stream stream) : key_(key), stream_(static_cast<uint32_t>(stream)) {}

    uint64_t next_u64() {
        Block b = philox(key_, stream_, index_++);
        return b.lo64();
    }

    double next_unit_open() { return to_unit_open(next_u64()); }

  private:
    uint64_t key_;
    uint32_t stream_;
    uint64_t index_ = 0;
};

}  // namespace dpsqkd::rng
