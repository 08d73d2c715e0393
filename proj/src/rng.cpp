#include "dpsqkd/rng.hpp"

#include <cmath>

namespace dpsqkd::rng {

namespace {

constexpr uint32_t kMul0 = 0xD2511F53u;
constexpr uint32_t kMul1 = 0xCD9E8D57u;
constexpr uint32_t kWeyl0 = 0x9E3779B9u;
constexpr uint32_t kWeyl1 = 0xBB67AE85u;

inline uint32_t mulhi32(uint32_t a, uint32_t b) {
    return uint32_t((uint64_t(a) * uint64_t(b)) >> 32);
}

}  // namespace

Block philox_raw(uint32_t c0, uint32_t c1, uint32_t c2, uint32_t c3, uint32_t key0, uint32_t key1) {
    uint32_t x0 = c0;
    uint32_t x1 = c1;
    uint32_t x2 = c2;
    uint32_t x3 = c3;
    uint32_t k0 = key0;
    uint32_t k1 = key1;

    for (int round = 0; round < 10; ++round) {
        uint32_t hi0 = mulhi32(kMul0, x0);
        uint32_t lo0 = kMul0 * x0;
        uint32_t hi1 = mulhi32(kMul1, x2);
        uint32_t lo1 = kMul1 * x2;
        uint32_t y0 = hi1 ^ x1 ^ k0;
        uint32_t y1 = lo1;
        uint32_t y2 = hi0 ^ x3 ^ k1;
        uint32_t y3 = lo0;
        x0 = y0;
        x1 = y1;
        x2 = y2;
        x3 = y3;
        k0 += kWeyl0;
        k1 += kWeyl1;
    }
    return Block{{x0, x1, x2, x3}};
}

uint64_t bernoulli_threshold(double p) {
    if (!(p > 0.0)) return 0;
    if (p >= 1.0) return uint64_t(1) << 53;
    return uint64_t(std::llround(p * 0x1.0p53));
}

}  // namespace dpsqkd::rng
