#include "dpsqkd/kernels.hpp"

namespace dpsqkd::kern {

void fill_u64_scalar(uint64_t key, rng::Stream stream, uint64_t first, size_t count, uint64_t* out) {
    const uint32_t s = static_cast<uint32_t>(stream);
    for (size_t i = 0; i < count; ++i) {
        out[i] = rng::philox(key, s, first + i).lo64();
    }
}

void bernoulli_mask_scalar(uint64_t key, rng::Stream stream, uint64_t first, size_t count, uint64_t threshold53,
                           uint64_t* mask) {
    const uint32_t s = static_cast<uint32_t>(stream);
    const size_t words = (count + 63) / 64;
    for (size_t w = 0; w < words; ++w) mask[w] = 0;
    for (size_t i = 0; i < count; ++i) {
        uint64_t u = rng::philox(key, s, first + i).lo64() >> 11;
        if (u < threshold53) mask[i / 64] |= uint64_t(1) << (i % 64);
    }
}

}  // namespace dpsqkd::kern
