#include "dpsqkd/kernels.hpp"

#if defined(__x86_64__) || defined(_M_X64)

#include <immintrin.h>

namespace dpsqkd::kern {

namespace {

constexpr uint32_t kMul0 = 0xD2511F53u;
constexpr uint32_t kMul1 = 0xCD9E8D57u;
constexpr uint32_t kWeyl0 = 0x9E3779B9u;
constexpr uint32_t kWeyl1 = 0xBB67AE85u;

// mullo/mulhi of 8 u32 lanes against a broadcast constant.
inline void mul_full(__m256i x, __m256i m, __m256i& lo, __m256i& hi) {
    __m256i prod_even = _mm256_mul_epu32(x, m);
    __m256i prod_odd = _mm256_mul_epu32(_mm256_srli_epi64(x, 32), m);
    lo = _mm256_mullo_epi32(x, m);
    hi = _mm256_blend_epi32(_mm256_srli_epi64(prod_even, 32), prod_odd, 0xAA);
}

// Philox4x32-10 over 8 independent lanes held in SoA form.
inline void philox8(__m256i& x0, __m256i& x1, __m256i& x2, __m256i& x3, uint32_t key0, uint32_t key1) {
    const __m256i m0 = _mm256_set1_epi32(int(kMul0));
    const __m256i m1 = _mm256_set1_epi32(int(kMul1));
    const __m256i w0 = _mm256_set1_epi32(int(kWeyl0));
    const __m256i w1 = _mm256_set1_epi32(int(kWeyl1));
    __m256i k0 = _mm256_set1_epi32(int(key0));
    __m256i k1 = _mm256_set1_epi32(int(key1));
    for (int round = 0; round < 10; ++round) {
        __m256i lo0, hi0, lo1, hi1;
        mul_full(x0, m0, lo0, hi0);
        mul_full(x2, m1, lo1, hi1);
        __m256i y0 = _mm256_xor_si256(_mm256_xor_si256(hi1, x1), k0);
        __m256i y2 = _mm256_xor_si256(_mm256_xor_si256(hi0, x3), k1);
        x0 = y0;
        x1 = lo1;
        x2 = y2;
        x3 = lo0;
        k0 = _mm256_add_epi32(k0, w0);
        k1 = _mm256_add_epi32(k1, w1);
    }
}

inline void load_counters(uint64_t base, __m256i& x0, __m256i& x1) {
    alignas(32) uint32_t lo[8];
    alignas(32) uint32_t hi[8];
    for (int j = 0; j < 8; ++j) {
        uint64_t v = base + uint64_t(j);
        lo[j] = uint32_t(v);
        hi[j] = uint32_t(v >> 32);
    }
    x0 = _mm256_load_si256(reinterpret_cast<const __m256i*>(lo));
    x1 = _mm256_load_si256(reinterpret_cast<const __m256i*>(hi));
}

// Low 64-bit words of 8 lanes, as two vectors in lane order {0,1,4,5} and {2,3,6,7}.
inline void lo64_pairs(__m256i x0, __m256i x1, __m256i& pairs_a, __m256i& pairs_b) {
    pairs_a = _mm256_unpacklo_epi32(x0, x1);
    pairs_b = _mm256_unpackhi_epi32(x0, x1);
}

}  // namespace

void fill_u64_avx2(uint64_t key, rng::Stream stream, uint64_t first, size_t count, uint64_t* out) {
    const uint32_t s = static_cast<uint32_t>(stream);
    const uint32_t key0 = uint32_t(key);
    const uint32_t key1 = uint32_t(key >> 32);
    const __m256i stream_v = _mm256_set1_epi32(int(s));
    size_t i = 0;
    for (; i + 8 <= count; i += 8) {
        __m256i x0, x1;
        load_counters(first + i, x0, x1);
        __m256i x2 = stream_v;
        __m256i x3 = _mm256_setzero_si256();
        philox8(x0, x1, x2, x3, key0, key1);
        __m256i pa, pb;
        lo64_pairs(x0, x1, pa, pb);
        __m256i seq0 = _mm256_permute2x128_si256(pa, pb, 0x20);  // lanes 0..3
        __m256i seq1 = _mm256_permute2x128_si256(pa, pb, 0x31);  // lanes 4..7
        _mm256_storeu_si256(reinterpret_cast<__m256i*>(out + i), seq0);
        _mm256_storeu_si256(reinterpret_cast<__m256i*>(out + i + 4), seq1);
    }
    for (; i < count; ++i) {
        out[i] = rng::philox(key, s, first + i).lo64();
    }
}

void bernoulli_mask_avx2(uint64_t key, rng::Stream stream, uint64_t first, size_t count, uint64_t threshold53,
                         uint64_t* mask) {
    const uint32_t s = static_cast<uint32_t>(stream);
    const uint32_t key0 = uint32_t(key);
    const uint32_t key1 = uint32_t(key >> 32);
    const __m256i stream_v = _mm256_set1_epi32(int(s));
    const __m256i thr_v = _mm256_set1_epi64x(int64_t(threshold53));

    const size_t words = (count + 63) / 64;
    for (size_t w = 0; w < words; ++w) mask[w] = 0;

    size_t i = 0;
    for (; i + 64 <= count; i += 64) {
        uint64_t word = 0;
        for (int b = 0; b < 8; ++b) {
            __m256i x0, x1;
            load_counters(first + i + uint64_t(8 * b), x0, x1);
            __m256i x2 = stream_v;
            __m256i x3 = _mm256_setzero_si256();
            philox8(x0, x1, x2, x3, key0, key1);
            __m256i pa, pb;
            lo64_pairs(x0, x1, pa, pb);
            __m256i ua = _mm256_srli_epi64(pa, 11);
            __m256i ub = _mm256_srli_epi64(pb, 11);
            // draws fit in 53 bits, so signed 64-bit compare is exact
            int ma = _mm256_movemask_pd(_mm256_castsi256_pd(_mm256_cmpgt_epi64(thr_v, ua)));
            int mb = _mm256_movemask_pd(_mm256_castsi256_pd(_mm256_cmpgt_epi64(thr_v, ub)));
            // ma bits map to lanes {0,1,4,5}, mb to {2,3,6,7}
            uint64_t byte = uint64_t((ma & 0x3) | ((mb & 0x3) << 2) | ((ma & 0xC) << 2) | ((mb & 0xC) << 4));
            word |= byte << (8 * b);
        }
        mask[i / 64] = word;
    }
    for (; i < count; ++i) {
        uint64_t u = rng::philox(key, s, first + i).lo64() >> 11;
        if (u < threshold53) mask[i / 64] |= uint64_t(1) << (i % 64);
    }
}

}  // namespace dpsqkd::kern

#endif  // x86_64
