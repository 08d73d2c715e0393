#pragma once

#include <cstddef>
#include <cstdint>

#include "dpsqkd/rng.hpp"

// Batch kernels over counter-based random streams.
//
// Each kernel exists as a scalar reference implementation and an AVX2
// variant; the active one is selected at runtime from CPU capabilities.
// The variants are bit-exact equivalents (pure integer Philox plus an
// integer threshold compare), so the selection never changes results.

namespace dpsqkd::kern {

enum class Isa { scalar, avx2 };

// Best ISA the CPU supports.
Isa detected_isa();

// Currently active ISA. Defaults to detected_isa(); DPSQKD_FORCE_SCALAR=1
// in the environment pins the scalar path.
Isa active_isa();
void set_active_isa(Isa isa);

// out[i] = low 64 bits of philox(key, stream, first + i), for i in [0, count).
void fill_u64(uint64_t key, rng::Stream stream, uint64_t first, size_t count, uint64_t* out);

// Bit i of mask (bit i%64 of word i/64) is set iff the 53-bit draw for
// index first+i is below threshold. Bits at positions >= count are zero.
// mask must hold (count + 63) / 64 words.
void bernoulli_mask(uint64_t key, rng::Stream stream, uint64_t first, size_t count, uint64_t threshold53,
                    uint64_t* mask);

// Scalar references, exposed for equivalence tests.
void fill_u64_scalar(uint64_t key, rng::Stream stream, uint64_t first, size_t count, uint64_t* out);
void bernoulli_mask_scalar(uint64_t key, rng::Stream stream, uint64_t first, size_t count, uint64_t threshold53,
                           uint64_t* mask);

#if defined(__x86_64__) || defined(_M_X64)
void fill_u64_avx2(uint64_t key, rng::Stream stream, uint64_t first, size_t count, uint64_t* out);
void bernoulli_mask_avx2(uint64_t key, rng::Stream stream, uint64_t first, size_t count, uint64_t threshold53,
                         uint64_t* mask);
#endif

}  // namespace dpsqkd::kern
