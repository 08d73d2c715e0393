#include "dpsqkd/kernels.hpp"

#include <atomic>
#include <cstdlib>

namespace dpsqkd::kern {

namespace {

Isa detect() {
#if defined(__x86_64__) || defined(_M_X64)
    __builtin_cpu_init();
    if (__builtin_cpu_supports("avx2")) return Isa::avx2;
#endif
    return Isa::scalar;
}

Isa initial_isa() {
    const char* force = std::getenv("DPSQKD_FORCE_SCALAR");
    if (force && force[0] == '1') return Isa::scalar;
    return detect();
}

std::atomic<Isa> g_active{initial_isa()};

}  // namespace

Isa detected_isa() { return detect(); }

Isa active_isa() { return g_active.load(std::memory_order_relaxed); }

void set_active_isa(Isa isa) {
#if !defined(__x86_64__) && !defined(_M_X64)
    isa = Isa::scalar;
#endif
    g_active.store(isa, std::memory_order_relaxed);
}

void fill_u64(uint64_t key, rng::Stream stream, uint64_t first, size_t count, uint64_t* out) {
#if defined(__x86_64__) || defined(_M_X64)
    if (active_isa() == Isa::avx2) {
        fill_u64_avx2(key, stream, first, count, out);
        return;
    }
#endif
    fill_u64_scalar(key, stream, first, count, out);
}

void bernoulli_mask(uint64_t key, rng::Stream stream, uint64_t first, size_t count, uint64_t threshold53,
                    uint64_t* mask) {
#if defined(__x86_64__) || defined(_M_X64)
    if (active_isa() == Isa::avx2) {
        bernoulli_mask_avx2(key, stream, first, count, threshold53, mask);
        return;
    }
#endif
    bernoulli_mask_scalar(key, stream, first, count, threshold53, mask);
}

}  // namespace dpsqkd::kern
