#include "dpsqkd/mc.hpp"

#include <algorithm>
#include <atomic>
#include <bit>
#include <cmath>
#include <thread>

#include "dpsqkd/kernels.hpp"
#include "dpsqkd/rng.hpp"
#include "dpsqkd/stats.hpp"

namespace dpsqkd {

namespace {

constexpr uint64_t kChunkSlots = uint64_t(1) << 20;

int64_t floor_div(int64_t a, int64_t b) {
    int64_t q = a / b;
    if ((a % b != 0) && ((a < 0) != (b < 0))) --q;
    return q;
}

struct SlotChunk {
    uint64_t begin;
    uint64_t end;
};

// Fixed-size chunking: the partition never depends on the worker count, so
// per-chunk outputs concatenate to the same stream for any parallelism.
std::vector<SlotChunk> make_chunks(uint64_t begin, uint64_t end) {
    std::vector<SlotChunk> chunks;
    for (uint64_t lo = begin; lo < end; lo += kChunkSlots) {
        chunks.push_back({lo, std::min(end, lo + kChunkSlots)});
    }
    return chunks;
}

template <typename Fn>
void run_chunked(const std::vector<SlotChunk>& chunks, int workers, Fn&& fn) {
    if (workers <= 1 || chunks.size() <= 1) {
        for (size_t i = 0; i < chunks.size(); ++i) fn(i);
        return;
    }
    std::atomic<size_t> next{0};
    auto worker = [&] {
        for (;;) {
            size_t i = next.fetch_add(1);
            if (i >= chunks.size()) return;
            fn(i);
        }
    };
    std::vector<std::thread> pool;
    int n = std::min<int>(workers, int(chunks.size()));
    pool.reserve(n);
    for (int t = 0; t < n; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
}

void append_dark_records(const SystemParams& params, uint64_t n_slots, uint64_t seed,
                         std::vector<DetectionRecord>& out) {
    const double per_detector_hz = params.dark_rate_total_hz() / 2.0;
    if (per_detector_hz <= 0.0) return;
    const int64_t period = params.period_fs();
    const int64_t session_fs = int64_t(n_slots) * period;
    const double mean_gap_fs = 1e15 / per_detector_hz;

    for (int det = 0; det < 2; ++det) {
        rng::SequentialStream stream(seed, det == 0 ? rng::Stream::dark_d0 : rng::Stream::dark_d1);
        double t = 0.0;
        for (;;) {
            t += -std::log(stream.next_unit_open()) * mean_gap_fs;
            if (t >= double(session_fs)) break;
            const int64_t abs_fs = int64_t(t);
            const int64_t slot = floor_div(abs_fs + period / 2, period);
            if (slot < 1 || uint64_t(slot) >= n_slots) continue;
            DetectionRecord rec;
            rec.true_slot = uint64_t(slot);
            rec.assigned_slot = uint64_t(slot);
            rec.offset_fs = abs_fs - slot * period;
            rec.detector = det == 0 ? Detector::d0 : Detector::d1;
            rec.cause = Cause::dark;
            out.push_back(rec);
        }
    }
}

}  // namespace

PhaseSequence generate_phases(uint64_t n, uint64_t seed) {
    PhaseSequence seq(n);
    if (n == 0) return seq;
    kern::bernoulli_mask(seed, rng::Stream::phases, 0, n, rng::bernoulli_threshold(0.5), seq.words().data());
    return seq;
}

std::vector<DetectionRecord> simulate_detection(const SystemParams& params, const PhaseSequence& phases,
                                                uint64_t seed, int workers) {
    const SystemParams p = validate_params(params);
    const uint64_t n = phases.size();
    if (n < 2) throw McError(McError::Code::PhasesTooShort, "need at least 2 slots");

    const TimingModel timing = make_timing_model(p);
    const int64_t period = p.period_fs();

    const double mu_eff = p.mu * channel_transmittance(p) * db_to_transmittance(p.interferometer_loss_db) *
                          p.detector_qe;
    const double p_click = 1.0 - std::exp(-mu_eff);
    const uint64_t thr_click = rng::bernoulli_threshold(p_click);
    const uint64_t thr_flip = rng::bernoulli_threshold(timing.flip_prob);

    const auto chunks = make_chunks(1, n);
    std::vector<std::vector<DetectionRecord>> per_chunk(chunks.size());

    run_chunked(chunks, workers, [&](size_t ci) {
        const auto [lo, hi] = chunks[ci];
        const uint64_t count = hi - lo;
        std::vector<uint64_t> mask((count + 63) / 64);
        kern::bernoulli_mask(seed, rng::Stream::click, lo, count, thr_click, mask.data());

        auto& recs = per_chunk[ci];
        for (uint64_t w = 0; w < mask.size(); ++w) {
            uint64_t bits = mask[w];
            while (bits) {
                const int b = std::countr_zero(bits);
                bits &= bits - 1;
                const uint64_t t = lo + 64 * w + uint64_t(b);
                if (t >= hi) break;

                const rng::Block aux = rng::philox(seed, rng::Stream::click_aux, t);
                const bool flip = (aux.lo64() >> 11) < thr_flip;
                const double u = rng::to_unit_open(aux.hi64());
                const int64_t offset = int64_t(std::llround(stats::norm_ppf(u) * timing.sigma_fs));

                const int64_t abs_fs = int64_t(t) * period + offset;
                const int64_t assigned = floor_div(abs_fs + period / 2, period);
                if (assigned < 1 || uint64_t(assigned) >= n) continue;

                const int bit = phases.diff_bit(t) ^ (flip ? 1 : 0);
                DetectionRecord rec;
                rec.true_slot = t;
                rec.assigned_slot = uint64_t(assigned);
                rec.offset_fs = abs_fs - assigned * period;
                rec.detector = bit ? Detector::d1 : Detector::d0;
                rec.cause = Cause::signal;
                recs.push_back(rec);
            }
        }
    });

    std::vector<DetectionRecord> all;
    size_t total = 0;
    for (const auto& v : per_chunk) total += v.size();
    all.reserve(total + 16);
    for (auto& v : per_chunk) {
        all.insert(all.end(), v.begin(), v.end());
        v.clear();
    }
    append_dark_records(p, n, seed, all);

    std::sort(all.begin(), all.end(), [](const DetectionRecord& a, const DetectionRecord& b) {
        if (a.assigned_slot != b.assigned_slot) return a.assigned_slot < b.assigned_slot;
        if (a.offset_fs != b.offset_fs) return a.offset_fs < b.offset_fs;
        if (a.true_slot != b.true_slot) return a.true_slot < b.true_slot;
        return a.detector < b.detector;
    });

    // Collapse pile-ups: one record per assigned slot, or none when both
    // detectors fired in it.
    std::vector<DetectionRecord> out;
    out.reserve(all.size());
    size_t i = 0;
    while (i < all.size()) {
        size_t j = i;
        bool mixed = false;
        while (j < all.size() && all[j].assigned_slot == all[i].assigned_slot) {
            if (all[j].detector != all[i].detector) mixed = true;
            ++j;
        }
        if (!mixed) out.push_back(all[i]);
        i = j;
    }
    return out;
}

std::vector<DetectionRecord> apply_window(const std::vector<DetectionRecord>& records, double window_width_ps) {
    const int64_t window_fs = int64_t(std::llround(window_width_ps * 1000.0));
    std::vector<DetectionRecord> out;
    out.reserve(records.size());
    for (const auto& r : records) {
        if (std::abs(r.offset_fs) * 2 <= window_fs) out.push_back(r);
    }
    return out;
}

Histogram arrival_histogram(const std::vector<DetectionRecord>& records, double bin_width_ps, uint64_t span_slots,
                            int64_t period_fs) {
    Histogram h;
    h.bin_width_fs = int64_t(std::llround(bin_width_ps * 1000.0));
    if (h.bin_width_fs <= 0 || span_slots == 0) throw std::invalid_argument("bin_width and span must be positive");
    h.origin_fs = -period_fs / 2;
    const int64_t span_fs = int64_t(span_slots) * period_fs;
    h.counts.assign(size_t((span_fs + h.bin_width_fs - 1) / h.bin_width_fs), 0);
    for (const auto& r : records) {
        // fold the absolute arrival over span_slots, measured from origin
        const int64_t folded = (int64_t(r.assigned_slot % span_slots)) * period_fs + r.offset_fs - h.origin_fs;
        int64_t idx = folded / h.bin_width_fs;
        if (idx < 0) idx += int64_t(h.counts.size());
        if (idx >= int64_t(h.counts.size())) idx -= int64_t(h.counts.size());
        ++h.counts[size_t(idx)];
    }
    return h;
}

}  // namespace dpsqkd
