#pragma once

#include <optional>
#include <random>
#include <string>
#include <vector>

#include "pqscan/pqspec.hpp"
#include "pqscan/simd/kernels.hpp"

namespace pqscan {
namespace selftest {

// Spec families with a vector kernel; m varies per trial to hit row tails.
inline const std::vector<std::pair<std::string, std::vector<uint32_t>>>& family_specs() {
    static const std::vector<std::pair<std::string, std::vector<uint32_t>>> fams = {
        {"{4,4}", {2, 4, 6, 8, 10, 16, 32}},
        {"{6,6,4}", {3, 6, 12, 24}},
        {"{6,5,5}", {3, 6, 12, 24}},
        {"{5,5,5}", {3, 6, 12, 24}},
        {"{8,8}", {2, 4, 8, 16}},
        {"{8}", {1, 2, 4, 8, 16}},
    };
    return fams;
}

struct DiffReport {
    std::string pattern;
    KernelFamily kernel = KernelFamily::scalar_quantized;
    uint64_t trials = 0;
    uint64_t mismatches = 0;
    std::string first_mismatch;
};

// Randomized differential check of one spec family's vector kernel against the
// scalar-quantized reference: random tables (uniform and saturation-heavy),
// random block counts and occupancies, random pre-seeded heaps, random
// accumulator bias, both id modes. Heap states must match bit-exactly.
// Returns nullopt when the family has no vector kernel on this host.
inline std::optional<DiffReport> differential_trials(const std::string& pattern,
                                                     const std::vector<uint32_t>& m_choices, uint64_t trials,
                                                     uint64_t seed) {
    std::mt19937_64 rng(seed);
    DiffReport rep;
    rep.pattern = pattern;

    // availability probe on the smallest m
    {
        SpecPattern p = parse_spec_string(std::to_string(m_choices.front()) + "x" + pattern);
        PqSpec probe = allocate_dims(16 * p.m, p);
        KernelFamily fam = select_kernel(probe, SimdCaps::available());
        if (fam == KernelFamily::scalar_quantized) return std::nullopt;
        rep.kernel = fam;
    }

    for (uint64_t t = 0; t < trials; ++t) {
        const uint32_t m = m_choices[rng() % m_choices.size()];
        PqSpec spec = allocate_dims(16 * m, parse_spec_string(std::to_string(m) + "x" + pattern));
        PackingScheme scheme = PackingScheme::for_spec(spec);
        QuantizedScanFn fn = quantized_scan_fn(spec, rep.kernel);

        QuantizedTables qt;
        qt.width = scheme.word_width;
        qt.delta = 1.0f;
        qt.d_min = 0.0f;
        qt.p_min.assign(spec.num_subs(), 0.0f);
        const uint32_t q_max = qt.width == 8 ? 255u : 65535u;
        const bool saturating = rng() % 4 == 0; // bias entries high to exercise q_max paths
        auto draw_entry = [&]() -> uint32_t {
            if (saturating) return q_max - rng() % (q_max / 4 + 1);
            return rng() % (q_max + 1);
        };
        if (qt.width == 8) {
            qt.t8.resize(spec.num_subs());
            for (size_t j = 0; j < spec.num_subs(); ++j) {
                qt.t8[j].resize(spec.centroid_count(j));
                for (auto& e : qt.t8[j]) e = static_cast<uint8_t>(draw_entry());
            }
        } else {
            qt.t16.resize(spec.num_subs());
            for (size_t j = 0; j < spec.num_subs(); ++j) {
                qt.t16[j].resize(spec.centroid_count(j));
                for (auto& e : qt.t16[j]) e = static_cast<uint16_t>(draw_entry());
            }
        }

        const size_t n = 1 + rng() % (size_t{scheme.block_len} * 3);
        std::vector<Code> codes(n, Code(spec.num_subs()));
        for (auto& c : codes)
            for (size_t j = 0; j < spec.num_subs(); ++j) c[j] = static_cast<uint8_t>(rng() % spec.centroid_count(j));
        PackedList list = pack_list(codes, scheme);

        const uint32_t r = 1 + rng() % 24;
        const uint32_t init = (rng() % 4 == 0) ? static_cast<uint32_t>(rng() % (q_max + 2)) : 0;
        std::vector<uint32_t> ids;
        const uint32_t* idp = nullptr;
        uint32_t base = static_cast<uint32_t>(rng() % 100000);
        if (rng() % 2) {
            ids.resize(n);
            for (auto& id : ids) id = static_cast<uint32_t>(rng() % 1000000);
            idp = ids.data();
        }

        CandidateHeap<uint32_t> ref(r), vec(r);
        const uint32_t preseed = rng() % 4;
        for (uint32_t i = 0; i < preseed; ++i) {
            uint32_t d = rng() % (q_max + 1), id = 2000000 + i;
            ref.push(d, id);
            vec.push(d, id);
        }

        scan_list_scalar_quantized(list, scheme, qt, idp, base, init, ref);
        fn(list, scheme, qt, idp, base, init, vec);

        auto a = ref.sorted(), b = vec.sorted();
        bool ok = a.size() == b.size();
        for (size_t i = 0; ok && i < a.size(); ++i) ok = a[i] == b[i];
        rep.trials++;
        if (!ok) {
            rep.mismatches++;
            if (rep.first_mismatch.empty())
                rep.first_mismatch = "m=" + std::to_string(m) + " n=" + std::to_string(n) +
                                     " R=" + std::to_string(r) + " trial=" + std::to_string(t);
        }
    }
    return rep;
}

struct SplitReport {
    bool ran_u16 = false;
    bool ran_u8 = false;
    uint64_t mismatches = 0;
};

// Exhaustive (index, lane) equivalence of the split-table lookups against a
// flat 256-entry lookup.
inline SplitReport split_table_exhaustive() {
    SplitReport rep;
    std::mt19937_64 rng(0x5eed);
#if defined(__AVX512BW__)
    if (SimdCaps::available().avx512bw) {
        rep.ran_u16 = true;
        std::vector<uint16_t> table(256);
        for (auto& e : table) e = static_cast<uint16_t>(rng() % 65536);
        alignas(64) uint16_t idx[32];
        alignas(64) uint16_t out[32];
        for (uint32_t round = 0; round < 256; ++round) {
            for (uint32_t lane = 0; lane < 32; ++lane) idx[lane] = static_cast<uint16_t>((round + lane) % 256);
            __m512i v = simd::split_lookup_u16(_mm512_loadu_si512(idx), table.data());
            _mm512_storeu_si512(out, v);
            for (uint32_t lane = 0; lane < 32; ++lane)
                if (out[lane] != table[idx[lane]]) rep.mismatches++;
        }
    }
#endif
#if defined(__AVX512VBMI__) && defined(__AVX512BW__)
    if (SimdCaps::available().avx512vbmi) {
        rep.ran_u8 = true;
        std::vector<uint8_t> table(256);
        for (auto& e : table) e = static_cast<uint8_t>(rng() % 256);
        alignas(64) uint8_t idx[64];
        alignas(64) uint8_t out[64];
        for (uint32_t round = 0; round < 256; ++round) {
            for (uint32_t lane = 0; lane < 64; ++lane) idx[lane] = static_cast<uint8_t>((round + lane) % 256);
            __m512i v = simd::split_lookup_u8(_mm512_loadu_si512(idx), table.data());
            _mm512_storeu_si512(out, v);
            for (uint32_t lane = 0; lane < 64; ++lane)
                if (out[lane] != table[idx[lane]]) rep.mismatches++;
        }
    }
#endif
    return rep;
}

} // namespace selftest
} // namespace pqscan
