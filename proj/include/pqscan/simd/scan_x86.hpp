#pragma once

// Vectorized scan kernels. Each one is an optimization of
// scan_list_scalar_quantized with a bit-exactness obligation: identical heap
// mutations for identical inputs. Saturating unsigned accumulation is
// order-independent, which is what lets the kernels reorder the per-group adds.
//
// Families:
//   shuffle16x8   {4,4}            16-entry byte shuffles, 8-bit distances, blocks of 16
//   permute32x16  {6,6,4}-style    32/64-entry word permutes, 16-bit distances, blocks of 32
//   split_table16 {8,8}            8-bit lookups from four word permutes + three blends
//   split_table8  {8}              8-bit lookups from two byte permutes + one blend, blocks of 64

#include <array>
#include <cstdint>
#include <cstring>
#include <utility>
#include <vector>

#include "pqscan/distance.hpp"
#include "pqscan/heap.hpp"
#include "pqscan/layout.hpp"
#include "pqscan/simd/caps.hpp"
#include "pqscan/simd/scan_scalar.hpp"

#if defined(__x86_64__) || defined(__i386__)
#include <immintrin.h>
#endif

namespace pqscan {
namespace simd {

namespace detail {

template <class F, size_t... I>
constexpr void unroll_impl(F&& f, std::index_sequence<I...>) {
    (f.template operator()<I>(), ...);
}
template <size_t N, class F>
constexpr void unroll(F&& f) {
    unroll_impl(std::forward<F>(f), std::make_index_sequence<N>{});
}

inline void admit_u8(const uint8_t* dists, uint32_t occ, const uint32_t* ids, uint32_t base_id, uint64_t start,
                     CandidateHeap<uint32_t>& heap) {
    for (uint32_t p = 0; p < occ; ++p)
        heap.push(dists[p], ids ? ids[start + p] : base_id + static_cast<uint32_t>(start + p));
}

inline void admit_u16(const uint16_t* dists, uint32_t occ, const uint32_t* ids, uint32_t base_id, uint64_t start,
                      CandidateHeap<uint32_t>& heap) {
    for (uint32_t p = 0; p < occ; ++p)
        heap.push(dists[p], ids ? ids[start + p] : base_id + static_cast<uint32_t>(start + p));
}

} // namespace detail

#if defined(__AVX512BW__)

// 8-bit-indexed lookup of 16-bit values, composed from four 64-entry
// two-register word permutes selected by the top index bits (4 shuffles,
// 3 blends). idx holds 32 u16 lanes with values in [0,255]; table has 256
// entries. Equivalent to table[idx] per lane.
inline __m512i split_lookup_u16(__m512i idx, const uint16_t* table) {
    const __m512i t0 = _mm512_loadu_si512(table);
    const __m512i t1 = _mm512_loadu_si512(table + 32);
    const __m512i t2 = _mm512_loadu_si512(table + 64);
    const __m512i t3 = _mm512_loadu_si512(table + 96);
    const __m512i t4 = _mm512_loadu_si512(table + 128);
    const __m512i t5 = _mm512_loadu_si512(table + 160);
    const __m512i t6 = _mm512_loadu_si512(table + 192);
    const __m512i t7 = _mm512_loadu_si512(table + 224);
    const __m512i r0 = _mm512_permutex2var_epi16(t0, idx, t1); // entries   0..63, idx[5:0]
    const __m512i r1 = _mm512_permutex2var_epi16(t2, idx, t3); // entries  64..127
    const __m512i r2 = _mm512_permutex2var_epi16(t4, idx, t5); // entries 128..191
    const __m512i r3 = _mm512_permutex2var_epi16(t6, idx, t7); // entries 192..255
    const __mmask32 bit6 = _mm512_test_epi16_mask(idx, _mm512_set1_epi16(0x40));
    const __mmask32 bit7 = _mm512_test_epi16_mask(idx, _mm512_set1_epi16(0x80));
    const __m512i lo = _mm512_mask_blend_epi16(bit6, r0, r1);
    const __m512i hi = _mm512_mask_blend_epi16(bit6, r2, r3);
    return _mm512_mask_blend_epi16(bit7, lo, hi);
}

#endif // __AVX512BW__

#if defined(__AVX512VBMI__) && defined(__AVX512BW__)

// 8-bit-indexed lookup of 8-bit values from two 128-entry two-register byte
// permutes selected by the index MSB (2 shuffles, 1 blend). 64 lanes.
inline __m512i split_lookup_u8(__m512i idx, const uint8_t* table) {
    const __m512i t0 = _mm512_loadu_si512(table);
    const __m512i t1 = _mm512_loadu_si512(table + 64);
    const __m512i t2 = _mm512_loadu_si512(table + 128);
    const __m512i t3 = _mm512_loadu_si512(table + 192);
    const __m512i lo = _mm512_permutex2var_epi8(t0, idx, t1); // entries 0..127, idx[6:0]
    const __m512i hi = _mm512_permutex2var_epi8(t2, idx, t3); // entries 128..255
    const __mmask64 bit7 = _mm512_movepi8_mask(idx);
    return _mm512_mask_blend_epi8(bit7, lo, hi);
}

#endif // __AVX512VBMI__

#if defined(__SSSE3__)

// {4,4}: two 4-bit subcodes per byte, 16-entry tables of 8-bit distances.
// Uses the widest available byte shuffle to process 4 (AVX-512BW) or
// 2 (AVX2) rows per instruction, with a single-row SSE tail.
inline void scan_list_shuffle16x8(const PackedList& list, const PackingScheme& scheme, const QuantizedTables& qt,
                                  const uint32_t* ids, uint32_t base_id, uint32_t acc_init,
                                  CandidateHeap<uint32_t>& heap) {
    if (qt.width != 8 || scheme.word_width != 8 || scheme.group_size() != 2 || scheme.block_len != 16)
        throw config_error("shuffle16x8: scheme/tables incompatible with this kernel");
    pqscan::detail::check_scan_config(list, scheme, qt.num_subs());
    const uint32_t rows = list.rows;

    // row-major 16-byte tables: low-nibble subquantizers then high-nibble ones
    std::vector<uint8_t> tab_lo(size_t{rows} * 16), tab_hi(size_t{rows} * 16);
    for (uint32_t r = 0; r < rows; ++r) {
        std::memcpy(tab_lo.data() + r * 16, qt.t8[size_t{r} * 2].data(), 16);
        std::memcpy(tab_hi.data() + r * 16, qt.t8[size_t{r} * 2 + 1].data(), 16);
    }

    const uint8_t init8 = static_cast<uint8_t>(std::min(acc_init, 255u));
    const size_t block_bytes = list.block_bytes(scheme);

#if defined(__AVX512BW__)
    const bool use512 = SimdCaps::runtime().avx512bw;
#endif
#if defined(__AVX2__)
    const bool use256 = SimdCaps::runtime().avx2;
#endif

    for (size_t b = 0; b < list.block_count(scheme); ++b) {
        const uint8_t* block = list.data.data() + b * block_bytes;
        const uint64_t start = uint64_t{b} * 16;
        const uint32_t occ = static_cast<uint32_t>(std::min<uint64_t>(16, list.count - start));

        __m128i acc = _mm_set1_epi8(static_cast<char>(init8));
        const __m128i nib = _mm_set1_epi8(0x0F);
        uint32_t r = 0;
#if defined(__AVX512BW__)
        if (use512 && rows >= 4) {
            __m512i acc4 = _mm512_setzero_si512();
            const __m512i nib4 = _mm512_set1_epi8(0x0F);
            for (; r + 4 <= rows; r += 4) {
                const __m512i codes = _mm512_loadu_si512(block + size_t{r} * 16);
                const __m512i lo = _mm512_and_si512(codes, nib4);
                const __m512i hi = _mm512_and_si512(_mm512_srli_epi16(codes, 4), nib4);
                const __m512i tl = _mm512_loadu_si512(tab_lo.data() + size_t{r} * 16);
                const __m512i th = _mm512_loadu_si512(tab_hi.data() + size_t{r} * 16);
                const __m512i d =
                    _mm512_adds_epu8(_mm512_shuffle_epi8(tl, lo), _mm512_shuffle_epi8(th, hi));
                acc4 = _mm512_adds_epu8(acc4, d);
            }
            const __m128i x0 = _mm512_extracti32x4_epi32(acc4, 0);
            const __m128i x1 = _mm512_extracti32x4_epi32(acc4, 1);
            const __m128i x2 = _mm512_extracti32x4_epi32(acc4, 2);
            const __m128i x3 = _mm512_extracti32x4_epi32(acc4, 3);
            acc = _mm_adds_epu8(acc, _mm_adds_epu8(_mm_adds_epu8(x0, x1), _mm_adds_epu8(x2, x3)));
        }
#endif
#if defined(__AVX2__)
        if (use256 && r + 2 <= rows) {
            __m256i acc2 = _mm256_setzero_si256();
            const __m256i nib2 = _mm256_set1_epi8(0x0F);
            for (; r + 2 <= rows; r += 2) {
                const __m256i codes = _mm256_loadu_si256(reinterpret_cast<const __m256i*>(block + size_t{r} * 16));
                const __m256i lo = _mm256_and_si256(codes, nib2);
                const __m256i hi = _mm256_and_si256(_mm256_srli_epi16(codes, 4), nib2);
                const __m256i tl = _mm256_loadu_si256(reinterpret_cast<const __m256i*>(tab_lo.data() + size_t{r} * 16));
                const __m256i th = _mm256_loadu_si256(reinterpret_cast<const __m256i*>(tab_hi.data() + size_t{r} * 16));
                const __m256i d = _mm256_adds_epu8(_mm256_shuffle_epi8(tl, lo), _mm256_shuffle_epi8(th, hi));
                acc2 = _mm256_adds_epu8(acc2, d);
            }
            acc = _mm_adds_epu8(acc, _mm_adds_epu8(_mm256_castsi256_si128(acc2), _mm256_extracti128_si256(acc2, 1)));
        }
#endif
        for (; r < rows; ++r) {
            const __m128i codes = _mm_loadu_si128(reinterpret_cast<const __m128i*>(block + size_t{r} * 16));
            const __m128i lo = _mm_and_si128(codes, nib);
            const __m128i hi = _mm_and_si128(_mm_srli_epi16(codes, 4), nib);
            const __m128i tl = _mm_loadu_si128(reinterpret_cast<const __m128i*>(tab_lo.data() + size_t{r} * 16));
            const __m128i th = _mm_loadu_si128(reinterpret_cast<const __m128i*>(tab_hi.data() + size_t{r} * 16));
            acc = _mm_adds_epu8(acc, _mm_adds_epu8(_mm_shuffle_epi8(tl, lo), _mm_shuffle_epi8(th, hi)));
        }

        if (heap.full()) {
            // d <= worst  <=>  saturating d - worst == 0
            const uint8_t w8 = static_cast<uint8_t>(std::min<uint32_t>(heap.worst(), 255u));
            const __m128i over = _mm_subs_epu8(acc, _mm_set1_epi8(static_cast<char>(w8)));
            const __m128i le = _mm_cmpeq_epi8(over, _mm_setzero_si128());
            const uint32_t mask = static_cast<uint32_t>(_mm_movemask_epi8(le));
            const uint32_t occ_mask = occ >= 16 ? 0xFFFFu : ((1u << occ) - 1u);
            if ((mask & occ_mask) == 0) continue;
        }
        alignas(16) uint8_t dists[16];
        _mm_storeu_si128(reinterpret_cast<__m128i*>(dists), acc);
        detail::admit_u8(dists, occ, ids, base_id, start, heap);
    }
}

#endif // __SSSE3__

#if defined(__AVX512BW__)

namespace detail {

// prepared-table footprint per subquantizer, in u16 units
constexpr size_t prep_u16_size(unsigned w) {
    return w == 8 ? 256 : (w == 6 ? 64 : 32); // 4-bit tables are zero-padded to one register
}

} // namespace detail

// 16-bit-word families: any group pattern of 4/5/6-bit widths (word permutes)
// or 8-bit widths (split tables) summing to 16 bits. One row of 32 packed
// words is unpacked with compile-time shifts and masks; each subquantizer's
// lookup picks vpermw, vpermi2w, or a split lookup by its width.
template <unsigned... Ws>
void scan_list_words16(const PackedList& list, const PackingScheme& scheme, const QuantizedTables& qt,
                       const uint32_t* ids, uint32_t base_id, uint32_t acc_init, CandidateHeap<uint32_t>& heap) {
    constexpr size_t G = sizeof...(Ws);
    static constexpr std::array<unsigned, G> ws{Ws...};
    static_assert(((Ws <= 6 || Ws == 8) && ...), "widths must be <= 6 or exactly 8");
    static_assert((Ws + ...) == 16 || (Ws + ...) == 15, "group widths must pack one 16-bit word");
    [[maybe_unused]] static constexpr auto offs = [] {
        std::array<unsigned, G> o{};
        unsigned c = 0;
        for (size_t i = 0; i < G; ++i) {
            o[i] = c;
            c += ws[i];
        }
        return o;
    }();
    static constexpr auto reg_off = [] {
        std::array<size_t, G> o{};
        size_t c = 0;
        for (size_t i = 0; i < G; ++i) {
            o[i] = c;
            c += detail::prep_u16_size(ws[i]);
        }
        return o;
    }();
    constexpr size_t group_u16 = (detail::prep_u16_size(Ws) + ...);

    if (qt.width != 16 || scheme.word_width != 16 || scheme.block_len != 32 || scheme.group_size() != G)
        throw config_error("words16 kernel: scheme/tables incompatible");
    for (size_t s = 0; s < G; ++s)
        if (scheme.widths[s] != ws[s]) throw config_error("words16 kernel: width pattern mismatch");
    pqscan::detail::check_scan_config(list, scheme, qt.num_subs());
    const uint32_t rows = list.rows;

    std::vector<uint16_t> prep(size_t{rows} * group_u16, 0);
    for (uint32_t r = 0; r < rows; ++r)
        for (size_t s = 0; s < G; ++s) {
            const auto& t = qt.t16[size_t{r} * G + s];
            std::copy(t.begin(), t.end(), prep.begin() + r * group_u16 + reg_off[s]);
        }

    const uint16_t init16 = static_cast<uint16_t>(std::min(acc_init, 65535u));
    const size_t block_bytes = list.block_bytes(scheme);

    for (size_t b = 0; b < list.block_count(scheme); ++b) {
        const uint8_t* block = list.data.data() + b * block_bytes;
        const uint64_t start = uint64_t{b} * 32;
        const uint32_t occ = static_cast<uint32_t>(std::min<uint64_t>(32, list.count - start));

        __m512i acc = _mm512_set1_epi16(static_cast<short>(init16));
        for (uint32_t r = 0; r < rows; ++r) {
            const __m512i w = _mm512_loadu_si512(block + size_t{r} * 64);
            const uint16_t* gtab = prep.data() + size_t{r} * group_u16;
            detail::unroll<G>([&]<size_t S>() {
                constexpr unsigned W = ws[S];
                constexpr unsigned OFF = offs[S];
                const __m512i idx =
                    _mm512_and_si512(_mm512_srli_epi16(w, OFF), _mm512_set1_epi16((1 << W) - 1));
                __m512i d;
                if constexpr (W == 8) {
                    d = split_lookup_u16(idx, gtab + reg_off[S]);
                } else if constexpr (W == 6) {
                    const __m512i t0 = _mm512_loadu_si512(gtab + reg_off[S]);
                    const __m512i t1 = _mm512_loadu_si512(gtab + reg_off[S] + 32);
                    d = _mm512_permutex2var_epi16(t0, idx, t1);
                } else {
                    d = _mm512_permutexvar_epi16(idx, _mm512_loadu_si512(gtab + reg_off[S]));
                }
                acc = _mm512_adds_epu16(acc, d);
            });
        }

        if (heap.full()) {
            const uint16_t w16 = static_cast<uint16_t>(std::min<uint32_t>(heap.worst(), 65535u));
            const __mmask32 le = _mm512_cmple_epu16_mask(acc, _mm512_set1_epi16(static_cast<short>(w16)));
            const uint32_t occ_mask = occ >= 32 ? 0xFFFFFFFFu : ((1u << occ) - 1u);
            if ((static_cast<uint32_t>(le) & occ_mask) == 0) continue;
        }
        alignas(64) uint16_t dists[32];
        _mm512_storeu_si512(dists, acc);
        detail::admit_u16(dists, occ, ids, base_id, start, heap);
    }
}

#endif // __AVX512BW__

#if defined(__AVX512VBMI__) && defined(__AVX512BW__)

// {8}: one 8-bit subcode per byte, 8-bit distances, blocks of 64 codes.
inline void scan_list_split8(const PackedList& list, const PackingScheme& scheme, const QuantizedTables& qt,
                             const uint32_t* ids, uint32_t base_id, uint32_t acc_init,
                             CandidateHeap<uint32_t>& heap) {
    if (qt.width != 8 || scheme.word_width != 8 || scheme.group_size() != 1 || scheme.block_len != 64)
        throw config_error("split_table8: scheme/tables incompatible with this kernel");
    pqscan::detail::check_scan_config(list, scheme, qt.num_subs());
    const uint32_t rows = list.rows;

    std::vector<uint8_t> prep(size_t{rows} * 256);
    for (uint32_t r = 0; r < rows; ++r) std::memcpy(prep.data() + size_t{r} * 256, qt.t8[r].data(), 256);

    const uint8_t init8 = static_cast<uint8_t>(std::min(acc_init, 255u));
    const size_t block_bytes = list.block_bytes(scheme);

    for (size_t b = 0; b < list.block_count(scheme); ++b) {
        const uint8_t* block = list.data.data() + b * block_bytes;
        const uint64_t start = uint64_t{b} * 64;
        const uint32_t occ = static_cast<uint32_t>(std::min<uint64_t>(64, list.count - start));

        __m512i acc = _mm512_set1_epi8(static_cast<char>(init8));
        for (uint32_t r = 0; r < rows; ++r) {
            const __m512i idx = _mm512_loadu_si512(block + size_t{r} * 64);
            acc = _mm512_adds_epu8(acc, split_lookup_u8(idx, prep.data() + size_t{r} * 256));
        }

        if (heap.full()) {
            const uint8_t w8 = static_cast<uint8_t>(std::min<uint32_t>(heap.worst(), 255u));
            const __mmask64 le = _mm512_cmple_epu8_mask(acc, _mm512_set1_epi8(static_cast<char>(w8)));
            const uint64_t occ_mask = occ >= 64 ? ~0ull : ((1ull << occ) - 1ull);
            if ((static_cast<uint64_t>(le) & occ_mask) == 0) continue;
        }
        alignas(64) uint8_t dists[64];
        _mm512_storeu_si512(dists, acc);
        detail::admit_u8(dists, occ, ids, base_id, start, heap);
    }
}

#endif // __AVX512VBMI__

} // namespace simd
} // namespace pqscan
