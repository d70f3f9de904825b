#pragma once

#include <cstdint>
#include <cstring>
#include <vector>

#include "pqscan/distance.hpp"
#include "pqscan/errors.hpp"
#include "pqscan/heap.hpp"
#include "pqscan/layout.hpp"

namespace pqscan {

namespace detail {

inline uint16_t load_word(const uint8_t* p, uint32_t word_bytes) {
    if (word_bytes == 1) return *p;
    uint16_t w;
    std::memcpy(&w, p, 2);
    return w;
}

inline void check_scan_config(const PackedList& list, const PackingScheme& scheme, size_t table_subs) {
    if (list.count == 0) return;
    if (size_t{list.rows} * scheme.group_size() != table_subs)
        throw config_error("scan: packed rows do not match the table count for this scheme");
}

} // namespace detail

// Normative quantized scan: unpack every group word, look up, saturating-add
// at table width, and push occupied slots into the heap. All vector kernels
// must mutate the heap exactly like this routine.
inline void scan_list_scalar_quantized(const PackedList& list, const PackingScheme& scheme,
                                       const QuantizedTables& qt, const uint32_t* ids, uint32_t base_id,
                                       uint32_t acc_init, CandidateHeap<uint32_t>& heap) {
    detail::check_scan_config(list, scheme, qt.num_subs());
    if (qt.width != scheme.word_width)
        throw config_error("scan: table width does not match the packing word width");
    const uint32_t q_max = qt.q_max();
    const uint32_t init = std::min(acc_init, q_max);
    const size_t g = scheme.group_size();
    const uint32_t wb = scheme.word_bytes();
    const size_t row_bytes = size_t{scheme.block_len} * wb;
    const size_t block_bytes = list.block_bytes(scheme);

    for (size_t b = 0; b < list.block_count(scheme); ++b) {
        const uint8_t* block = list.data.data() + b * block_bytes;
        const uint64_t start = uint64_t{b} * scheme.block_len;
        const uint32_t occ = static_cast<uint32_t>(std::min<uint64_t>(scheme.block_len, list.count - start));
        for (uint32_t p = 0; p < occ; ++p) {
            uint32_t acc = init;
            for (uint32_t r = 0; r < list.rows; ++r) {
                const uint16_t w = detail::load_word(block + r * row_bytes + size_t{p} * wb, wb);
                for (size_t s = 0; s < g; ++s) {
                    const uint32_t idx = (w >> scheme.offsets[s]) & ((1u << scheme.widths[s]) - 1u);
                    acc = saturating_add(acc, qt.entry(r * g + s, idx), q_max);
                }
            }
            const uint32_t id = ids ? ids[start + p] : base_id + static_cast<uint32_t>(start + p);
            heap.push(acc, id);
        }
    }
}

// Float reference scan over the same packed layout.
inline void scan_list_scalar_float(const PackedList& list, const PackingScheme& scheme, const DistanceTables& dt,
                                   const uint32_t* ids, uint32_t base_id, CandidateHeap<float>& heap) {
    detail::check_scan_config(list, scheme, dt.tables.size());
    const size_t g = scheme.group_size();
    const uint32_t wb = scheme.word_bytes();
    const size_t row_bytes = size_t{scheme.block_len} * wb;
    const size_t block_bytes = list.block_bytes(scheme);

    for (size_t b = 0; b < list.block_count(scheme); ++b) {
        const uint8_t* block = list.data.data() + b * block_bytes;
        const uint64_t start = uint64_t{b} * scheme.block_len;
        const uint32_t occ = static_cast<uint32_t>(std::min<uint64_t>(scheme.block_len, list.count - start));
        for (uint32_t p = 0; p < occ; ++p) {
            float acc = 0.0f;
            for (uint32_t r = 0; r < list.rows; ++r) {
                const uint16_t w = detail::load_word(block + r * row_bytes + size_t{p} * wb, wb);
                for (size_t s = 0; s < g; ++s) {
                    const uint32_t idx = (w >> scheme.offsets[s]) & ((1u << scheme.widths[s]) - 1u);
                    acc += dt.tables[r * g + s][idx];
                }
            }
            const uint32_t id = ids ? ids[start + p] : base_id + static_cast<uint32_t>(start + p);
            heap.push(acc, id);
        }
    }
}

// Float distances of the first `limit` codes in scan order, for calibration.
// Returns how many were appended.
inline size_t collect_prefix_float(const PackedList& list, const PackingScheme& scheme, const DistanceTables& dt,
                                   size_t limit, std::vector<float>& out) {
    detail::check_scan_config(list, scheme, dt.tables.size());
    const size_t g = scheme.group_size();
    const uint32_t wb = scheme.word_bytes();
    const size_t row_bytes = size_t{scheme.block_len} * wb;
    const size_t block_bytes = list.block_bytes(scheme);
    size_t taken = 0;

    for (size_t b = 0; b < list.block_count(scheme) && taken < limit; ++b) {
        const uint8_t* block = list.data.data() + b * block_bytes;
        const uint64_t start = uint64_t{b} * scheme.block_len;
        const uint32_t occ = static_cast<uint32_t>(std::min<uint64_t>(scheme.block_len, list.count - start));
        for (uint32_t p = 0; p < occ && taken < limit; ++p, ++taken) {
            float acc = 0.0f;
            for (uint32_t r = 0; r < list.rows; ++r) {
                const uint16_t w = detail::load_word(block + r * row_bytes + size_t{p} * wb, wb);
                for (size_t s = 0; s < g; ++s) {
                    const uint32_t idx = (w >> scheme.offsets[s]) & ((1u << scheme.widths[s]) - 1u);
                    acc += dt.tables[r * g + s][idx];
                }
            }
            out.push_back(acc);
        }
    }
    return taken;
}

} // namespace pqscan
