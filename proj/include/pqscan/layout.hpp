#pragma once

#include <cstdint>
#include <cstring>
#include <span>
#include <vector>

#include "pqscan/codebook.hpp"
#include "pqscan/errors.hpp"
#include "pqscan/pqspec.hpp"

namespace pqscan {

// How subcodes are packed into bytes or words and how many codes form one
// transposed block. The block length follows the kernel family that scans the
// layout: 16 codes for byte-wide nibble shuffles, 32 for 16-bit word permutes,
// 64 for byte permutes.
struct PackingScheme {
    uint32_t word_width = 0; // bits, 8 or 16
    uint32_t block_len = 0;  // codes per block
    std::vector<uint8_t> widths;  // group pattern, packing order
    std::vector<uint8_t> offsets; // bit offset of each subcode, LSB-first

    uint32_t word_bytes() const { return word_width / 8; }
    size_t group_size() const { return widths.size(); }

    static PackingScheme for_spec(const PqSpec& spec) {
        PackingScheme s;
        s.word_width = spec.word_width();
        s.widths = spec.group_pattern();
        s.offsets.resize(s.widths.size());
        uint8_t off = 0;
        for (size_t i = 0; i < s.widths.size(); ++i) {
            s.offsets[i] = off;
            off = static_cast<uint8_t>(off + s.widths[i]);
        }
        if (s.word_width == 16) {
            s.block_len = 32;
        } else {
            s.block_len = (s.widths.size() == 1) ? 64 : 16;
        }
        return s;
    }

    bool operator==(const PackingScheme&) const = default;
};

// First subcode in the least-significant bits, later subcodes stacked toward
// the MSB. Bit-exact and invertible.
inline uint16_t pack_group(std::span<const uint8_t> sub_indices, const PackingScheme& scheme) {
    if (sub_indices.size() != scheme.group_size()) throw corruption_error("pack_group: wrong subcode count");
    uint16_t word = 0;
    for (size_t i = 0; i < sub_indices.size(); ++i) {
        if (sub_indices[i] >= (1u << scheme.widths[i]))
            throw corruption_error("pack_group: index " + std::to_string(sub_indices[i]) + " exceeds " +
                                   std::to_string(scheme.widths[i]) + " bits");
        word = static_cast<uint16_t>(word | (uint16_t{sub_indices[i]} << scheme.offsets[i]));
    }
    return word;
}

inline std::vector<uint8_t> unpack_group(uint16_t word, const PackingScheme& scheme) {
    std::vector<uint8_t> out(scheme.group_size());
    for (size_t i = 0; i < out.size(); ++i)
        out[i] = static_cast<uint8_t>((word >> scheme.offsets[i]) & ((1u << scheme.widths[i]) - 1u));
    return out;
}

// A transposed block: row r holds the packed group-r words of block_len codes,
// rows contiguous in row order. Tail blocks are padded with all-ones words and
// carry an explicit occupancy; the scan kernels mask out slots past occupancy.
struct PackedBlock {
    uint32_t rows = 0;
    uint32_t block_len = 0;
    uint32_t word_bytes = 0;
    uint32_t occupancy = 0;
    std::vector<uint8_t> data; // rows * block_len * word_bytes

    size_t byte_size() const { return size_t{rows} * block_len * word_bytes; }

    uint16_t word(size_t row, size_t pos) const {
        const uint8_t* p = data.data() + (row * block_len + pos) * word_bytes;
        if (word_bytes == 1) return *p;
        uint16_t w;
        std::memcpy(&w, p, 2);
        return w;
    }
    void set_word(size_t row, size_t pos, uint16_t w) {
        uint8_t* p = data.data() + (row * block_len + pos) * word_bytes;
        if (word_bytes == 1) {
            *p = static_cast<uint8_t>(w);
        } else {
            std::memcpy(p, &w, 2);
        }
    }
};

inline PackedBlock transpose_block(std::span<const Code> codes, const PackingScheme& scheme) {
    if (codes.empty()) throw input_error("transpose_block: empty input");
    if (codes.size() > scheme.block_len) throw input_error("transpose_block: more codes than block_len");
    const size_t g = scheme.group_size();
    if (codes.front().size() % g != 0) throw corruption_error("transpose_block: code length not a multiple of g");
    const size_t rows = codes.front().size() / g;

    PackedBlock b;
    b.rows = static_cast<uint32_t>(rows);
    b.block_len = scheme.block_len;
    b.word_bytes = scheme.word_bytes();
    b.occupancy = static_cast<uint32_t>(codes.size());
    b.data.assign(b.byte_size(), 0xFF); // padding slots stay all-ones
    for (size_t p = 0; p < codes.size(); ++p) {
        if (codes[p].size() != rows * g) throw corruption_error("transpose_block: ragged codes");
        for (size_t r = 0; r < rows; ++r)
            b.set_word(r, p, pack_group({codes[p].data() + r * g, g}, scheme));
    }
    return b;
}

// Inverse of transpose_block; padding slots are ignored.
inline std::vector<Code> untranspose_block(const PackedBlock& block, const PackingScheme& scheme) {
    std::vector<Code> codes(block.occupancy);
    const size_t g = scheme.group_size();
    for (size_t p = 0; p < block.occupancy; ++p) {
        codes[p].resize(block.rows * g);
        for (size_t r = 0; r < block.rows; ++r) {
            auto subs = unpack_group(block.word(r, p), scheme);
            std::copy(subs.begin(), subs.end(), codes[p].begin() + r * g);
        }
    }
    return codes;
}

// A sequence of packed blocks storing `count` codes; every block is full
// except possibly the last. This is the scan unit for one inverted list.
struct PackedList {
    uint64_t count = 0;
    uint32_t rows = 0;
    std::vector<uint8_t> data;

    size_t block_count(const PackingScheme& s) const {
        return count == 0 ? 0 : (count + s.block_len - 1) / s.block_len;
    }
    size_t block_bytes(const PackingScheme& s) const { return size_t{rows} * s.block_len * s.word_bytes(); }
};

inline PackedList pack_list(std::span<const Code> codes, const PackingScheme& scheme) {
    PackedList list;
    list.count = codes.size();
    if (codes.empty()) return list;
    list.rows = static_cast<uint32_t>(codes.front().size() / scheme.group_size());
    const size_t bb = list.block_bytes(scheme);
    list.data.reserve(list.block_count(scheme) * bb);
    for (size_t start = 0; start < codes.size(); start += scheme.block_len) {
        const size_t n = std::min<size_t>(scheme.block_len, codes.size() - start);
        PackedBlock b = transpose_block(codes.subspan(start, n), scheme);
        list.data.insert(list.data.end(), b.data.begin(), b.data.end());
    }
    return list;
}

inline std::vector<Code> unpack_list(const PackedList& list, const PackingScheme& scheme) {
    std::vector<Code> codes;
    codes.reserve(list.count);
    const size_t bb = list.block_bytes(scheme);
    for (size_t b = 0; b < list.block_count(scheme); ++b) {
        PackedBlock blk;
        blk.rows = list.rows;
        blk.block_len = scheme.block_len;
        blk.word_bytes = scheme.word_bytes();
        blk.occupancy = static_cast<uint32_t>(std::min<uint64_t>(scheme.block_len, list.count - b * scheme.block_len));
        blk.data.assign(list.data.begin() + b * bb, list.data.begin() + (b + 1) * bb);
        auto part = untranspose_block(blk, scheme);
        codes.insert(codes.end(), part.begin(), part.end());
    }
    return codes;
}

} // namespace pqscan
