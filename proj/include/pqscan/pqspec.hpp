#pragma once

#include <charconv>
#include <cstdint>
#include <numeric>
#include <string>
#include <string_view>
#include <vector>

#include "pqscan/errors.hpp"

namespace pqscan {

// One group pattern plus the subquantizer count, as written "12x{6,6,4}":
// m subquantizers, grouped g at a time, each group packing into one byte or word.
struct SpecPattern {
    uint32_t m = 0;
    std::vector<uint8_t> widths; // bit widths of one group, in packing order

    bool operator==(const SpecPattern&) const = default;
};

// Grammar: <m>x{<w>(,<w>)*}
inline SpecPattern parse_spec_string(std::string_view text) {
    auto fail = [&](const char* why) -> SpecPattern {
        throw invalid_spec_error("bad spec string '" + std::string(text) + "': " + why +
                                 " (expected <m>x{<w>(,<w>)*}, e.g. 16x{4,4}, 12x{6,6,4}, 8x{8,8}, 8x{8})");
    };
    SpecPattern p;
    size_t xpos = text.find('x');
    if (xpos == std::string_view::npos || xpos == 0) return fail("missing 'x'");
    auto mstr = text.substr(0, xpos);
    auto [mp, mec] = std::from_chars(mstr.data(), mstr.data() + mstr.size(), p.m);
    if (mec != std::errc{} || mp != mstr.data() + mstr.size() || p.m == 0) return fail("bad subquantizer count");
    auto rest = text.substr(xpos + 1);
    if (rest.size() < 3 || rest.front() != '{' || rest.back() != '}') return fail("missing {...}");
    rest = rest.substr(1, rest.size() - 2);
    while (!rest.empty()) {
        size_t comma = rest.find(',');
        auto tok = rest.substr(0, comma);
        unsigned w = 0;
        auto [wp, wec] = std::from_chars(tok.data(), tok.data() + tok.size(), w);
        if (wec != std::errc{} || wp != tok.data() + tok.size()) return fail("bad width");
        if (w < 1 || w > 8) return fail("widths must be in [1,8]");
        p.widths.push_back(static_cast<uint8_t>(w));
        if (comma == std::string_view::npos) break;
        rest = rest.substr(comma + 1);
        if (rest.empty()) return fail("trailing comma");
    }
    if (p.widths.empty()) return fail("empty width list");
    return p;
}

inline std::string to_string(const SpecPattern& p) {
    std::string s = std::to_string(p.m) + "x{";
    for (size_t i = 0; i < p.widths.size(); ++i) {
        if (i) s += ',';
        s += std::to_string(static_cast<unsigned>(p.widths[i]));
    }
    s += '}';
    return s;
}

// The (possibly irregular) product-quantizer structure: per-subquantizer bit
// widths arranged in groups that each pack into an 8- or 16-bit word, plus the
// per-subquantizer allocation of input dimensions.
class PqSpec {
public:
    PqSpec() = default;

    uint32_t total_dims() const { return total_dims_; }
    size_t num_subs() const { return size_t{group_size_} * num_groups_; } // m
    size_t group_size() const { return group_size_; }                    // g
    size_t num_groups() const { return num_groups_; }                    // m/g
    uint32_t word_width() const { return word_width_; }                  // 8 or 16 bits
    uint32_t code_bits() const { return static_cast<uint32_t>(num_groups_) * word_width_; }

    uint8_t bits(size_t sub) const { return pattern_[sub % group_size_]; }
    uint32_t centroid_count(size_t sub) const { return 1u << bits(sub); }
    uint32_t max_centroid_count() const {
        uint32_t k = 0;
        for (size_t j = 0; j < num_subs(); ++j) k = std::max(k, centroid_count(j));
        return k;
    }

    const std::vector<uint8_t>& group_pattern() const { return pattern_; }
    // ordered list of groups, as repeated pattern
    std::vector<std::vector<uint8_t>> groups() const {
        return std::vector<std::vector<uint8_t>>(num_groups_, std::vector<uint8_t>(pattern_.begin(), pattern_.end()));
    }

    uint32_t dim_alloc(size_t sub) const { return dim_alloc_[sub]; }
    uint32_t dim_offset(size_t sub) const { return dim_offset_[sub]; }
    const std::vector<uint32_t>& dim_allocation() const { return dim_alloc_; }

    // False when the proportional split did not come out integral and leftover
    // dimensions were distributed one by one; callers should surface a warning.
    bool exact_allocation() const { return exact_alloc_; }
    SpecPattern pattern() const { return SpecPattern{static_cast<uint32_t>(num_subs()), pattern_}; }
    std::string to_string() const { return pqscan::to_string(pattern()); }

    bool operator==(const PqSpec&) const = default;

    friend PqSpec allocate_dims(uint32_t total_dims, const SpecPattern& pattern);

private:
    uint32_t total_dims_ = 0;
    uint32_t word_width_ = 0;
    uint32_t group_size_ = 0;
    uint32_t num_groups_ = 0;
    std::vector<uint8_t> pattern_;
    std::vector<uint32_t> dim_alloc_;
    std::vector<uint32_t> dim_offset_;
    bool exact_alloc_ = true;
};

// Builds a PqSpec from a group pattern, mapping input dimensions to
// subquantizers proportionally to their bit widths. When the proportional
// split is not integral, the base allocation is rounded down and leftover
// dimensions are handed out one per subquantizer in order.
inline PqSpec allocate_dims(uint32_t total_dims, const SpecPattern& pattern) {
    const size_t g = pattern.widths.size();
    if (g == 0 || pattern.m == 0) throw invalid_spec_error("empty spec");
    if (pattern.m % g != 0)
        throw invalid_spec_error("subquantizer count " + std::to_string(pattern.m) +
                                 " is not a multiple of the group size " + std::to_string(g));
    uint32_t sum = 0;
    for (uint8_t w : pattern.widths) sum += w;
    // 15 is the padded triple-5 word: three 5-bit subcodes and one unused bit
    if (sum != 8 && sum != 16 && sum != 15)
        throw invalid_spec_error("group bit widths of " + to_string(pattern) + " sum to " + std::to_string(sum) +
                                 "; supported packings are 8-bit bytes (e.g. {4,4}, {8}) and 16-bit words "
                                 "(e.g. {6,6,4}, {6,5,5}, {5,5,5}, {8,8})");
    if (total_dims < pattern.m)
        throw invalid_spec_error("cannot split " + std::to_string(total_dims) + " dimensions across " +
                                 std::to_string(pattern.m) + " subquantizers");

    PqSpec s;
    s.total_dims_ = total_dims;
    s.word_width_ = (sum <= 8) ? 8 : 16;
    s.group_size_ = static_cast<uint32_t>(g);
    s.num_groups_ = pattern.m / static_cast<uint32_t>(g);
    s.pattern_ = pattern.widths;

    const size_t m = pattern.m;
    const uint64_t total_bits = uint64_t{sum} * s.num_groups_;
    s.dim_alloc_.resize(m);
    uint64_t assigned = 0;
    for (size_t j = 0; j < m; ++j) {
        uint8_t w = pattern.widths[j % g];
        s.dim_alloc_[j] = static_cast<uint32_t>(uint64_t{total_dims} * w / total_bits);
        assigned += s.dim_alloc_[j];
    }
    uint64_t leftover = total_dims - assigned;
    s.exact_alloc_ = (leftover == 0);
    for (size_t j = 0; leftover > 0; j = (j + 1) % m, --leftover) s.dim_alloc_[j] += 1;
    for (auto a : s.dim_alloc_)
        if (a == 0) throw invalid_spec_error("dimension allocation left a subquantizer empty");

    s.dim_offset_.resize(m);
    uint32_t off = 0;
    for (size_t j = 0; j < m; ++j) {
        s.dim_offset_[j] = off;
        off += s.dim_alloc_[j];
    }
    return s;
}

inline PqSpec allocate_dims(uint32_t total_dims, std::string_view spec_string) {
    return allocate_dims(total_dims, parse_spec_string(spec_string));
}

} // namespace pqscan
