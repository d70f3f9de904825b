#pragma once

#include <algorithm>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "pqscan/errors.hpp"
#include "pqscan/pqspec.hpp"
#include "pqscan/simd/caps.hpp"
#include "pqscan/simd/scan_scalar.hpp"
#include "pqscan/simd/scan_x86.hpp"

namespace pqscan {

enum class KernelFamily {
    scalar_float,     // float tables, no quantization; the recall reference
    scalar_quantized, // normative integer semantics; always available
    shuffle16x8,      // 4-bit lookups, 8-bit distances
    permute32x16,     // 4/5/6-bit lookups, 16-bit distances
    split_table16,    // 8-bit lookups from four word permutes + three blends, 16-bit distances
    split_table8,     // 8-bit lookups from two byte permutes + one blend, 8-bit distances
};

constexpr KernelFamily kAllKernelFamilies[] = {
    KernelFamily::scalar_float,  KernelFamily::scalar_quantized, KernelFamily::shuffle16x8,
    KernelFamily::permute32x16,  KernelFamily::split_table16,    KernelFamily::split_table8,
};

inline const char* to_string(KernelFamily f) {
    switch (f) {
    case KernelFamily::scalar_float: return "scalar-float";
    case KernelFamily::scalar_quantized: return "scalar-quantized";
    case KernelFamily::shuffle16x8: return "shuffle16x8";
    case KernelFamily::permute32x16: return "permute32x16";
    case KernelFamily::split_table16: return "split-table-16";
    case KernelFamily::split_table8: return "split-table-8";
    }
    return "?";
}

inline std::optional<KernelFamily> kernel_from_string(std::string_view s) {
    for (KernelFamily f : kAllKernelFamilies)
        if (s == to_string(f)) return f;
    return std::nullopt;
}

using QuantizedScanFn = void (*)(const PackedList&, const PackingScheme&, const QuantizedTables&, const uint32_t*,
                                 uint32_t, uint32_t, CandidateHeap<uint32_t>&);

namespace detail {

struct Words16Entry {
    std::vector<uint8_t> pattern;
    QuantizedScanFn fn;
};

// Registered 16-bit-word shapes; adding a shape is one line here.
inline const std::vector<Words16Entry>& words16_registry() {
#if defined(__AVX512BW__)
    static const std::vector<Words16Entry> reg = {
        {{6, 6, 4}, &simd::scan_list_words16<6, 6, 4>},
        {{6, 5, 5}, &simd::scan_list_words16<6, 5, 5>},
        {{5, 5, 5}, &simd::scan_list_words16<5, 5, 5>},
        {{4, 4, 4, 4}, &simd::scan_list_words16<4, 4, 4, 4>},
        {{8, 8}, &simd::scan_list_words16<8, 8>},
    };
#else
    static const std::vector<Words16Entry> reg;
#endif
    return reg;
}

inline QuantizedScanFn words16_lookup(const std::vector<uint8_t>& pattern) {
    for (const auto& e : words16_registry())
        if (e.pattern == pattern) return e.fn;
    return nullptr;
}

} // namespace detail

// The vector family this spec's layout belongs to, independent of host support.
// nullopt when only the scalar kernels apply.
inline std::optional<KernelFamily> natural_vector_family(const PqSpec& spec) {
    const auto& pat = spec.group_pattern();
    if (spec.word_width() == 8) {
        if (pat.size() == 1 && pat[0] == 8) return KernelFamily::split_table8;
        if (pat.size() == 2 && pat[0] == 4 && pat[1] == 4) return KernelFamily::shuffle16x8;
        return std::nullopt;
    }
    if (!detail::words16_lookup(pat)) return std::nullopt;
    for (uint8_t w : pat)
        if (w == 8) return KernelFamily::split_table16;
    return KernelFamily::permute32x16;
}

inline bool family_available(KernelFamily f, const SimdCaps& caps) {
    switch (f) {
    case KernelFamily::scalar_float:
    case KernelFamily::scalar_quantized: return true;
    case KernelFamily::shuffle16x8: return caps.ssse3;
    case KernelFamily::permute32x16:
    case KernelFamily::split_table16: return caps.avx512bw;
    case KernelFamily::split_table8: return caps.avx512vbmi;
    }
    return false;
}

// Best family for the spec under the given capabilities. Deterministic;
// scalar-quantized is always a valid answer. Forcing a vector family that the
// spec or host cannot satisfy is a configuration error; forcing a scalar
// family always succeeds.
inline KernelFamily select_kernel(const PqSpec& spec, const SimdCaps& caps,
                                  std::optional<KernelFamily> forced = std::nullopt) {
    if (forced) {
        if (*forced == KernelFamily::scalar_float || *forced == KernelFamily::scalar_quantized) return *forced;
        auto nat = natural_vector_family(spec);
        if (!nat || *nat != *forced)
            throw config_error(std::string("kernel ") + to_string(*forced) + " does not support spec " +
                               spec.to_string());
        if (!family_available(*forced, caps))
            throw config_error(std::string("kernel ") + to_string(*forced) + " is not available on this host");
        return *forced;
    }
    auto nat = natural_vector_family(spec);
    if (nat && family_available(*nat, caps)) return *nat;
    return KernelFamily::scalar_quantized;
}

// Scan routine for a quantized family; nullptr only for scalar_float (which
// scans float tables and has its own entry point).
inline QuantizedScanFn quantized_scan_fn(const PqSpec& spec, KernelFamily f) {
    switch (f) {
    case KernelFamily::scalar_float: return nullptr;
    case KernelFamily::scalar_quantized: return &scan_list_scalar_quantized;
    case KernelFamily::shuffle16x8:
#if defined(__SSSE3__)
        return &simd::scan_list_shuffle16x8;
#else
        return nullptr;
#endif
    case KernelFamily::permute32x16:
    case KernelFamily::split_table16: return detail::words16_lookup(spec.group_pattern());
    case KernelFamily::split_table8:
#if defined(__AVX512VBMI__) && defined(__AVX512BW__)
        return &simd::scan_list_split8;
#else
        return nullptr;
#endif
    }
    return nullptr;
}

} // namespace pqscan
