#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <vector>

#include "pqscan/codebook.hpp"
#include "pqscan/errors.hpp"
#include "pqscan/pqspec.hpp"

namespace pqscan {

// Per-subquantizer squared partial distances between a (residual) query and
// every centroid.
struct DistanceTables {
    std::vector<std::vector<float>> tables; // per sub: 2^bits entries
    std::vector<float> query_residual;      // the z' these were built from, kept for diagnostics

    float min_of(size_t sub) const {
        float m = std::numeric_limits<float>::infinity();
        for (float v : tables[sub]) m = std::min(m, v);
        return m;
    }
    // Sum of per-table minima: the smallest representable total distance.
    float min_total() const {
        float s = 0.0f;
        for (size_t j = 0; j < tables.size(); ++j) s += min_of(j);
        return s;
    }
};

inline DistanceTables compute_tables(std::span<const float> query_residual, const Codebook& cb) {
    const PqSpec& spec = cb.spec();
    if (query_residual.size() != spec.total_dims()) throw input_error("compute_tables: query has wrong dimension");
    DistanceTables dt;
    dt.query_residual.assign(query_residual.begin(), query_residual.end());
    dt.tables.resize(spec.num_subs());
    for (size_t j = 0; j < spec.num_subs(); ++j) {
        const uint32_t dsub = spec.dim_alloc(j);
        const float* q = query_residual.data() + spec.dim_offset(j);
        const uint32_t k = spec.centroid_count(j);
        dt.tables[j].resize(k);
        const float* tab = cb.sub_table(j).data();
        for (uint32_t i = 0; i < k; ++i) {
            const float* c = tab + size_t{i} * dsub;
            float acc = 0.0f;
            for (uint32_t t = 0; t < dsub; ++t) {
                float d = q[t] - c[t];
                acc += d * d;
            }
            dt.tables[j][i] = acc;
        }
    }
    return dt;
}

// adc(z,c) = sum_j D^j[c[j]], summed in table order.
inline float adc_scalar_float(const Code& code, const DistanceTables& dt) {
    if (code.size() != dt.tables.size()) throw corruption_error("adc: code/tables size mismatch");
    float acc = 0.0f;
    for (size_t j = 0; j < code.size(); ++j) {
        if (code[j] >= dt.tables[j].size()) throw corruption_error("adc: code index out of table range");
        acc += dt.tables[j][code[j]];
    }
    return acc;
}

// d_min is the sum of per-table minima; d_max is the distance of the R-th
// nearest candidate among the first t scanned, the farthest distance worth
// representing exactly.
inline std::pair<float, float> calibrate_bounds(const DistanceTables& dt, std::span<const float> scan_prefix,
                                                uint32_t r) {
    if (r == 0) throw calibration_error("calibrate_bounds: R must be at least 1");
    if (scan_prefix.size() < r)
        throw calibration_error("calibrate_bounds: prefix of " + std::to_string(scan_prefix.size()) +
                                " distances is shorter than R=" + std::to_string(r));
    std::vector<float> tmp(scan_prefix.begin(), scan_prefix.end());
    std::nth_element(tmp.begin(), tmp.begin() + (r - 1), tmp.end());
    return {dt.min_total(), tmp[r - 1]};
}

// Integer-quantized tables with saturation-as-infinity semantics: an entry or
// accumulated sum equal to q_max means "at least d_max, irrelevant to top-R".
struct QuantizedTables {
    uint32_t width = 16; // 8 or 16
    float delta = 0.0f;  // bin size (d_max - d_min) / q_max
    float d_min = 0.0f;  // sum of this table set's own per-table minima
    std::vector<float> p_min;
    std::vector<std::vector<uint8_t>> t8;
    std::vector<std::vector<uint16_t>> t16;

    uint32_t q_max() const { return width == 8 ? 255u : 65535u; }
    size_t num_subs() const { return width == 8 ? t8.size() : t16.size(); }
    uint32_t entry(size_t sub, size_t idx) const { return width == 8 ? t8[sub][idx] : t16[sub][idx]; }
};

// q = floor((p - p_min(i)) / delta), clamped to q_max. The degenerate
// d_max == d_min case maps entries equal to p_min(i) to 0 and the rest to q_max.
inline QuantizedTables quantize_tables(const DistanceTables& dt, float d_min, float d_max, uint32_t width) {
    if (width != 8 && width != 16) throw config_error("quantize_tables: width must be 8 or 16");
    if (!(d_max >= d_min)) throw calibration_error("quantize_tables: d_max < d_min");
    QuantizedTables qt;
    qt.width = width;
    const uint32_t q_max = qt.q_max();
    qt.delta = (d_max - d_min) / static_cast<float>(q_max);
    qt.p_min.resize(dt.tables.size());
    float own_min = 0.0f;
    for (size_t j = 0; j < dt.tables.size(); ++j) {
        qt.p_min[j] = dt.min_of(j);
        own_min += qt.p_min[j];
    }
    qt.d_min = own_min;

    auto quantize_one = [&](float p, float pmin) -> uint32_t {
        if (qt.delta <= 0.0f) return p == pmin ? 0u : q_max;
        if (p - pmin >= d_max - d_min) return q_max; // at or past d_max: infinity
        // double bin math keeps floor(q)*delta <= p - pmin at float scale
        double q = std::floor((static_cast<double>(p) - pmin) / static_cast<double>(qt.delta));
        if (q >= static_cast<double>(q_max)) return q_max;
        return static_cast<uint32_t>(q);
    };

    if (width == 8) {
        qt.t8.resize(dt.tables.size());
        for (size_t j = 0; j < dt.tables.size(); ++j) {
            qt.t8[j].resize(dt.tables[j].size());
            for (size_t i = 0; i < dt.tables[j].size(); ++i)
                qt.t8[j][i] = static_cast<uint8_t>(quantize_one(dt.tables[j][i], qt.p_min[j]));
        }
    } else {
        qt.t16.resize(dt.tables.size());
        for (size_t j = 0; j < dt.tables.size(); ++j) {
            qt.t16[j].resize(dt.tables[j].size());
            for (size_t i = 0; i < dt.tables[j].size(); ++i)
                qt.t16[j][i] = static_cast<uint16_t>(quantize_one(dt.tables[j][i], qt.p_min[j]));
        }
    }
    return qt;
}

inline uint32_t saturating_add(uint32_t a, uint32_t b, uint32_t q_max) { return std::min(a + b, q_max); }

// Saturating sum of the selected entries at table width; q_max means "beyond d_max".
// acc_init biases the accumulator (used to line up tables quantized against a
// lower global d_min); the default matches plain single-table-set scans.
inline uint32_t adc_scalar_quantized(const Code& code, const QuantizedTables& qt, uint32_t acc_init = 0) {
    if (code.size() != qt.num_subs()) throw corruption_error("adc: code/tables size mismatch");
    const uint32_t q_max = qt.q_max();
    uint32_t acc = std::min(acc_init, q_max);
    for (size_t j = 0; j < code.size(); ++j) acc = saturating_add(acc, qt.entry(j, code[j]), q_max);
    return acc;
}

// d = (sum q) * delta + d_min
inline float unquantize(uint32_t q_sum, const QuantizedTables& qt) {
    if (q_sum > qt.q_max()) throw input_error("unquantize: sum exceeds q_max");
    return static_cast<float>(q_sum) * qt.delta + qt.d_min;
}

} // namespace pqscan
