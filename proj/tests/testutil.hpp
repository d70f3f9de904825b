#pragma once

#include <random>
#include <vector>

#include "pqscan/pqscan.hpp"

namespace testutil {

// Gaussian blobs around uniform cluster centers; the usual stand-in for
// descriptor-like data.
inline std::vector<float> clustered_data(size_t n, size_t d, size_t clusters, uint64_t seed, float spread = 3.0f,
                                         float box = 100.0f) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<float> gauss(0.0f, 1.0f);
    std::uniform_real_distribution<float> uni(0.0f, box);
    std::vector<float> centers(clusters * d);
    for (auto& v : centers) v = uni(rng);
    std::vector<float> out(n * d);
    for (size_t i = 0; i < n; ++i) {
        const size_t c = rng() % clusters;
        for (size_t j = 0; j < d; ++j) out[i * d + j] = centers[c * d + j] + spread * gauss(rng);
    }
    return out;
}

inline std::vector<float> uniform_data(size_t n, size_t d, uint64_t seed, float lo = 0.0f, float hi = 1.0f) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<float> uni(lo, hi);
    std::vector<float> out(n * d);
    for (auto& v : out) v = uni(rng);
    return out;
}

inline float sq_dist(const float* a, const float* b, size_t d) {
    float acc = 0.0f;
    for (size_t i = 0; i < d; ++i) {
        float t = a[i] - b[i];
        acc += t * t;
    }
    return acc;
}

// Exact float nearest neighbors by full scan; ids sorted by (distance, id).
inline std::vector<uint32_t> brute_force_nn(const std::vector<float>& base, size_t n, const float* query, size_t d,
                                            size_t k) {
    std::vector<std::pair<float, uint32_t>> all(n);
    for (size_t i = 0; i < n; ++i) all[i] = {sq_dist(base.data() + i * d, query, d), static_cast<uint32_t>(i)};
    std::sort(all.begin(), all.end());
    std::vector<uint32_t> ids(std::min(k, n));
    for (size_t i = 0; i < ids.size(); ++i) ids[i] = all[i].second;
    return ids;
}

// Every code of a small product quantizer, for enumeration oracles.
inline std::vector<pqscan::Code> all_codes(const pqscan::PqSpec& spec) {
    std::vector<pqscan::Code> out{pqscan::Code{}};
    for (size_t j = 0; j < spec.num_subs(); ++j) {
        std::vector<pqscan::Code> next;
        for (const auto& prefix : out)
            for (uint32_t i = 0; i < spec.centroid_count(j); ++i) {
                pqscan::Code c = prefix;
                c.push_back(static_cast<uint8_t>(i));
                next.push_back(std::move(c));
            }
        out = std::move(next);
    }
    return out;
}

inline pqscan::Code random_code(const pqscan::PqSpec& spec, std::mt19937_64& rng) {
    pqscan::Code c(spec.num_subs());
    for (size_t j = 0; j < spec.num_subs(); ++j) c[j] = static_cast<uint8_t>(rng() % spec.centroid_count(j));
    return c;
}

inline pqscan::QuantizedTables random_qtables(const pqscan::PqSpec& spec, uint32_t width, std::mt19937_64& rng,
                                              bool saturating = false) {
    pqscan::QuantizedTables qt;
    qt.width = width;
    qt.delta = 1.0f;
    qt.d_min = 0.0f;
    qt.p_min.assign(spec.num_subs(), 0.0f);
    const uint32_t q_max = width == 8 ? 255u : 65535u;
    auto draw = [&]() -> uint32_t {
        if (saturating) return q_max - rng() % (q_max / 4 + 1);
        return rng() % (q_max + 1);
    };
    if (width == 8) {
        qt.t8.resize(spec.num_subs());
        for (size_t j = 0; j < spec.num_subs(); ++j) {
            qt.t8[j].resize(spec.centroid_count(j));
            for (auto& e : qt.t8[j]) e = static_cast<uint8_t>(draw());
        }
    } else {
        qt.t16.resize(spec.num_subs());
        for (size_t j = 0; j < spec.num_subs(); ++j) {
            qt.t16[j].resize(spec.centroid_count(j));
            for (auto& e : qt.t16[j]) e = static_cast<uint16_t>(draw());
        }
    }
    return qt;
}

} // namespace testutil
