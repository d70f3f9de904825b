#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "pqscan/errors.hpp"
#include "pqscan/kmeans.hpp"
#include "pqscan/pqspec.hpp"

namespace pqscan {

// A code is one centroid index per subquantizer; widths never exceed 8 bits.
using Code = std::vector<uint8_t>;

struct TrainConfig {
    uint32_t kmeans_iters = 25;
    float kmeans_rel_tol = 1e-4f;
    uint64_t seed = 0;
};

namespace detail {
// splitmix64; decorrelates per-subquantizer k-means seeds
inline uint64_t mix_seed(uint64_t seed, uint64_t salt) {
    uint64_t z = seed + 0x9e3779b97f4a7c15ull * (salt + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}
} // namespace detail

// Per-subquantizer centroid matrices learned by k-means on dimension slices.
class Codebook {
public:
    Codebook() = default;
    Codebook(PqSpec spec, std::vector<std::vector<float>> tables)
        : spec_(std::move(spec)), tables_(std::move(tables)) {
        if (tables_.size() != spec_.num_subs()) throw input_error("codebook: table count does not match spec");
        for (size_t j = 0; j < tables_.size(); ++j) {
            if (tables_[j].size() != size_t{spec_.centroid_count(j)} * spec_.dim_alloc(j))
                throw input_error("codebook: table " + std::to_string(j) + " has wrong size");
            for (float v : tables_[j])
                if (!std::isfinite(v)) throw corruption_error("codebook: non-finite centroid component");
        }
    }

    const PqSpec& spec() const { return spec_; }

    std::span<const float> centroid(size_t sub, size_t idx) const {
        const uint32_t d = spec_.dim_alloc(sub);
        return {tables_[sub].data() + idx * d, d};
    }
    const std::vector<float>& sub_table(size_t sub) const { return tables_[sub]; }

    bool operator==(const Codebook&) const = default;

private:
    PqSpec spec_;
    std::vector<std::vector<float>> tables_; // per sub: k_j x dim_alloc[j], row-major
};

// Trains one k-means codebook per subquantizer on that subquantizer's
// dimension slice of the sample. Subquantizers are independent.
inline Codebook train_codebook(std::span<const float> vectors, size_t n, const PqSpec& spec,
                               const TrainConfig& cfg = {}) {
    const size_t d = spec.total_dims();
    if (n * d != vectors.size()) throw input_error("train: sample buffer size does not match n*dims");
    if (n < spec.max_centroid_count())
        throw training_error("train: need at least " + std::to_string(spec.max_centroid_count()) +
                             " samples, got " + std::to_string(n));
    for (float v : vectors)
        if (!std::isfinite(v)) throw input_error("train: non-finite component in sample");

    std::vector<std::vector<float>> tables(spec.num_subs());
    std::vector<float> slice;
    for (size_t j = 0; j < spec.num_subs(); ++j) {
        const uint32_t dsub = spec.dim_alloc(j);
        const uint32_t off = spec.dim_offset(j);
        slice.resize(n * dsub);
        for (size_t i = 0; i < n; ++i)
            std::copy_n(vectors.data() + i * d + off, dsub, slice.data() + i * dsub);
        KMeansConfig kc;
        kc.max_iters = cfg.kmeans_iters;
        kc.rel_tol = cfg.kmeans_rel_tol;
        kc.seed = detail::mix_seed(cfg.seed, j);
        auto km = kmeans(slice, n, dsub, spec.centroid_count(j), kc);
        tables[j] = std::move(km.centroids);
    }
    return Codebook(spec, std::move(tables));
}

// Nearest centroid per slice, ties broken toward the lowest index.
inline Code encode(std::span<const float> vec, const Codebook& cb) {
    const PqSpec& spec = cb.spec();
    if (vec.size() != spec.total_dims()) throw input_error("encode: vector has wrong dimension");
    Code code(spec.num_subs());
    for (size_t j = 0; j < spec.num_subs(); ++j) {
        const uint32_t dsub = spec.dim_alloc(j);
        const float* q = vec.data() + spec.dim_offset(j);
        double best = std::numeric_limits<double>::infinity();
        uint32_t best_i = 0;
        for (uint32_t i = 0; i < spec.centroid_count(j); ++i) {
            const float* c = cb.sub_table(j).data() + size_t{i} * dsub;
            double acc = 0.0;
            for (uint32_t t = 0; t < dsub; ++t) {
                double diff = static_cast<double>(q[t]) - static_cast<double>(c[t]);
                acc += diff * diff;
            }
            if (acc < best) {
                best = acc;
                best_i = i;
            }
        }
        code[j] = static_cast<uint8_t>(best_i);
    }
    return code;
}

// Concatenation of the selected centroids.
inline std::vector<float> decode(const Code& code, const Codebook& cb) {
    const PqSpec& spec = cb.spec();
    if (code.size() != spec.num_subs()) throw corruption_error("decode: code has wrong subquantizer count");
    std::vector<float> out(spec.total_dims());
    for (size_t j = 0; j < spec.num_subs(); ++j) {
        if (code[j] >= spec.centroid_count(j))
            throw corruption_error("decode: index " + std::to_string(code[j]) + " out of range for subquantizer " +
                                   std::to_string(j));
        auto c = cb.centroid(j, code[j]);
        std::copy(c.begin(), c.end(), out.begin() + spec.dim_offset(j));
    }
    return out;
}

} // namespace pqscan
