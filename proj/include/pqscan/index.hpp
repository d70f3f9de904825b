#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <span>
#include <vector>

#include "pqscan/codebook.hpp"
#include "pqscan/distance.hpp"
#include "pqscan/errors.hpp"
#include "pqscan/heap.hpp"
#include "pqscan/layout.hpp"
#include "pqscan/simd/kernels.hpp"

namespace pqscan {

struct SearchParams {
    uint32_t probes = 1; // a: inverted lists to visit (ignored by exhaustive search)
    uint32_t r = 100;    // results requested
    uint32_t t = 400;    // calibration prefix length
    bool rerank = false; // exact re-ranking of the final top-R by decoded float ADC
    std::optional<KernelFamily> forced_kernel;

    void validate() const {
        if (r < 1) throw input_error("search: R must be at least 1");
        if (t < r) throw input_error("search: calibration prefix t must be at least R");
        if (probes < 1) throw input_error("search: probes must be at least 1");
    }
};

struct SearchResult {
    std::vector<uint32_t> ids;  // ascending by (distance, id)
    std::vector<float> dists;   // unquantized (or exact float for the float kernel / rerank)
    KernelFamily kernel = KernelFamily::scalar_quantized;
    bool scalar_fallback = false; // no vector kernel for this spec/host; reported, not an error
};

namespace detail {

inline SearchResult finish_float(CandidateHeap<float>& heap) {
    SearchResult res;
    res.kernel = KernelFamily::scalar_float;
    for (const auto& e : heap.sorted()) {
        res.ids.push_back(e.id);
        res.dists.push_back(e.dist);
    }
    return res;
}

inline void rerank_by_float(SearchResult& res, std::span<const float> exact) {
    std::vector<size_t> order(res.ids.size());
    std::iota(order.begin(), order.end(), size_t{0});
    std::sort(order.begin(), order.end(), [&](size_t a, size_t b) {
        return exact[a] < exact[b] || (exact[a] == exact[b] && res.ids[a] < res.ids[b]);
    });
    SearchResult out;
    out.kernel = res.kernel;
    out.scalar_fallback = res.scalar_fallback;
    for (size_t i : order) {
        out.ids.push_back(res.ids[i]);
        out.dists.push_back(exact[i]);
    }
    res = std::move(out);
}

} // namespace detail

// Exhaustive search over a single packed list of codes encoding the original
// vectors (no residuals): one table build, one calibration, full scan.
class FlatIndex {
public:
    FlatIndex() = default;
    FlatIndex(Codebook cb, PackedList list)
        : cb_(std::move(cb)), scheme_(PackingScheme::for_spec(cb_.spec())), list_(std::move(list)) {}

    static FlatIndex encode_database(std::span<const float> vectors, size_t n, Codebook cb) {
        const size_t d = cb.spec().total_dims();
        if (n * d != vectors.size()) throw input_error("encode_database: buffer size does not match n*dims");
        std::vector<Code> codes(n);
        for (size_t i = 0; i < n; ++i) codes[i] = encode({vectors.data() + i * d, d}, cb);
        PackingScheme scheme = PackingScheme::for_spec(cb.spec());
        return FlatIndex(std::move(cb), pack_list(codes, scheme));
    }

    const Codebook& codebook() const { return cb_; }
    const PackingScheme& scheme() const { return scheme_; }
    const PackedList& list() const { return list_; }
    uint64_t size() const { return list_.count; }

    Code code_at(uint64_t pos) const {
        const size_t bb = list_.block_bytes(scheme_);
        const size_t b = pos / scheme_.block_len;
        PackedBlock blk;
        blk.rows = list_.rows;
        blk.block_len = scheme_.block_len;
        blk.word_bytes = scheme_.word_bytes();
        blk.occupancy = 1;
        blk.data.assign(list_.data.begin() + b * bb, list_.data.begin() + (b + 1) * bb);
        Code code(size_t{blk.rows} * scheme_.group_size());
        for (uint32_t r = 0; r < blk.rows; ++r) {
            auto subs = unpack_group(blk.word(r, pos % scheme_.block_len), scheme_);
            std::copy(subs.begin(), subs.end(), code.begin() + size_t{r} * scheme_.group_size());
        }
        return code;
    }

    SearchResult search(std::span<const float> query, const SearchParams& params) const {
        params.validate();
        if (query.size() != cb_.spec().total_dims()) throw input_error("search: query has wrong dimension");
        if (list_.count == 0) return {};
        DistanceTables dt = compute_tables(query, cb_);

        if (params.forced_kernel == KernelFamily::scalar_float) {
            CandidateHeap<float> heap(params.r);
            scan_list_scalar_float(list_, scheme_, dt, nullptr, 0, heap);
            SearchResult res = detail::finish_float(heap);
            if (params.rerank) rerank_exact(query, dt, res);
            return res;
        }

        std::vector<float> prefix;
        prefix.reserve(std::min<uint64_t>(params.t, list_.count));
        collect_prefix_float(list_, scheme_, dt, params.t, prefix);
        const uint32_t r_eff = static_cast<uint32_t>(std::min<size_t>(params.r, prefix.size()));
        auto [d_min, d_max] = calibrate_bounds(dt, prefix, r_eff);
        QuantizedTables qt = quantize_tables(dt, d_min, d_max, scheme_.word_width);

        KernelFamily fam = select_kernel(cb_.spec(), SimdCaps::available(), params.forced_kernel);
        QuantizedScanFn fn = quantized_scan_fn(cb_.spec(), fam);
        CandidateHeap<uint32_t> heap(params.r);
        fn(list_, scheme_, qt, nullptr, 0, 0, heap);

        SearchResult res;
        res.kernel = fam;
        res.scalar_fallback = fam == KernelFamily::scalar_quantized && !params.forced_kernel;
        for (const auto& e : heap.sorted()) {
            res.ids.push_back(e.id);
            res.dists.push_back(unquantize(e.dist, qt));
        }
        if (params.rerank) rerank_exact(query, dt, res);
        return res;
    }

private:
    void rerank_exact(std::span<const float>, const DistanceTables& dt, SearchResult& res) const {
        std::vector<float> exact(res.ids.size());
        for (size_t i = 0; i < res.ids.size(); ++i) exact[i] = adc_scalar_float(code_at(res.ids[i]), dt);
        detail::rerank_by_float(res, exact);
    }

    Codebook cb_;
    PackingScheme scheme_;
    PackedList list_;
};

struct IvfBuildConfig {
    uint32_t k_coarse = 4096; // desk-scale default; billion-scale setups use far larger indexes
    TrainConfig train;
    uint32_t max_train_residuals = 0; // 0 = 256 * largest subquantizer centroid count
};

// Coarse k-means partition with PQ-encoded residuals in per-cell packed lists.
class IvfIndex {
public:
    IvfIndex() = default;
    IvfIndex(Codebook cb, std::vector<float> coarse, std::vector<PackedList> lists,
             std::vector<std::vector<uint32_t>> ids)
        : cb_(std::move(cb)), scheme_(PackingScheme::for_spec(cb_.spec())), coarse_(std::move(coarse)),
          lists_(std::move(lists)), ids_(std::move(ids)) {
        if (lists_.size() != ids_.size()) throw corruption_error("ivf: list/id section mismatch");
        for (size_t c = 0; c < lists_.size(); ++c)
            if (lists_[c].count != ids_[c].size()) throw corruption_error("ivf: list code count != id count");
        build_locator();
    }

    static IvfIndex build(std::span<const float> vectors, size_t n, const SpecPattern& pattern,
                          const IvfBuildConfig& cfg) {
        if (n == 0) throw training_error("ivf build: empty database");
        const size_t d = vectors.size() / n;
        if (n * d != vectors.size()) throw input_error("ivf build: buffer size does not match n*dims");
        if (n < cfg.k_coarse)
            throw training_error("ivf build: need at least K=" + std::to_string(cfg.k_coarse) + " vectors, got " +
                                 std::to_string(n));
        PqSpec spec = allocate_dims(static_cast<uint32_t>(d), pattern);

        KMeansConfig ck;
        ck.max_iters = cfg.train.kmeans_iters;
        ck.rel_tol = cfg.train.kmeans_rel_tol;
        ck.seed = detail_mix(cfg.train.seed, 0x1f1);
        KMeansResult coarse = kmeans(vectors, n, d, cfg.k_coarse, ck);

        std::vector<float> residuals(vectors.size());
        for (size_t i = 0; i < n; ++i) {
            const float* x = vectors.data() + i * d;
            const float* c = coarse.centroids.data() + size_t{coarse.assignment[i]} * d;
            float* r = residuals.data() + i * d;
            for (size_t j = 0; j < d; ++j) r[j] = x[j] - c[j];
        }

        // residual sample for PQ training: uniform, seeded, capped
        size_t cap = cfg.max_train_residuals ? cfg.max_train_residuals : size_t{256} * spec.max_centroid_count();
        Codebook cb;
        if (n <= cap) {
            cb = train_codebook(residuals, n, spec, cfg.train);
        } else {
            std::mt19937_64 rng(detail_mix(cfg.train.seed, 0x2f2));
            std::vector<float> sample(cap * d);
            for (size_t s = 0; s < cap; ++s) {
                size_t pick = rng() % n;
                std::copy_n(residuals.data() + pick * d, d, sample.data() + s * d);
            }
            cb = train_codebook(sample, cap, spec, cfg.train);
        }

        PackingScheme scheme = PackingScheme::for_spec(spec);
        std::vector<std::vector<Code>> cell_codes(cfg.k_coarse);
        std::vector<std::vector<uint32_t>> cell_ids(cfg.k_coarse);
        for (size_t i = 0; i < n; ++i) {
            uint32_t cell = coarse.assignment[i];
            cell_codes[cell].push_back(encode({residuals.data() + i * d, d}, cb));
            cell_ids[cell].push_back(static_cast<uint32_t>(i));
        }
        std::vector<PackedList> lists(cfg.k_coarse);
        for (size_t c = 0; c < cfg.k_coarse; ++c) lists[c] = pack_list(cell_codes[c], scheme);

        return IvfIndex(std::move(cb), std::move(coarse.centroids), std::move(lists), std::move(cell_ids));
    }

    const Codebook& codebook() const { return cb_; }
    const PackingScheme& scheme() const { return scheme_; }
    uint32_t cells() const { return static_cast<uint32_t>(lists_.size()); }
    uint32_t dims() const { return cb_.spec().total_dims(); }
    const std::vector<PackedList>& lists() const { return lists_; }
    const std::vector<std::vector<uint32_t>>& list_ids() const { return ids_; }
    std::span<const float> coarse_centroid(uint32_t c) const { return {coarse_.data() + size_t{c} * dims(), dims()}; }
    const std::vector<float>& coarse_centroids() const { return coarse_; }
    uint64_t size() const {
        uint64_t s = 0;
        for (const auto& l : lists_) s += l.count;
        return s;
    }

    // Cells in ascending distance from the query, ties by cell id; first `a`.
    std::vector<uint32_t> probe_order(std::span<const float> query, uint32_t a) const {
        if (query.size() != dims()) throw input_error("probe_order: query has wrong dimension");
        const uint32_t k = cells();
        a = std::min(a, k);
        std::vector<std::pair<float, uint32_t>> ds(k);
        for (uint32_t c = 0; c < k; ++c) {
            const float* ctr = coarse_.data() + size_t{c} * dims();
            float acc = 0.0f;
            for (size_t j = 0; j < query.size(); ++j) {
                float diff = query[j] - ctr[j];
                acc += diff * diff;
            }
            ds[c] = {acc, c};
        }
        std::partial_sort(ds.begin(), ds.begin() + a, ds.end());
        std::vector<uint32_t> order(a);
        for (uint32_t i = 0; i < a; ++i) order[i] = ds[i].second;
        return order;
    }

    // Union of candidate ids in the first `a` probed cells (ascending ids).
    // Grows monotonically with a by construction of probe_order.
    std::vector<uint32_t> probed_candidates(std::span<const float> query, uint32_t a) const {
        std::vector<uint32_t> out;
        for (uint32_t c : probe_order(query, a)) out.insert(out.end(), ids_[c].begin(), ids_[c].end());
        std::sort(out.begin(), out.end());
        return out;
    }

    SearchResult search(std::span<const float> query, const SearchParams& params) const {
        params.validate();
        if (query.size() != dims()) throw input_error("search: query has wrong dimension");
        std::vector<uint32_t> order = probe_order(query, params.probes);

        // residual tables for every probed cell
        std::vector<DistanceTables> tables(order.size());
        std::vector<float> residual(dims());
        for (size_t i = 0; i < order.size(); ++i) {
            const float* ctr = coarse_.data() + size_t{order[i]} * dims();
            for (size_t j = 0; j < residual.size(); ++j) residual[j] = query[j] - ctr[j];
            tables[i] = compute_tables(residual, cb_);
        }

        if (params.forced_kernel == KernelFamily::scalar_float) {
            CandidateHeap<float> heap(params.r);
            for (size_t i = 0; i < order.size(); ++i)
                scan_list_scalar_float(lists_[order[i]], scheme_, tables[i], ids_[order[i]].data(), 0, heap);
            SearchResult res = detail::finish_float(heap);
            if (params.rerank) rerank_exact(order, tables, res);
            return res;
        }

        // one affine quantization map per query: shared delta against the
        // lowest table minimum over the probed cells
        float d_min_global = std::numeric_limits<float>::infinity();
        for (const auto& dt : tables) d_min_global = std::min(d_min_global, dt.min_total());

        std::vector<float> prefix;
        for (size_t i = 0; i < order.size() && prefix.size() < params.t; ++i)
            collect_prefix_float(lists_[order[i]], scheme_, tables[i], params.t - prefix.size(), prefix);
        if (prefix.empty()) return {};
        const uint32_t r_eff = static_cast<uint32_t>(std::min<size_t>(params.r, prefix.size()));
        std::vector<float> tmp(prefix);
        std::nth_element(tmp.begin(), tmp.begin() + (r_eff - 1), tmp.end());
        const float d_max = tmp[r_eff - 1];

        KernelFamily fam = select_kernel(cb_.spec(), SimdCaps::available(), params.forced_kernel);
        QuantizedScanFn fn = quantized_scan_fn(cb_.spec(), fam);
        const uint32_t q_max = scheme_.word_width == 8 ? 255u : 65535u;
        const float delta = (d_max - d_min_global) / static_cast<float>(q_max);

        CandidateHeap<uint32_t> heap(params.r);
        for (size_t i = 0; i < order.size(); ++i) {
            const PackedList& list = lists_[order[i]];
            if (list.count == 0) continue;
            QuantizedTables qt = quantize_tables(tables[i], d_min_global, d_max, scheme_.word_width);
            // line this cell's sums up with the global map
            uint32_t bias = 0;
            if (delta > 0.0f) {
                float b = std::floor((qt.d_min - d_min_global) / delta);
                bias = b >= static_cast<float>(q_max) ? q_max : static_cast<uint32_t>(b);
            }
            fn(list, scheme_, qt, ids_[order[i]].data(), 0, bias, heap);
        }

        SearchResult res;
        res.kernel = fam;
        res.scalar_fallback = fam == KernelFamily::scalar_quantized && !params.forced_kernel;
        for (const auto& e : heap.sorted()) {
            res.ids.push_back(e.id);
            res.dists.push_back(static_cast<float>(e.dist) * delta + d_min_global);
        }
        if (params.rerank) rerank_exact(order, tables, res);
        return res;
    }

    Code code_of(uint32_t id) const {
        auto [cell, pos] = locator_.at(id);
        const PackedList& list = lists_[cell];
        const size_t bb = list.block_bytes(scheme_);
        const size_t b = pos / scheme_.block_len;
        Code code(size_t{list.rows} * scheme_.group_size());
        PackedBlock blk;
        blk.rows = list.rows;
        blk.block_len = scheme_.block_len;
        blk.word_bytes = scheme_.word_bytes();
        blk.occupancy = 1;
        blk.data.assign(list.data.begin() + b * bb, list.data.begin() + (b + 1) * bb);
        for (uint32_t r = 0; r < list.rows; ++r) {
            auto subs = unpack_group(blk.word(r, pos % scheme_.block_len), scheme_);
            std::copy(subs.begin(), subs.end(), code.begin() + size_t{r} * scheme_.group_size());
        }
        return code;
    }
    uint32_t cell_of(uint32_t id) const { return locator_.at(id).first; }

private:
    static uint64_t detail_mix(uint64_t seed, uint64_t salt) { return detail::mix_seed(seed, salt); }

    void build_locator() {
        uint64_t total = size();
        locator_.assign(total, std::pair<uint32_t, uint32_t>(0, 0));
        for (uint32_t c = 0; c < cells(); ++c)
            for (uint32_t p = 0; p < ids_[c].size(); ++p) {
                uint32_t id = ids_[c][p];
                if (id >= total) throw corruption_error("ivf: vector id out of range");
                locator_[id] = {c, p};
            }
    }

    void rerank_exact(const std::vector<uint32_t>& order, const std::vector<DistanceTables>& tables,
                      SearchResult& res) const {
        std::vector<float> exact(res.ids.size());
        for (size_t i = 0; i < res.ids.size(); ++i) {
            uint32_t cell = cell_of(res.ids[i]);
            size_t probe_idx = static_cast<size_t>(std::find(order.begin(), order.end(), cell) - order.begin());
            exact[i] = adc_scalar_float(code_of(res.ids[i]), tables[probe_idx]);
        }
        detail::rerank_by_float(res, exact);
    }

    Codebook cb_;
    PackingScheme scheme_;
    std::vector<float> coarse_;
    std::vector<PackedList> lists_;
    std::vector<std::vector<uint32_t>> ids_;
    std::vector<std::pair<uint32_t, uint32_t>> locator_; // id -> (cell, position)
};

} // namespace pqscan
