#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <span>
#include <vector>

#include "pqscan/errors.hpp"

namespace pqscan {

struct KMeansConfig {
    uint32_t max_iters = 25;
    float rel_tol = 1e-4f; // stop when relative distortion improvement drops below this
    uint64_t seed = 0;
};

struct KMeansResult {
    std::vector<float> centroids;           // k * dim, row-major
    std::vector<uint32_t> assignment;       // per input point
    std::vector<double> distortion_history; // mean squared distance after each Lloyd step
    uint32_t iterations = 0;
};

namespace detail {

// 53-bit uniform double in [0,1). Drawing from the raw engine keeps results
// identical across standard libraries (std::uniform_* is not pinned).
inline double uniform01(std::mt19937_64& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

inline uint64_t uniform_index(std::mt19937_64& rng, uint64_t n) {
    return rng() % n;
}

inline double sq_dist(const float* a, const float* b, size_t dim) {
    double acc = 0.0;
    for (size_t i = 0; i < dim; ++i) {
        double d = static_cast<double>(a[i]) - static_cast<double>(b[i]);
        acc += d * d;
    }
    return acc;
}

} // namespace detail

// Lloyd's algorithm with k-means++ seeding. Deterministic for a fixed seed.
// Empty clusters are refilled by splitting the cluster with the highest total
// distortion: the member farthest from that centroid becomes the new centroid.
inline KMeansResult kmeans(std::span<const float> points, size_t n, size_t dim, size_t k,
                           const KMeansConfig& cfg = {}) {
    if (n * dim != points.size()) throw input_error("kmeans: point buffer size does not match n*dim");
    if (k == 0) throw training_error("kmeans: k must be positive");
    if (n < k) throw training_error("kmeans: need at least k=" + std::to_string(k) + " samples, got " + std::to_string(n));
    for (float v : points)
        if (!std::isfinite(v)) throw input_error("kmeans: non-finite component in training data");

    std::mt19937_64 rng(cfg.seed);
    const float* pts = points.data();

    KMeansResult res;
    res.centroids.resize(k * dim);
    res.assignment.assign(n, 0);

    // k-means++ seeding
    std::vector<double> d2(n, std::numeric_limits<double>::infinity());
    {
        uint64_t first = detail::uniform_index(rng, n);
        std::copy_n(pts + first * dim, dim, res.centroids.begin());
        for (size_t c = 1; c < k; ++c) {
            const float* prev = res.centroids.data() + (c - 1) * dim;
            double total = 0.0;
            for (size_t i = 0; i < n; ++i) {
                d2[i] = std::min(d2[i], detail::sq_dist(pts + i * dim, prev, dim));
                total += d2[i];
            }
            size_t pick = 0;
            if (total > 0.0) {
                double r = detail::uniform01(rng) * total;
                double run = 0.0;
                pick = n - 1;
                for (size_t i = 0; i < n; ++i) {
                    run += d2[i];
                    if (run > r) {
                        pick = i;
                        break;
                    }
                }
            } else {
                pick = detail::uniform_index(rng, n); // all remaining points coincide
            }
            std::copy_n(pts + pick * dim, dim, res.centroids.begin() + c * dim);
        }
    }

    std::vector<double> sums(k * dim);
    std::vector<uint32_t> counts(k);
    std::vector<double> cluster_cost(k);
    double prev_distortion = std::numeric_limits<double>::infinity();

    for (uint32_t iter = 0; iter < cfg.max_iters; ++iter) {
        // assignment step; ties go to the lowest centroid index
        double total_cost = 0.0;
        std::fill(sums.begin(), sums.end(), 0.0);
        std::fill(counts.begin(), counts.end(), 0u);
        std::fill(cluster_cost.begin(), cluster_cost.end(), 0.0);
        for (size_t i = 0; i < n; ++i) {
            const float* p = pts + i * dim;
            double best = std::numeric_limits<double>::infinity();
            uint32_t best_c = 0;
            for (size_t c = 0; c < k; ++c) {
                double d = detail::sq_dist(p, res.centroids.data() + c * dim, dim);
                if (d < best) {
                    best = d;
                    best_c = static_cast<uint32_t>(c);
                }
            }
            res.assignment[i] = best_c;
            counts[best_c]++;
            cluster_cost[best_c] += best;
            total_cost += best;
            double* s = sums.data() + best_c * dim;
            for (size_t j = 0; j < dim; ++j) s[j] += p[j];
        }

        // refill empty clusters before the mean update
        for (size_t c = 0; c < k; ++c) {
            if (counts[c] != 0) continue;
            size_t donor = static_cast<size_t>(std::max_element(cluster_cost.begin(), cluster_cost.end()) -
                                               cluster_cost.begin());
            if (counts[donor] <= 1) continue; // nothing splittable: duplicate data, leave seed centroid
            double far = -1.0;
            size_t far_i = 0;
            for (size_t i = 0; i < n; ++i) {
                if (res.assignment[i] != donor) continue;
                double d = detail::sq_dist(pts + i * dim, res.centroids.data() + donor * dim, dim);
                if (d > far) {
                    far = d;
                    far_i = i;
                }
            }
            const float* p = pts + far_i * dim;
            res.assignment[far_i] = static_cast<uint32_t>(c);
            counts[donor]--;
            counts[c] = 1;
            cluster_cost[donor] -= far;
            cluster_cost[c] = 0.0;
            double* sd = sums.data() + donor * dim;
            double* sc = sums.data() + c * dim;
            for (size_t j = 0; j < dim; ++j) {
                sd[j] -= p[j];
                sc[j] = p[j];
            }
        }

        // mean update
        for (size_t c = 0; c < k; ++c) {
            if (counts[c] == 0) continue;
            float* ctr = res.centroids.data() + c * dim;
            const double* s = sums.data() + c * dim;
            for (size_t j = 0; j < dim; ++j) ctr[j] = static_cast<float>(s[j] / counts[c]);
        }

        res.distortion_history.push_back(total_cost / static_cast<double>(n));
        res.iterations = iter + 1;
        if (prev_distortion < std::numeric_limits<double>::infinity()) {
            double impr = (prev_distortion - total_cost) / std::max(prev_distortion, 1e-30);
            if (impr < cfg.rel_tol) break;
        }
        prev_distortion = total_cost;
    }

    // final assignment against the updated centroids
    for (size_t i = 0; i < n; ++i) {
        const float* p = pts + i * dim;
        double best = std::numeric_limits<double>::infinity();
        uint32_t best_c = 0;
        for (size_t c = 0; c < k; ++c) {
            double d = detail::sq_dist(p, res.centroids.data() + c * dim, dim);
            if (d < best) {
                best = d;
                best_c = static_cast<uint32_t>(c);
            }
        }
        res.assignment[i] = best_c;
    }
    return res;
}

} // namespace pqscan
