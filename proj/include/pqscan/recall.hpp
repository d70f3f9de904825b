#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "pqscan/errors.hpp"

namespace pqscan {

// R@r: fraction of queries whose true nearest neighbor (first ground-truth id)
// appears among the first r returned results.
inline std::vector<double> evaluate_recall(const std::vector<std::vector<uint32_t>>& results,
                                           const std::vector<std::vector<uint32_t>>& ground_truth,
                                           std::span<const uint32_t> ranks) {
    if (results.size() != ground_truth.size())
        throw input_error("evaluate_recall: result count " + std::to_string(results.size()) +
                          " != ground truth count " + std::to_string(ground_truth.size()));
    for (const auto& gt : ground_truth)
        if (gt.empty()) throw input_error("evaluate_recall: ground truth entry with no ids");

    std::vector<double> recall(ranks.size(), 0.0);
    if (results.empty()) return recall;
    for (size_t q = 0; q < results.size(); ++q) {
        const uint32_t truth = ground_truth[q][0];
        for (size_t ri = 0; ri < ranks.size(); ++ri) {
            const size_t limit = std::min<size_t>(ranks[ri], results[q].size());
            for (size_t i = 0; i < limit; ++i) {
                if (results[q][i] == truth) {
                    recall[ri] += 1.0;
                    break;
                }
            }
        }
    }
    for (auto& r : recall) r /= static_cast<double>(results.size());
    return recall;
}

} // namespace pqscan
