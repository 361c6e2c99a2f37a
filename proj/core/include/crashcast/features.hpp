#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "crashcast/label.hpp"
#include "crashcast/mat.hpp"

namespace crashcast {

struct CorrelationMatrix {
    std::size_t n = 0;
    std::vector<double> r;       // n x n row-major
    std::vector<char> defined;   // 0 where either feature has zero variance

    double at(std::size_t i, std::size_t j) const { return r[i * n + j]; }
    bool is_defined(std::size_t i, std::size_t j) const { return defined[i * n + j] != 0; }
};

struct NormalizationParams {
    std::vector<double> min;
    std::vector<double> max;
    std::vector<char> constant; // max == min
};

// One row per window: per-feature mean across the 3 timesteps.
Mat time_averaged(const Dataset& dataset);

CorrelationMatrix pearson_matrix(const Dataset& dataset);

// Fully randomized regression trees; importance = accumulated variance
// (SSE) reduction per feature, normalized to sum 1.
std::vector<double> extra_trees_importance(const Dataset& dataset, std::size_t tree_count,
                                           std::uint64_t rng_seed);

// Indices of surviving features, in original order.
std::vector<std::size_t> select_features(const std::vector<double>& importance,
                                         const CorrelationMatrix& corr,
                                         double corr_threshold);

NormalizationParams fit_minmax(const Dataset& train);
void apply_minmax(Dataset& dataset, const NormalizationParams& params);

Dataset reduce_dataset(const Dataset& dataset, const std::vector<std::size_t>& kept);

void write_selection_report(const std::string& path, const std::vector<std::string>& names,
                            const std::vector<double>& importance,
                            const std::vector<std::size_t>& kept);
void write_correlation_csv(const std::string& path, const std::vector<std::string>& names,
                           const CorrelationMatrix& corr);

} // namespace crashcast
