#pragma once

#include <optional>
#include <string>
#include <vector>

#include "zoneval/dataset.hpp"
#include "zoneval/zone_eval.hpp"

namespace zoneval {

/// Product-moment correlation. nullopt (undefined, never 0) when either
/// vector is constant. Throws InputError on length mismatch or n < 2.
std::optional<double> pearson(const std::vector<double>& x, const std::vector<double>& y);

/// Rank correlation: pearson of average-ranked values, ties averaged.
std::optional<double> spearman(const std::vector<double>& x, const std::vector<double>& y);

/// Average ranks (1-based); tied values share the mean of their positions.
std::vector<double> average_ranks(const std::vector<double>& x);

/// Correlation between per-cell mZP and per-cell object counts, per IoU
/// threshold. Cells with undefined mZP are dropped pairwise.
struct CorrelationCurve {
    std::vector<double> thresholds;
    std::vector<std::optional<double>> pcc;
    std::vector<std::optional<double>> scc;
    std::vector<int> n_points;
};

CorrelationCurve zone_metric_correlation(const GridMetrics& grid,
                                         const DistributionCounts& distribution,
                                         const std::vector<double>& thresholds);

std::string correlation_to_json(const CorrelationCurve& curve, const ConfigEntries& config);
std::string correlation_to_csv(const CorrelationCurve& curve);

}  // namespace zoneval
