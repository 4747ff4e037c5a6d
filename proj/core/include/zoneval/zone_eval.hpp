#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "zoneval/ap_engine.hpp"

namespace zoneval {

/// Multi-zone evaluation result. `sp` is the area-weighted sum of the
/// per-zone ZPs; zones without ground truth contribute no term and their
/// weight is redistributed proportionally over the defined zones, so SP
/// stays a convex combination. `variance` is the population variance of
/// the defined per-zone ZPs (fraction scale).
struct ZoneReport {
    std::vector<ZoneMetrics> zones;
    ZoneMetrics traditional;  // full-image evaluation of the same inputs
    std::optional<double> sp;
    std::optional<double> sp75;
    std::optional<double> variance;
    std::optional<double> variance75;
};

/// Eq.-style weighted sum over a full partition: sum(area_i * zp_i).
/// Scale-agnostic. Throws InputError on length mismatch or if the areas
/// do not sum to 1 within 1e-9.
double spatial_equilibrium_precision(const std::vector<double>& zps,
                                     const std::vector<double>& areas);

/// Population variance (divide by n). Throws InputError on empty input.
double zone_variance(const std::vector<double>& zps);

/// Evaluates the n annular zones plus the full image.
ZoneReport zone_evaluation(const DetectionDataset& ds, const DetectionSet& dets,
                           int n_zones, const EvalOptions& opt);

/// Evaluates one RangeBand zone per (r_inner, r_outer) pair. The pair
/// (0, 0.5) reproduces the traditional full-image evaluation exactly.
std::vector<ZoneMetrics> range_sweep(const DetectionDataset& ds, const DetectionSet& dets,
                                     const std::vector<std::pair<double, double>>& sweep,
                                     const EvalOptions& opt);

/// Per-cell metrics over a rows x cols grid, row-major.
struct GridMetrics {
    int rows = 0;
    int cols = 0;
    std::vector<ZoneMetrics> cells;
};

GridMetrics grid_evaluation(const DetectionDataset& ds, const DetectionSet& dets,
                            int rows, int cols, const EvalOptions& opt);

/// Provenance block embedded into every serialized report, in order.
using ConfigEntries = std::vector<std::pair<std::string, std::string>>;

std::string report_to_json(const ZoneReport& report, const ConfigEntries& config);
std::string report_to_csv(const ZoneReport& report);

std::string sweep_to_json(const std::vector<ZoneMetrics>& bands, const ConfigEntries& config);
std::string sweep_to_csv(const std::vector<ZoneMetrics>& bands);

std::string grid_to_json(const GridMetrics& grid, const ConfigEntries& config);
std::string grid_to_csv(const GridMetrics& grid);

/// Plot-ready numeric matrix, row-major, one CSV line per row. Undefined
/// metric cells serialize as "nan".
std::string heatmap_csv(int rows, int cols, const std::vector<double>& values);
std::string heatmap_csv(int rows, int cols, const std::vector<std::int64_t>& values);

/// rows x cols matrix of per-cell ZP (NaN when undefined) for heatmaps.
std::vector<double> grid_zp_matrix(const GridMetrics& grid);

}  // namespace zoneval
