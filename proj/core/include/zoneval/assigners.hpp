#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "zoneval/geometry.hpp"

namespace zoneval {

/// One square anchor per location, tiled at (stride*i, stride*j) with side
/// stride*scale. Centers start on the image origin and always lie inside
/// the image; boxes may extend past it.
struct AnchorLevel {
    double stride = 0.0;
    double scale = 0.0;
    int nx = 0;
    int ny = 0;
    std::vector<Point> centers;  // row-major
    std::vector<BBox> boxes;
};

struct AnchorGrid {
    double image_width = 0.0;
    double image_height = 0.0;
    std::vector<AnchorLevel> levels;
    std::vector<std::size_t> level_offsets;  // global index of each level's first anchor
    std::size_t total = 0;

    const Point& center(std::size_t global_index) const;
    const BBox& box(std::size_t global_index) const;

    static AnchorGrid build(double width, double height,
                            const std::vector<double>& strides, double scale);
};

enum class AssignStrategy { MaxIoU, Atss, SelaFreq, SelaCost };

enum class HalfRegion { Left, Right, Top, Bottom };

enum class FilterMode { Discard, KeepOne };

/// Sampling manipulation for simulation: either drop every ground truth
/// whose center lies in the half, or keep only its single best positive.
struct ZoneFilter {
    FilterMode mode = FilterMode::Discard;
    HalfRegion region = HalfRegion::Left;
};

struct AssignConfig {
    AssignStrategy strategy = AssignStrategy::Atss;
    double pos_thr = 0.5;  // MaxIoU
    double neg_thr = 0.4;  // MaxIoU
    int top_k = 9;         // ATSS / SELA
    double gamma = 0.0;    // SELA
    std::optional<ZoneFilter> zone_filter;
};

struct AssignmentResult {
    static constexpr int kNegative = -1;
    static constexpr int kIgnore = -2;

    double image_width = 0.0;
    double image_height = 0.0;
    std::vector<int> labels;                   // per anchor: gt index, or kNegative/kIgnore
    std::vector<double> loss_weight;           // per anchor; 1 + gamma*alpha on SELA-cost positives
    std::vector<std::int64_t> positives_per_gt;
    std::vector<double> gt_threshold;          // ATSS t per gt; NaN where not applicable
};

/// mean + population standard deviation of candidate IoUs (the adaptive
/// positive threshold). Throws InputError on empty input.
double atss_threshold(const std::vector<double>& ious);

/// Fixed-threshold assignment: positive iff max IoU >= pos_thr (argmax GT,
/// earlier GT on ties), negative iff < neg_thr, ignore in between. Each GT
/// additionally claims its best-IoU anchor when that IoU is positive
/// (low-quality rescue; a later GT's claim overwrites an earlier one).
AssignmentResult max_iou_assign(const AnchorGrid& grid, const std::vector<BBox>& gts,
                                double pos_thr, double neg_thr);

/// Adaptive assignment: per GT, pool the top_k distance-closest anchors of
/// every level, set t = mean + std of their IoUs, and mark candidates with
/// IoU >= t whose centers lie inside the GT box. An anchor wanted by
/// several GTs goes to the one it overlaps most.
AssignmentResult atss_assign(const AnchorGrid& grid, const std::vector<BBox>& gts, int top_k);

/// Like atss_assign but each candidate's test relaxes to
/// IoU >= t - gamma * alpha(anchor center), easing selection near borders.
AssignmentResult sela_assign(const AnchorGrid& grid, const std::vector<BBox>& gts,
                             int top_k, double gamma);

/// Cost-sensitive weight 1 + gamma * alpha(p).
double sela_loss_weight(const Point& p, double width, double height, double gamma);

/// Strategy dispatch plus the optional zone filter.
AssignmentResult assign(const AnchorGrid& grid, const std::vector<BBox>& gts,
                        const AssignConfig& config);

struct ZoneSamplingStats {
    std::vector<Zone> zones;
    std::vector<std::int64_t> gt_count;
    std::vector<std::int64_t> positives;
    std::vector<std::optional<double>> mean_positives_per_gt;
};

ZoneSamplingStats assignment_zone_stats(const AssignmentResult& result,
                                        const std::vector<BBox>& gts,
                                        const std::vector<Zone>& zones);

/// Reproducible simulator input: image size, GT boxes, optional anchor
/// layout (defaults: strides {8,16,32,64,128}, scale 8).
struct Scene {
    double width = 0.0;
    double height = 0.0;
    std::vector<double> strides{8.0, 16.0, 32.0, 64.0, 128.0};
    double scale = 8.0;
    std::vector<BBox> gts;

    AnchorGrid build_grid() const;
};

Scene parse_scene(const std::string& json_text);
Scene load_scene(const std::string& path);

}  // namespace zoneval
