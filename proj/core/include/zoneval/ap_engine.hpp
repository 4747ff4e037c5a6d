#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "zoneval/dataset.hpp"
#include "zoneval/geometry.hpp"

namespace zoneval {

/// Outcome of one detection in greedy matching. `matched` and `ignored`
/// are mutually exclusive; ignored detections (crowd overlaps) count
/// neither as true nor as false positives.
struct MatchRecord {
    int det_index = -1;
    double score = 0.0;
    bool matched = false;
    std::optional<std::int64_t> matched_gt;
    bool ignored = false;
};

/// 101-point interpolated precision/recall curve. The interpolated
/// precision is non-increasing along the recall grid and ap is its mean.
struct PrCurve {
    std::vector<double> recall_grid;
    std::vector<double> precision;
    double ap = 0.0;
};

/// Greedy score-ordered matching for one image/category pool at a single
/// IoU threshold. Each detection takes the unmatched non-crowd GT with
/// the highest IoU >= iou_thr (ties by GT input order); failing that it
/// may ignore-match a crowd GT using intersection-over-detection-area;
/// otherwise it is a false positive. Crowd GTs may absorb any number of
/// detections. Throws ContractViolation if `dets` is not score-sorted.
std::vector<MatchRecord> match_detections(const std::vector<Detection>& dets,
                                          const std::vector<GtObject>& gts,
                                          double iou_thr);

/// COCO-style AP from the pooled, globally score-sorted match records of
/// one category. Returns nullopt when n_gt == 0 (undefined; excluded
/// from averages). Throws InputError on negative n_gt.
std::optional<PrCurve> average_precision(const std::vector<MatchRecord>& matches,
                                         std::int64_t n_gt);

/// Per-zone evaluation output. All metrics are fractions in [0, 1];
/// nullopt marks zones/thresholds with no ground truth (undefined, never
/// rendered as zero). `mzp[i]` corresponds to `thresholds[i]`.
struct ZoneMetrics {
    Zone zone;
    std::vector<double> thresholds;
    std::vector<std::optional<double>> mzp;
    std::optional<double> zp;
    std::optional<double> zp50;
    std::optional<double> zp75;
    std::int64_t n_gt = 0;
    std::int64_t n_det = 0;
};

struct EvalOptions {
    std::vector<double> iou_thresholds;  // each in (0,1); must be non-empty
    int max_dets = 100;                  // per-image cap across categories
    int threads = 1;
};

/// The COCO grid {0.50, 0.55, ..., 0.95}.
std::vector<double> coco_iou_thresholds();

EvalOptions default_eval_options();

/// Evaluates one zone: keeps only ground truths and detections whose box
/// centers lie in the zone, caps detections per image, then runs
/// conventional per-category AP at each threshold. Categories with no
/// zone ground truth are excluded from the means rather than scored 0.
ZoneMetrics evaluate_zone(const DetectionDataset& ds, const DetectionSet& dets,
                          const Zone& zone, const EvalOptions& opt);

}  // namespace zoneval
