#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "zoneval/geometry.hpp"

namespace zoneval {

struct ImageInfo {
    std::int64_t id = 0;
    double width = 0.0;
    double height = 0.0;

    friend bool operator==(const ImageInfo&, const ImageInfo&) = default;
};

struct Category {
    std::int64_t id = 0;
    std::string name;

    friend bool operator==(const Category&, const Category&) = default;
};

struct GtObject {
    std::int64_t id = 0;
    std::int64_t image_id = 0;
    std::int64_t category_id = 0;
    BBox bbox;
    bool is_crowd = false;

    friend bool operator==(const GtObject&, const GtObject&) = default;
};

struct Detection {
    std::int64_t image_id = 0;
    std::int64_t category_id = 0;
    BBox bbox;
    double score = 0.0;

    friend bool operator==(const Detection&, const Detection&) = default;
};

/// Counters surfaced by the loaders: boxes clamped to the image bounds,
/// and records dropped because the box degenerated (w or h <= 0).
struct LoadStats {
    std::int64_t clamped = 0;
    std::int64_t dropped = 0;
};

struct DetectionDataset {
    std::vector<ImageInfo> images;
    std::vector<Category> categories;
    std::vector<GtObject> annotations;
    LoadStats stats;

    const ImageInfo* find_image(std::int64_t id) const;
    bool has_category(std::int64_t id) const;
};

/// Scored predictions grouped by (image_id, category_id); each group is
/// score-descending with ties in original file order.
struct DetectionSet {
    using Key = std::pair<std::int64_t, std::int64_t>;
    std::map<Key, std::vector<Detection>> groups;
    LoadStats stats;

    std::size_t size() const;
};

DetectionDataset parse_ground_truth(const std::string& json_text);
DetectionDataset load_ground_truth(const std::string& path);
std::string serialize_ground_truth(const DetectionDataset& ds);

DetectionSet parse_detections(const std::string& json_text, const DetectionDataset& ds);
DetectionSet load_detections(const std::string& path, const DetectionDataset& ds);

/// Groups and sorts an in-memory detection list per the DetectionSet
/// invariant (score-descending, ties in list order). Checks referential
/// integrity and score range like the loader but does not clamp boxes.
DetectionSet make_detection_set(const std::vector<Detection>& detections,
                                const DetectionDataset& ds);

/// Center counts of non-crowd ground-truth objects over a full partition.
struct DistributionCounts {
    std::vector<std::int64_t> per_zone;
    std::map<std::int64_t, std::vector<std::int64_t>> per_category;
    std::int64_t total = 0;
};

DistributionCounts object_distribution(const DetectionDataset& ds,
                                       const std::vector<Zone>& zones);

}  // namespace zoneval
