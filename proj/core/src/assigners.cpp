#include "zoneval/assigners.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "zoneval/errors.hpp"

namespace zoneval {

namespace {

using nlohmann::json;

struct Candidate {
    std::size_t anchor = 0;
    double iou = 0.0;
};

bool center_inside(const Point& p, const BBox& box) {
    return p.x >= box.x && p.x <= box.right() && p.y >= box.y && p.y <= box.bottom();
}

bool in_half(const Point& p, HalfRegion region, double width, double height) {
    switch (region) {
        case HalfRegion::Left:
            return p.x < width / 2.0;
        case HalfRegion::Right:
            return p.x >= width / 2.0;
        case HalfRegion::Top:
            return p.y < height / 2.0;
        case HalfRegion::Bottom:
            return p.y >= height / 2.0;
    }
    return false;
}

AssignmentResult make_result(const AnchorGrid& grid, std::size_t n_gt) {
    AssignmentResult result;
    result.image_width = grid.image_width;
    result.image_height = grid.image_height;
    result.labels.assign(grid.total, AssignmentResult::kNegative);
    result.loss_weight.assign(grid.total, 1.0);
    result.positives_per_gt.assign(n_gt, 0);
    result.gt_threshold.assign(n_gt, std::nan(""));
    return result;
}

void count_positives(AssignmentResult& result) {
    std::fill(result.positives_per_gt.begin(), result.positives_per_gt.end(), 0);
    for (int label : result.labels) {
        if (label >= 0) {
            ++result.positives_per_gt[static_cast<std::size_t>(label)];
        }
    }
}

// ATSS with an optional per-anchor relaxation; gamma = 0 gives the plain
// algorithm bit-for-bit.
AssignmentResult atss_core(const AnchorGrid& grid, const std::vector<BBox>& gts,
                           int top_k, double gamma) {
    if (grid.total == 0) {
        throw InputError("atss_assign: empty anchor grid");
    }
    if (top_k < 1) {
        throw ConfigError("atss_assign: top_k must be >= 1");
    }
    if (gamma < 0.0) {
        throw ConfigError("sela_assign: gamma must be >= 0");
    }

    AssignmentResult result = make_result(grid, gts.size());

    // chosen[a]: best (gt, iou) claim so far; earlier GT wins IoU ties.
    std::vector<int> chosen_gt(grid.total, -1);
    std::vector<double> chosen_iou(grid.total, 0.0);

    for (std::size_t g = 0; g < gts.size(); ++g) {
        const BBox& gt = gts[g];
        const Point gt_center = gt.center();

        std::vector<std::size_t> candidates;
        for (std::size_t lvl = 0; lvl < grid.levels.size(); ++lvl) {
            const AnchorLevel& level = grid.levels[lvl];
            const std::size_t offset = grid.level_offsets[lvl];
            std::vector<std::size_t> idx(level.centers.size());
            std::iota(idx.begin(), idx.end(), 0);
            std::vector<double> dist(level.centers.size());
            for (std::size_t i = 0; i < level.centers.size(); ++i) {
                const double dx = level.centers[i].x - gt_center.x;
                const double dy = level.centers[i].y - gt_center.y;
                dist[i] = dx * dx + dy * dy;
            }
            const std::size_t k = std::min<std::size_t>(static_cast<std::size_t>(top_k),
                                                        idx.size());
            std::partial_sort(idx.begin(), idx.begin() + k, idx.end(),
                              [&dist](std::size_t a, std::size_t b) {
                                  if (dist[a] != dist[b]) {
                                      return dist[a] < dist[b];
                                  }
                                  return a < b;
                              });
            for (std::size_t i = 0; i < k; ++i) {
                candidates.push_back(offset + idx[i]);
            }
        }

        std::vector<double> ious(candidates.size());
        for (std::size_t i = 0; i < candidates.size(); ++i) {
            ious[i] = iou(grid.box(candidates[i]), gt);
        }
        const double t = atss_threshold(ious);
        result.gt_threshold[g] = t;

        for (std::size_t i = 0; i < candidates.size(); ++i) {
            const std::size_t a = candidates[i];
            const Point& c = grid.center(a);
            const double relaxed =
                t - gamma * spatial_weight(c, grid.image_width, grid.image_height);
            if (ious[i] < relaxed || !center_inside(c, gt)) {
                continue;
            }
            if (chosen_gt[a] < 0 || ious[i] > chosen_iou[a]) {
                chosen_gt[a] = static_cast<int>(g);
                chosen_iou[a] = ious[i];
            }
        }
    }

    for (std::size_t a = 0; a < grid.total; ++a) {
        if (chosen_gt[a] >= 0) {
            result.labels[a] = chosen_gt[a];
        }
    }
    count_positives(result);
    return result;
}

void apply_keep_one(AssignmentResult& result, const AnchorGrid& grid,
                    const std::vector<BBox>& gts, HalfRegion region) {
    for (std::size_t g = 0; g < gts.size(); ++g) {
        if (!in_half(gts[g].center(), region, grid.image_width, grid.image_height)) {
            continue;
        }
        // Keep the highest-IoU positive anchor of this GT, demote the rest.
        std::size_t best = grid.total;
        double best_iou = -1.0;
        for (std::size_t a = 0; a < grid.total; ++a) {
            if (result.labels[a] != static_cast<int>(g)) {
                continue;
            }
            const double v = iou(grid.box(a), gts[g]);
            if (v > best_iou) {
                best = a;
                best_iou = v;
            }
        }
        for (std::size_t a = 0; a < grid.total; ++a) {
            if (result.labels[a] == static_cast<int>(g) && a != best) {
                result.labels[a] = AssignmentResult::kNegative;
                result.loss_weight[a] = 1.0;
            }
        }
    }
    count_positives(result);
}

BBox require_scene_bbox(const json& obj, const std::string& where) {
    auto it = obj.find("bbox");
    if (it == obj.end()) {
        throw SchemaError(where + ": missing key 'bbox'");
    }
    const json& v = *it;
    if (!v.is_array() || v.size() != 4) {
        throw SchemaError(where + ": key 'bbox' is not a 4-element array");
    }
    for (const auto& e : v) {
        if (!e.is_number()) {
            throw SchemaError(where + ": key 'bbox' has a non-numeric element");
        }
    }
    return BBox{v[0].get<double>(), v[1].get<double>(), v[2].get<double>(),
                v[3].get<double>()};
}

}  // namespace

const Point& AnchorGrid::center(std::size_t global_index) const {
    for (std::size_t lvl = 0; lvl < levels.size(); ++lvl) {
        const std::size_t offset = level_offsets[lvl];
        if (global_index < offset + levels[lvl].centers.size()) {
            return levels[lvl].centers[global_index - offset];
        }
    }
    throw InputError("AnchorGrid: anchor index out of range");
}

const BBox& AnchorGrid::box(std::size_t global_index) const {
    for (std::size_t lvl = 0; lvl < levels.size(); ++lvl) {
        const std::size_t offset = level_offsets[lvl];
        if (global_index < offset + levels[lvl].boxes.size()) {
            return levels[lvl].boxes[global_index - offset];
        }
    }
    throw InputError("AnchorGrid: anchor index out of range");
}

AnchorGrid AnchorGrid::build(double width, double height,
                             const std::vector<double>& strides, double scale) {
    if (!(width > 0.0) || !(height > 0.0)) {
        throw ConfigError("AnchorGrid: image size must be positive");
    }
    if (strides.empty()) {
        throw ConfigError("AnchorGrid: need at least one stride");
    }
    if (!(scale > 0.0)) {
        throw ConfigError("AnchorGrid: anchor scale must be positive");
    }
    AnchorGrid grid;
    grid.image_width = width;
    grid.image_height = height;
    for (double stride : strides) {
        if (!(stride > 0.0)) {
            throw ConfigError("AnchorGrid: strides must be positive");
        }
        AnchorLevel level;
        level.stride = stride;
        level.scale = scale;
        level.nx = static_cast<int>(std::ceil(width / stride));
        level.ny = static_cast<int>(std::ceil(height / stride));
        const double side = stride * scale;
        level.centers.reserve(static_cast<std::size_t>(level.nx) * level.ny);
        level.boxes.reserve(level.centers.capacity());
        for (int iy = 0; iy < level.ny; ++iy) {
            for (int ix = 0; ix < level.nx; ++ix) {
                const Point c{stride * ix, stride * iy};
                level.centers.push_back(c);
                level.boxes.push_back(BBox{c.x - side / 2.0, c.y - side / 2.0, side, side});
            }
        }
        grid.level_offsets.push_back(grid.total);
        grid.total += level.centers.size();
        grid.levels.push_back(std::move(level));
    }
    return grid;
}

double atss_threshold(const std::vector<double>& ious) {
    if (ious.empty()) {
        throw InputError("atss_threshold: no candidate IoUs");
    }
    const double n = static_cast<double>(ious.size());
    const double mean = std::accumulate(ious.begin(), ious.end(), 0.0) / n;
    double acc = 0.0;
    for (double v : ious) {
        acc += (v - mean) * (v - mean);
    }
    return mean + std::sqrt(acc / n);
}

AssignmentResult max_iou_assign(const AnchorGrid& grid, const std::vector<BBox>& gts,
                                double pos_thr, double neg_thr) {
    if (pos_thr < neg_thr) {
        throw ConfigError("max_iou_assign: pos_thr must be >= neg_thr");
    }
    if (!(pos_thr > 0.0) || !(pos_thr < 1.0) || !(neg_thr > 0.0) || !(neg_thr < 1.0)) {
        throw ConfigError("max_iou_assign: thresholds must lie in (0, 1)");
    }
    if (grid.total == 0) {
        throw InputError("max_iou_assign: empty anchor grid");
    }
    AssignmentResult result = make_result(grid, gts.size());

    for (std::size_t a = 0; a < grid.total; ++a) {
        int best = -1;
        double best_iou = 0.0;
        for (std::size_t g = 0; g < gts.size(); ++g) {
            const double v = iou(grid.box(a), gts[g]);
            if (best < 0 || v > best_iou) {
                best = static_cast<int>(g);
                best_iou = v;
            }
        }
        if (best < 0) {
            continue;  // no ground truth at all
        }
        if (best_iou >= pos_thr) {
            result.labels[a] = best;
        } else if (best_iou >= neg_thr) {
            result.labels[a] = AssignmentResult::kIgnore;
        }
    }

    // Low-quality rescue: every GT claims its best-overlap anchor; a later
    // GT's claim overwrites an earlier one.
    for (std::size_t g = 0; g < gts.size(); ++g) {
        std::size_t best = grid.total;
        double best_iou = 0.0;
        for (std::size_t a = 0; a < grid.total; ++a) {
            const double v = iou(grid.box(a), gts[g]);
            if (v > best_iou) {
                best = a;
                best_iou = v;
            }
        }
        if (best < grid.total) {
            result.labels[best] = static_cast<int>(g);
        }
    }
    count_positives(result);
    return result;
}

AssignmentResult atss_assign(const AnchorGrid& grid, const std::vector<BBox>& gts,
                             int top_k) {
    return atss_core(grid, gts, top_k, 0.0);
}

AssignmentResult sela_assign(const AnchorGrid& grid, const std::vector<BBox>& gts,
                             int top_k, double gamma) {
    return atss_core(grid, gts, top_k, gamma);
}

double sela_loss_weight(const Point& p, double width, double height, double gamma) {
    if (gamma < 0.0) {
        throw ConfigError("sela_loss_weight: gamma must be >= 0");
    }
    return 1.0 + gamma * spatial_weight(p, width, height);
}

AssignmentResult assign(const AnchorGrid& grid, const std::vector<BBox>& gts,
                        const AssignConfig& config) {
    std::vector<BBox> kept = gts;
    std::vector<std::size_t> kept_index(gts.size());
    std::iota(kept_index.begin(), kept_index.end(), 0);

    const bool discard = config.zone_filter.has_value() &&
                         config.zone_filter->mode == FilterMode::Discard;
    if (discard) {
        kept.clear();
        kept_index.clear();
        for (std::size_t g = 0; g < gts.size(); ++g) {
            if (!in_half(gts[g].center(), config.zone_filter->region, grid.image_width,
                         grid.image_height)) {
                kept.push_back(gts[g]);
                kept_index.push_back(g);
            }
        }
    }

    AssignmentResult result;
    switch (config.strategy) {
        case AssignStrategy::MaxIoU:
            result = max_iou_assign(grid, kept, config.pos_thr, config.neg_thr);
            break;
        case AssignStrategy::Atss:
            result = atss_assign(grid, kept, config.top_k);
            break;
        case AssignStrategy::SelaFreq:
            result = sela_assign(grid, kept, config.top_k, config.gamma);
            break;
        case AssignStrategy::SelaCost:
            if (config.gamma < 0.0) {
                throw ConfigError("assign: gamma must be >= 0");
            }
            result = atss_assign(grid, kept, config.top_k);
            for (std::size_t a = 0; a < grid.total; ++a) {
                if (result.labels[a] >= 0) {
                    result.loss_weight[a] = sela_loss_weight(
                        grid.center(a), grid.image_width, grid.image_height, config.gamma);
                }
            }
            break;
    }

    if (config.zone_filter.has_value() && config.zone_filter->mode == FilterMode::KeepOne) {
        apply_keep_one(result, grid, kept, config.zone_filter->region);
    }

    if (discard) {
        // Re-index per-GT arrays back onto the original list; discarded GTs
        // keep zero positives and an undefined threshold.
        AssignmentResult remapped = result;
        remapped.positives_per_gt.assign(gts.size(), 0);
        remapped.gt_threshold.assign(gts.size(), std::nan(""));
        for (std::size_t k = 0; k < kept_index.size(); ++k) {
            remapped.positives_per_gt[kept_index[k]] = result.positives_per_gt[k];
            remapped.gt_threshold[kept_index[k]] = result.gt_threshold[k];
        }
        for (std::size_t a = 0; a < remapped.labels.size(); ++a) {
            if (remapped.labels[a] >= 0) {
                remapped.labels[a] =
                    static_cast<int>(kept_index[static_cast<std::size_t>(remapped.labels[a])]);
            }
        }
        return remapped;
    }
    return result;
}

ZoneSamplingStats assignment_zone_stats(const AssignmentResult& result,
                                        const std::vector<BBox>& gts,
                                        const std::vector<Zone>& zones) {
    validate_partition(zones);
    if (result.positives_per_gt.size() != gts.size()) {
        throw InputError("assignment_zone_stats: result does not match the GT list");
    }
    ZoneSamplingStats stats;
    stats.zones = zones;
    stats.gt_count.assign(zones.size(), 0);
    stats.positives.assign(zones.size(), 0);
    stats.mean_positives_per_gt.assign(zones.size(), std::nullopt);
    for (std::size_t g = 0; g < gts.size(); ++g) {
        const std::size_t z = partition_index(zones, gts[g].center(), result.image_width,
                                              result.image_height);
        ++stats.gt_count[z];
        stats.positives[z] += result.positives_per_gt[g];
    }
    for (std::size_t z = 0; z < zones.size(); ++z) {
        if (stats.gt_count[z] > 0) {
            stats.mean_positives_per_gt[z] =
                static_cast<double>(stats.positives[z]) / static_cast<double>(stats.gt_count[z]);
        }
    }
    return stats;
}

AnchorGrid Scene::build_grid() const {
    return AnchorGrid::build(width, height, strides, scale);
}

Scene parse_scene(const std::string& json_text) {
    json root;
    try {
        root = json::parse(json_text);
    } catch (const json::parse_error& e) {
        throw ParseError("scene: JSON parse error at byte " + std::to_string(e.byte) + ": " +
                         e.what());
    }
    if (!root.is_object()) {
        throw SchemaError("scene: top level is not an object");
    }
    Scene scene;
    auto image = root.find("image");
    if (image == root.end() || !image->is_object()) {
        throw SchemaError("scene: missing key 'image'");
    }
    if (!image->contains("width") || !image->contains("height") ||
        !(*image)["width"].is_number() || !(*image)["height"].is_number()) {
        throw SchemaError("scene: image needs numeric 'width' and 'height'");
    }
    scene.width = (*image)["width"].get<double>();
    scene.height = (*image)["height"].get<double>();
    if (!(scene.width > 0.0) || !(scene.height > 0.0)) {
        throw RangeError("scene: image size must be positive");
    }

    if (auto anchors = root.find("anchors"); anchors != root.end()) {
        if (!anchors->is_object()) {
            throw SchemaError("scene: key 'anchors' is not an object");
        }
        if (auto strides = anchors->find("strides"); strides != anchors->end()) {
            if (!strides->is_array() || strides->empty()) {
                throw SchemaError("scene: anchors.strides is not a non-empty array");
            }
            scene.strides.clear();
            for (const auto& s : *strides) {
                if (!s.is_number() || !(s.get<double>() > 0.0)) {
                    throw SchemaError("scene: anchors.strides must be positive numbers");
                }
                scene.strides.push_back(s.get<double>());
            }
        }
        if (auto scale = anchors->find("scale"); scale != anchors->end()) {
            if (!scale->is_number() || !(scale->get<double>() > 0.0)) {
                throw SchemaError("scene: anchors.scale must be a positive number");
            }
            scene.scale = scale->get<double>();
        }
    }

    auto gts = root.find("gts");
    if (gts == root.end() || !gts->is_array()) {
        throw SchemaError("scene: missing key 'gts'");
    }
    for (std::size_t i = 0; i < gts->size(); ++i) {
        const std::string where = "gts[" + std::to_string(i) + "]";
        const BBox box = require_scene_bbox((*gts)[i], where);
        if (!box.valid()) {
            throw RangeError(where + ": box must have positive size");
        }
        const Point c = box.center();
        if (c.x < 0.0 || c.x > scene.width || c.y < 0.0 || c.y > scene.height) {
            throw RangeError(where + ": box center must lie inside the image");
        }
        scene.gts.push_back(box);
    }
    return scene;
}

Scene load_scene(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoError("cannot open file: " + path);
    }
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_scene(buf.str());
}

}  // namespace zoneval
