#include "zoneval/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include <json.hpp>

#include "zoneval/errors.hpp"

namespace zoneval {

namespace {

using nlohmann::json;

json parse_json(const std::string& text, const std::string& source) {
    try {
        return json::parse(text);
    } catch (const json::parse_error& e) {
        throw ParseError(source + ": JSON parse error at byte " + std::to_string(e.byte) +
                         ": " + e.what());
    }
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoError("cannot open file: " + path);
    }
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

const json& require_key(const json& obj, const char* key, const std::string& where) {
    auto it = obj.find(key);
    if (it == obj.end()) {
        throw SchemaError(where + ": missing key '" + key + "'");
    }
    return *it;
}

double require_number(const json& obj, const char* key, const std::string& where) {
    const json& v = require_key(obj, key, where);
    if (!v.is_number()) {
        throw SchemaError(where + ": key '" + key + "' is not a number");
    }
    return v.get<double>();
}

std::int64_t require_int(const json& obj, const char* key, const std::string& where) {
    const json& v = require_key(obj, key, where);
    if (!v.is_number_integer()) {
        throw SchemaError(where + ": key '" + key + "' is not an integer");
    }
    return v.get<std::int64_t>();
}

BBox require_bbox(const json& obj, const std::string& where) {
    const json& v = require_key(obj, "bbox", where);
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

// Clamps `box` into [0,W]x[0,H]; boxes already inside are left bitwise
// untouched. Returns false when nothing remains.
bool clamp_bbox(BBox& box, double width, double height, bool* changed) {
    const double x1 = std::clamp(box.x, 0.0, width);
    const double y1 = std::clamp(box.y, 0.0, height);
    const double x2 = std::clamp(box.x + box.w, 0.0, width);
    const double y2 = std::clamp(box.y + box.h, 0.0, height);
    *changed = x1 != box.x || y1 != box.y || x2 != box.x + box.w || y2 != box.y + box.h;
    if (*changed) {
        box = BBox{x1, y1, x2 - x1, y2 - y1};
    }
    return box.w > 0.0 && box.h > 0.0;
}

std::string offenders_to_string(const std::set<std::int64_t>& ids) {
    std::string out;
    for (std::int64_t id : ids) {
        if (!out.empty()) {
            out += ", ";
        }
        out += std::to_string(id);
    }
    return out;
}

}  // namespace

const ImageInfo* DetectionDataset::find_image(std::int64_t id) const {
    for (const ImageInfo& im : images) {
        if (im.id == id) {
            return &im;
        }
    }
    return nullptr;
}

bool DetectionDataset::has_category(std::int64_t id) const {
    return std::any_of(categories.begin(), categories.end(),
                       [id](const Category& c) { return c.id == id; });
}

std::size_t DetectionSet::size() const {
    std::size_t n = 0;
    for (const auto& [key, dets] : groups) {
        n += dets.size();
    }
    return n;
}

DetectionDataset parse_ground_truth(const std::string& json_text) {
    const json root = parse_json(json_text, "ground truth");
    if (!root.is_object()) {
        throw SchemaError("ground truth: top level is not an object");
    }

    DetectionDataset ds;
    std::unordered_map<std::int64_t, const ImageInfo*> image_by_id;
    std::unordered_set<std::int64_t> category_ids;

    const json& images = require_key(root, "images", "ground truth");
    if (!images.is_array()) {
        throw SchemaError("ground truth: key 'images' is not an array");
    }
    ds.images.reserve(images.size());
    for (std::size_t i = 0; i < images.size(); ++i) {
        const std::string where = "images[" + std::to_string(i) + "]";
        const json& im = images[i];
        ImageInfo info;
        info.id = require_int(im, "id", where);
        info.width = require_number(im, "width", where);
        info.height = require_number(im, "height", where);
        if (!(info.width > 0.0) || !(info.height > 0.0)) {
            throw RangeError(where + ": image size must be positive");
        }
        if (image_by_id.count(info.id)) {
            throw IntegrityError("ground truth: duplicate image id " + std::to_string(info.id));
        }
        ds.images.push_back(info);
        image_by_id.emplace(info.id, nullptr);
    }
    for (const ImageInfo& im : ds.images) {
        image_by_id[im.id] = &im;
    }

    const json& categories = require_key(root, "categories", "ground truth");
    if (!categories.is_array()) {
        throw SchemaError("ground truth: key 'categories' is not an array");
    }
    ds.categories.reserve(categories.size());
    for (std::size_t i = 0; i < categories.size(); ++i) {
        const std::string where = "categories[" + std::to_string(i) + "]";
        const json& c = categories[i];
        Category cat;
        cat.id = require_int(c, "id", where);
        const json& name = require_key(c, "name", where);
        if (!name.is_string()) {
            throw SchemaError(where + ": key 'name' is not a string");
        }
        cat.name = name.get<std::string>();
        if (!category_ids.insert(cat.id).second) {
            throw IntegrityError("ground truth: duplicate category id " + std::to_string(cat.id));
        }
        ds.categories.push_back(std::move(cat));
    }

    const json& anns = require_key(root, "annotations", "ground truth");
    if (!anns.is_array()) {
        throw SchemaError("ground truth: key 'annotations' is not an array");
    }
    std::set<std::int64_t> bad_images;
    std::set<std::int64_t> bad_categories;
    ds.annotations.reserve(anns.size());
    for (std::size_t i = 0; i < anns.size(); ++i) {
        const std::string where = "annotations[" + std::to_string(i) + "]";
        const json& a = anns[i];
        GtObject gt;
        gt.id = require_int(a, "id", where);
        gt.image_id = require_int(a, "image_id", where);
        gt.category_id = require_int(a, "category_id", where);
        gt.bbox = require_bbox(a, where);
        const json& crowd = require_key(a, "iscrowd", where);
        if (crowd.is_boolean()) {
            gt.is_crowd = crowd.get<bool>();
        } else if (crowd.is_number_integer()) {
            gt.is_crowd = crowd.get<std::int64_t>() != 0;
        } else {
            throw SchemaError(where + ": key 'iscrowd' is not 0/1 or bool");
        }

        auto img = image_by_id.find(gt.image_id);
        if (img == image_by_id.end()) {
            bad_images.insert(gt.image_id);
            continue;
        }
        if (!category_ids.count(gt.category_id)) {
            bad_categories.insert(gt.category_id);
            continue;
        }
        bool changed = false;
        if (!clamp_bbox(gt.bbox, img->second->width, img->second->height, &changed)) {
            ++ds.stats.dropped;
            continue;
        }
        if (changed) {
            ++ds.stats.clamped;
        }
        ds.annotations.push_back(gt);
    }
    if (!bad_images.empty()) {
        throw IntegrityError("ground truth: annotations reference unknown image_id(s): " +
                             offenders_to_string(bad_images));
    }
    if (!bad_categories.empty()) {
        throw IntegrityError("ground truth: annotations reference unknown category_id(s): " +
                             offenders_to_string(bad_categories));
    }
    return ds;
}

DetectionDataset load_ground_truth(const std::string& path) {
    return parse_ground_truth(read_file(path));
}

std::string serialize_ground_truth(const DetectionDataset& ds) {
    nlohmann::ordered_json root;
    root["images"] = json::array();
    for (const ImageInfo& im : ds.images) {
        root["images"].push_back({{"id", im.id}, {"width", im.width}, {"height", im.height}});
    }
    root["categories"] = json::array();
    for (const Category& c : ds.categories) {
        root["categories"].push_back({{"id", c.id}, {"name", c.name}});
    }
    root["annotations"] = json::array();
    for (const GtObject& a : ds.annotations) {
        root["annotations"].push_back({{"id", a.id},
                                       {"image_id", a.image_id},
                                       {"category_id", a.category_id},
                                       {"bbox", {a.bbox.x, a.bbox.y, a.bbox.w, a.bbox.h}},
                                       {"iscrowd", a.is_crowd ? 1 : 0}});
    }
    return root.dump(2);
}

DetectionSet parse_detections(const std::string& json_text, const DetectionDataset& ds) {
    const json root = parse_json(json_text, "detections");
    if (!root.is_array()) {
        throw SchemaError("detections: top level is not an array");
    }

    std::unordered_map<std::int64_t, const ImageInfo*> image_by_id;
    for (const ImageInfo& im : ds.images) {
        image_by_id.emplace(im.id, &im);
    }
    std::unordered_set<std::int64_t> category_ids;
    for (const Category& c : ds.categories) {
        category_ids.insert(c.id);
    }

    DetectionSet out;
    std::set<std::int64_t> bad_images;
    std::set<std::int64_t> bad_categories;
    for (std::size_t i = 0; i < root.size(); ++i) {
        const std::string where = "detections[" + std::to_string(i) + "]";
        const json& d = root[i];
        Detection det;
        det.image_id = require_int(d, "image_id", where);
        det.category_id = require_int(d, "category_id", where);
        det.bbox = require_bbox(d, where);
        det.score = require_number(d, "score", where);
        if (!std::isfinite(det.score) || det.score < 0.0 || det.score > 1.0) {
            throw RangeError(where + ": score outside [0, 1]");
        }

        auto img = image_by_id.find(det.image_id);
        if (img == image_by_id.end()) {
            bad_images.insert(det.image_id);
            continue;
        }
        if (!category_ids.count(det.category_id)) {
            bad_categories.insert(det.category_id);
            continue;
        }
        bool changed = false;
        if (!clamp_bbox(det.bbox, img->second->width, img->second->height, &changed)) {
            ++out.stats.dropped;
            continue;
        }
        if (changed) {
            ++out.stats.clamped;
        }
        out.groups[{det.image_id, det.category_id}].push_back(det);
    }
    if (!bad_images.empty()) {
        throw IntegrityError("detections reference unknown image_id(s): " +
                             offenders_to_string(bad_images));
    }
    if (!bad_categories.empty()) {
        throw IntegrityError("detections reference unknown category_id(s): " +
                             offenders_to_string(bad_categories));
    }
    for (auto& [key, dets] : out.groups) {
        std::stable_sort(dets.begin(), dets.end(),
                         [](const Detection& a, const Detection& b) { return a.score > b.score; });
    }
    return out;
}

DetectionSet load_detections(const std::string& path, const DetectionDataset& ds) {
    return parse_detections(read_file(path), ds);
}

DetectionSet make_detection_set(const std::vector<Detection>& detections,
                                const DetectionDataset& ds) {
    std::unordered_set<std::int64_t> image_ids;
    for (const ImageInfo& im : ds.images) {
        image_ids.insert(im.id);
    }
    std::unordered_set<std::int64_t> category_ids;
    for (const Category& c : ds.categories) {
        category_ids.insert(c.id);
    }
    DetectionSet out;
    std::set<std::int64_t> bad_images;
    std::set<std::int64_t> bad_categories;
    for (const Detection& det : detections) {
        if (!std::isfinite(det.score) || det.score < 0.0 || det.score > 1.0) {
            throw RangeError("make_detection_set: score outside [0, 1]");
        }
        if (!image_ids.count(det.image_id)) {
            bad_images.insert(det.image_id);
            continue;
        }
        if (!category_ids.count(det.category_id)) {
            bad_categories.insert(det.category_id);
            continue;
        }
        out.groups[{det.image_id, det.category_id}].push_back(det);
    }
    if (!bad_images.empty()) {
        throw IntegrityError("detections reference unknown image_id(s): " +
                             offenders_to_string(bad_images));
    }
    if (!bad_categories.empty()) {
        throw IntegrityError("detections reference unknown category_id(s): " +
                             offenders_to_string(bad_categories));
    }
    for (auto& [key, dets] : out.groups) {
        std::stable_sort(dets.begin(), dets.end(),
                         [](const Detection& a, const Detection& b) { return a.score > b.score; });
    }
    return out;
}

DistributionCounts object_distribution(const DetectionDataset& ds,
                                       const std::vector<Zone>& zones) {
    validate_partition(zones);
    std::unordered_map<std::int64_t, const ImageInfo*> image_by_id;
    for (const ImageInfo& im : ds.images) {
        image_by_id.emplace(im.id, &im);
    }

    DistributionCounts counts;
    counts.per_zone.assign(zones.size(), 0);
    for (const Category& c : ds.categories) {
        counts.per_category[c.id].assign(zones.size(), 0);
    }
    for (const GtObject& gt : ds.annotations) {
        if (gt.is_crowd) {
            continue;
        }
        const ImageInfo* im = image_by_id.at(gt.image_id);
        const std::size_t idx =
            partition_index(zones, gt.bbox.center(), im->width, im->height);
        ++counts.per_zone[idx];
        ++counts.per_category[gt.category_id][idx];
        ++counts.total;
    }
    return counts;
}

}  // namespace zoneval
