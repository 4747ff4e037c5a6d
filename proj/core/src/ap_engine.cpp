#include "zoneval/ap_engine.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <set>
#include <unordered_map>

#include "parallel.hpp"
#include "zoneval/errors.hpp"

namespace zoneval {

namespace {

// overlap[d][g]: IoU against non-crowd GTs, intersection-over-detection
// against crowd regions.
std::vector<std::vector<double>> overlap_matrix(const std::vector<Detection>& dets,
                                                const std::vector<GtObject>& gts) {
    std::vector<std::vector<double>> m(dets.size(), std::vector<double>(gts.size(), 0.0));
    for (std::size_t d = 0; d < dets.size(); ++d) {
        for (std::size_t g = 0; g < gts.size(); ++g) {
            m[d][g] = gts[g].is_crowd
                          ? intersection_over_detection(dets[d].bbox, gts[g].bbox)
                          : iou(dets[d].bbox, gts[g].bbox);
        }
    }
    return m;
}

std::vector<MatchRecord> match_with_overlaps(const std::vector<Detection>& dets,
                                             const std::vector<GtObject>& gts,
                                             const std::vector<std::vector<double>>& overlaps,
                                             double iou_thr) {
    std::vector<MatchRecord> records(dets.size());
    std::vector<char> gt_taken(gts.size(), 0);
    for (std::size_t d = 0; d < dets.size(); ++d) {
        MatchRecord& rec = records[d];
        rec.det_index = static_cast<int>(d);
        rec.score = dets[d].score;

        // Best unmatched non-crowd GT with IoU >= threshold; ties keep the
        // earlier GT.
        int best = -1;
        double best_overlap = 0.0;
        for (std::size_t g = 0; g < gts.size(); ++g) {
            if (gts[g].is_crowd || gt_taken[g]) {
                continue;
            }
            const double ov = overlaps[d][g];
            if (ov < iou_thr) {
                continue;
            }
            if (best < 0 || ov > best_overlap) {
                best = static_cast<int>(g);
                best_overlap = ov;
            }
        }
        if (best >= 0) {
            gt_taken[static_cast<std::size_t>(best)] = 1;
            rec.matched = true;
            rec.matched_gt = gts[static_cast<std::size_t>(best)].id;
            continue;
        }
        // Crowd fallback; crowds absorb any number of detections.
        for (std::size_t g = 0; g < gts.size(); ++g) {
            if (gts[g].is_crowd && overlaps[d][g] >= iou_thr) {
                rec.ignored = true;
                break;
            }
        }
    }
    return records;
}

void require_score_sorted(const std::vector<MatchRecord>& records) {
    for (std::size_t i = 1; i < records.size(); ++i) {
        if (records[i - 1].score < records[i].score) {
            throw ContractViolation("average_precision: records not score-sorted");
        }
    }
}

constexpr int kRecallPoints = 101;

}  // namespace

std::vector<MatchRecord> match_detections(const std::vector<Detection>& dets,
                                          const std::vector<GtObject>& gts,
                                          double iou_thr) {
    for (std::size_t i = 1; i < dets.size(); ++i) {
        if (dets[i - 1].score < dets[i].score) {
            throw ContractViolation("match_detections: detections not score-sorted");
        }
    }
    if (!dets.empty()) {
        const std::int64_t img = dets.front().image_id;
        const std::int64_t cat = dets.front().category_id;
        for (const Detection& d : dets) {
            if (d.image_id != img || d.category_id != cat) {
                throw ContractViolation("match_detections: mixed image/category pool");
            }
        }
        for (const GtObject& g : gts) {
            if (g.image_id != img || g.category_id != cat) {
                throw ContractViolation("match_detections: mixed image/category pool");
            }
        }
    }
    return match_with_overlaps(dets, gts, overlap_matrix(dets, gts), iou_thr);
}

std::optional<PrCurve> average_precision(const std::vector<MatchRecord>& matches,
                                         std::int64_t n_gt) {
    if (n_gt < 0) {
        throw InputError("average_precision: negative ground-truth count");
    }
    if (n_gt == 0) {
        return std::nullopt;
    }
    require_score_sorted(matches);

    std::vector<double> recall;
    std::vector<double> precision;
    recall.reserve(matches.size());
    precision.reserve(matches.size());
    std::int64_t tp = 0;
    std::int64_t fp = 0;
    for (const MatchRecord& m : matches) {
        if (m.ignored) {
            continue;
        }
        m.matched ? ++tp : ++fp;
        recall.push_back(static_cast<double>(tp) / static_cast<double>(n_gt));
        precision.push_back(static_cast<double>(tp) / static_cast<double>(tp + fp));
    }

    // Right-to-left precision envelope.
    for (std::size_t i = precision.size(); i > 1; --i) {
        precision[i - 2] = std::max(precision[i - 2], precision[i - 1]);
    }

    PrCurve curve;
    curve.recall_grid.resize(kRecallPoints);
    curve.precision.assign(kRecallPoints, 0.0);
    double sum = 0.0;
    for (int i = 0; i < kRecallPoints; ++i) {
        const double r = static_cast<double>(i) / 100.0;
        curve.recall_grid[i] = r;
        const auto it = std::lower_bound(recall.begin(), recall.end(), r);
        if (it != recall.end()) {
            curve.precision[i] = precision[static_cast<std::size_t>(it - recall.begin())];
        }
        sum += curve.precision[i];
    }
    curve.ap = sum / kRecallPoints;
    return curve;
}

std::vector<double> coco_iou_thresholds() {
    std::vector<double> thrs;
    thrs.reserve(10);
    for (int i = 50; i <= 95; i += 5) {
        thrs.push_back(static_cast<double>(i) / 100.0);
    }
    return thrs;
}

EvalOptions default_eval_options() {
    EvalOptions opt;
    opt.iou_thresholds = coco_iou_thresholds();
    return opt;
}

ZoneMetrics evaluate_zone(const DetectionDataset& ds, const DetectionSet& dets,
                          const Zone& zone, const EvalOptions& opt) {
    if (opt.iou_thresholds.empty()) {
        throw InputError("evaluate_zone: empty IoU threshold set");
    }
    for (double t : opt.iou_thresholds) {
        if (!(t > 0.0) || !(t < 1.0)) {
            throw InputError("evaluate_zone: IoU thresholds must lie in (0, 1)");
        }
    }
    if (opt.max_dets < 1) {
        throw InputError("evaluate_zone: max_dets must be >= 1");
    }

    std::unordered_map<std::int64_t, const ImageInfo*> image_by_id;
    std::vector<std::int64_t> image_ids;
    image_ids.reserve(ds.images.size());
    for (const ImageInfo& im : ds.images) {
        image_by_id.emplace(im.id, &im);
        image_ids.push_back(im.id);
    }
    std::sort(image_ids.begin(), image_ids.end());

    ZoneMetrics out;
    out.zone = zone;
    out.thresholds = opt.iou_thresholds;
    out.mzp.assign(opt.iou_thresholds.size(), std::nullopt);

    // Zone-filtered ground truth, grouped by (image, category). Crowd
    // objects stay in for ignore-matching but never count toward n_gt.
    using Key = DetectionSet::Key;
    std::map<Key, std::vector<GtObject>> zone_gts;
    std::map<std::int64_t, std::int64_t> gt_per_category;
    for (const GtObject& gt : ds.annotations) {
        const ImageInfo* im = image_by_id.at(gt.image_id);
        if (!zone.contains(gt.bbox.center(), im->width, im->height)) {
            continue;
        }
        zone_gts[{gt.image_id, gt.category_id}].push_back(gt);
        if (!gt.is_crowd) {
            ++gt_per_category[gt.category_id];
            ++out.n_gt;
        }
    }

    // Zone-filtered detections with the per-image cap applied across
    // categories (top scores survive; ties keep canonical order).
    std::map<Key, std::vector<Detection>> zone_dets;
    for (std::int64_t img : image_ids) {
        std::vector<Detection> pooled;
        const ImageInfo* im = image_by_id.at(img);
        for (auto it = dets.groups.lower_bound({img, std::numeric_limits<std::int64_t>::min()});
             it != dets.groups.end() && it->first.first == img; ++it) {
            for (const Detection& d : it->second) {
                if (zone.contains(d.bbox.center(), im->width, im->height)) {
                    pooled.push_back(d);
                }
            }
        }
        if (pooled.size() > static_cast<std::size_t>(opt.max_dets)) {
            std::stable_sort(pooled.begin(), pooled.end(),
                             [](const Detection& a, const Detection& b) {
                                 return a.score > b.score;
                             });
            pooled.resize(static_cast<std::size_t>(opt.max_dets));
        }
        out.n_det += static_cast<std::int64_t>(pooled.size());
        for (const Detection& d : pooled) {
            zone_dets[{img, d.category_id}].push_back(d);
        }
    }

    // One matching task per (image, category) pool of a defined category.
    struct Task {
        Key key;
        const std::vector<Detection>* dets;
        const std::vector<GtObject>* gts;
    };
    static const std::vector<Detection> kNoDets;
    static const std::vector<GtObject> kNoGts;
    std::set<Key> keys;
    for (const auto& [key, v] : zone_gts) {
        keys.insert(key);
    }
    for (const auto& [key, v] : zone_dets) {
        keys.insert(key);
    }
    std::vector<Task> tasks;
    for (const Key& key : keys) {
        if (gt_per_category.find(key.second) == gt_per_category.end()) {
            continue;  // category has no zone GT anywhere: undefined
        }
        auto git = zone_gts.find(key);
        auto dit = zone_dets.find(key);
        tasks.push_back(Task{key, dit == zone_dets.end() ? &kNoDets : &dit->second,
                             git == zone_gts.end() ? &kNoGts : &git->second});
    }

    const std::size_t n_thr = opt.iou_thresholds.size();
    std::vector<std::vector<std::vector<MatchRecord>>> task_records(tasks.size());
    detail::parallel_for(tasks.size(), opt.threads, [&](std::size_t i) {
        const Task& task = tasks[i];
        const auto overlaps = overlap_matrix(*task.dets, *task.gts);
        task_records[i].resize(n_thr);
        for (std::size_t t = 0; t < n_thr; ++t) {
            task_records[i][t] =
                match_with_overlaps(*task.dets, *task.gts, overlaps, opt.iou_thresholds[t]);
        }
    });

    // Pool per category (tasks are already in (image, category) order) and
    // reduce deterministically.
    std::vector<std::optional<double>> mzp_sum(n_thr, std::nullopt);
    std::vector<double> ap_sum(n_thr, 0.0);
    std::int64_t defined_categories = 0;
    for (const Category& cat : ds.categories) {
        auto git = gt_per_category.find(cat.id);
        if (git == gt_per_category.end()) {
            continue;
        }
        ++defined_categories;
        for (std::size_t t = 0; t < n_thr; ++t) {
            std::vector<MatchRecord> pooled;
            for (std::size_t i = 0; i < tasks.size(); ++i) {
                if (tasks[i].key.second != cat.id) {
                    continue;
                }
                const auto& recs = task_records[i][t];
                pooled.insert(pooled.end(), recs.begin(), recs.end());
            }
            std::stable_sort(pooled.begin(), pooled.end(),
                             [](const MatchRecord& a, const MatchRecord& b) {
                                 return a.score > b.score;
                             });
            const auto curve = average_precision(pooled, git->second);
            ap_sum[t] += curve->ap;
        }
    }

    if (defined_categories > 0) {
        double zp_sum = 0.0;
        for (std::size_t t = 0; t < n_thr; ++t) {
            const double mzp = ap_sum[t] / static_cast<double>(defined_categories);
            out.mzp[t] = mzp;
            zp_sum += mzp;
        }
        out.zp = zp_sum / static_cast<double>(n_thr);
        for (std::size_t t = 0; t < n_thr; ++t) {
            if (std::abs(opt.iou_thresholds[t] - 0.50) < 1e-9) {
                out.zp50 = out.mzp[t];
            }
            if (std::abs(opt.iou_thresholds[t] - 0.75) < 1e-9) {
                out.zp75 = out.mzp[t];
            }
        }
    }
    return out;
}

}  // namespace zoneval
