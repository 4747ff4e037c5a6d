// zoneval: zone-restricted evaluation for object detection plus a
// label-assignment simulator. See README.md for the file formats.
#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "zoneval/assigners.hpp"
#include "zoneval/dataset.hpp"
#include "zoneval/errors.hpp"
#include "zoneval/stats.hpp"
#include "zoneval/version.hpp"
#include "zoneval/zone_eval.hpp"

namespace {

using namespace zoneval;

struct RunConfig {
    std::string mode;
    std::string gt_path;
    std::string det_path;
    std::string scene_path;
    int zones = 5;
    std::string grid_spec;
    std::string sweep_spec;
    std::string iou_spec = "0.5:0.05:0.95";
    int max_dets = 100;
    std::string assigner = "atss";
    int top_k = 9;
    double gamma = 0.0;
    double pos_thr = 0.5;
    double neg_thr = 0.4;
    std::string zone_filter;
    std::string out = "report";
    std::string format = "json";
    int threads = 0;  // 0: machine parallelism
};

double snap(double v) {
    return std::round(v * 1e6) / 1e6;
}

std::vector<double> parse_iou_spec(const std::string& spec) {
    std::vector<double> values;
    const auto colon = std::count(spec.begin(), spec.end(), ':');
    try {
        if (colon == 2) {
            const auto c1 = spec.find(':');
            const auto c2 = spec.find(':', c1 + 1);
            const double start = snap(std::stod(spec.substr(0, c1)));
            const double step = snap(std::stod(spec.substr(c1 + 1, c2 - c1 - 1)));
            const double stop = snap(std::stod(spec.substr(c2 + 1)));
            if (!(step > 0.0) || stop < start) {
                throw ConfigError("--iou: bad range '" + spec + "'");
            }
            for (int i = 0;; ++i) {
                const double v = snap(start + i * step);
                if (v > stop + 1e-9) {
                    break;
                }
                values.push_back(v);
            }
        } else if (colon == 0) {
            std::size_t pos = 0;
            while (pos <= spec.size()) {
                const auto comma = spec.find(',', pos);
                const std::string tok =
                    spec.substr(pos, comma == std::string::npos ? comma : comma - pos);
                if (!tok.empty()) {
                    values.push_back(snap(std::stod(tok)));
                }
                if (comma == std::string::npos) {
                    break;
                }
                pos = comma + 1;
            }
        } else {
            throw ConfigError("--iou: expected 'a:step:b' or a comma list, got '" + spec + "'");
        }
    } catch (const std::invalid_argument&) {
        throw ConfigError("--iou: cannot parse '" + spec + "'");
    } catch (const std::out_of_range&) {
        throw ConfigError("--iou: cannot parse '" + spec + "'");
    }
    if (values.empty()) {
        throw ConfigError("--iou: empty threshold list");
    }
    for (double v : values) {
        if (!(v > 0.0) || !(v < 1.0)) {
            throw ConfigError("--iou: thresholds must lie in (0, 1)");
        }
    }
    return values;
}

std::pair<int, int> parse_grid_spec(const std::string& spec) {
    const auto x = spec.find('x');
    if (x == std::string::npos) {
        throw ConfigError("--grid: expected RxC, got '" + spec + "'");
    }
    try {
        const int rows = std::stoi(spec.substr(0, x));
        const int cols = std::stoi(spec.substr(x + 1));
        if (rows < 1 || cols < 1) {
            throw ConfigError("--grid: rows and cols must be >= 1");
        }
        return {rows, cols};
    } catch (const std::invalid_argument&) {
        throw ConfigError("--grid: cannot parse '" + spec + "'");
    } catch (const std::out_of_range&) {
        throw ConfigError("--grid: cannot parse '" + spec + "'");
    }
}

std::vector<std::pair<double, double>> parse_sweep_spec(const std::string& spec) {
    std::vector<std::pair<double, double>> pairs;
    std::size_t pos = 0;
    while (pos < spec.size()) {
        auto comma = spec.find(',', pos);
        if (comma == std::string::npos) {
            comma = spec.size();
        }
        const std::string tok = spec.substr(pos, comma - pos);
        const auto colon = tok.find(':');
        if (colon == std::string::npos) {
            throw ConfigError("--sweep: expected ri:rj pairs, got '" + tok + "'");
        }
        try {
            pairs.emplace_back(std::stod(tok.substr(0, colon)), std::stod(tok.substr(colon + 1)));
        } catch (const std::invalid_argument&) {
            throw ConfigError("--sweep: cannot parse '" + tok + "'");
        } catch (const std::out_of_range&) {
            throw ConfigError("--sweep: cannot parse '" + tok + "'");
        }
        pos = comma + 1;
    }
    if (pairs.empty()) {
        throw ConfigError("--sweep: empty sweep list");
    }
    return pairs;
}

std::optional<ZoneFilter> parse_zone_filter(const std::string& spec) {
    if (spec.empty()) {
        return std::nullopt;
    }
    const auto colon = spec.find(':');
    if (colon == std::string::npos) {
        throw ConfigError("--zone-filter: expected MODE:REGION, got '" + spec + "'");
    }
    const std::string mode = spec.substr(0, colon);
    const std::string region = spec.substr(colon + 1);
    ZoneFilter filter;
    if (mode == "discard") {
        filter.mode = FilterMode::Discard;
    } else if (mode == "keep1") {
        filter.mode = FilterMode::KeepOne;
    } else {
        throw ConfigError("--zone-filter: mode must be discard or keep1");
    }
    if (region == "left") {
        filter.region = HalfRegion::Left;
    } else if (region == "right") {
        filter.region = HalfRegion::Right;
    } else if (region == "top") {
        filter.region = HalfRegion::Top;
    } else if (region == "bottom") {
        filter.region = HalfRegion::Bottom;
    } else {
        throw ConfigError("--zone-filter: region must be left/right/top/bottom");
    }
    return filter;
}

void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw IoError("cannot write file: " + path);
    }
    out << content;
    if (!out) {
        throw IoError("write failed: " + path);
    }
}

std::string pct(const std::optional<double>& v) {
    if (!v.has_value()) {
        return "-";
    }
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.1f", *v * 100.0);
    return buf;
}

std::string pct_var(const std::optional<double>& v) {
    if (!v.has_value()) {
        return "-";
    }
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.1f", *v * 1e4);
    return buf;
}

void print_zone_table(const ZoneReport& report) {
    std::printf("%-14s %-13s %7s %6s %6s %7s %7s %7s\n", "zone", "range", "area", "n_gt",
                "n_det", "ZP", "ZP50", "ZP75");
    auto row = [](const ZoneMetrics& m, const char* name) {
        char range[32];
        std::snprintf(range, sizeof(range), "(%.2f,%.2f)", m.zone.r_inner, m.zone.r_outer);
        std::printf("%-14s %-13s %7.3f %6lld %6lld %7s %7s %7s\n", name, range,
                    m.zone.normalized_area, static_cast<long long>(m.n_gt),
                    static_cast<long long>(m.n_det), pct(m.zp).c_str(), pct(m.zp50).c_str(),
                    pct(m.zp75).c_str());
    };
    for (const auto& m : report.zones) {
        row(m, m.zone.label().c_str());
    }
    row(report.traditional, "full");
    std::printf("SP %s   SP75 %s   Variance %s   Variance75 %s   (x100; variance x10^4)\n",
                pct(report.sp).c_str(), pct(report.sp75).c_str(),
                pct_var(report.variance).c_str(), pct_var(report.variance75).c_str());
}

ConfigEntries resolved_config(const RunConfig& cfg) {
    ConfigEntries entries;
    entries.emplace_back("mode", cfg.mode);
    auto add = [&entries](const char* key, const std::string& value) {
        if (!value.empty()) {
            entries.emplace_back(key, value);
        }
    };
    add("gt", cfg.gt_path);
    add("det", cfg.det_path);
    add("scene", cfg.scene_path);
    if (cfg.mode == "eval" || cfg.mode == "assign") {
        entries.emplace_back("zones", std::to_string(cfg.zones));
    }
    add("grid", cfg.grid_spec);
    add("sweep", cfg.sweep_spec);
    if (cfg.mode != "assign") {
        entries.emplace_back("iou", cfg.iou_spec);
        entries.emplace_back("max_dets", std::to_string(cfg.max_dets));
    }
    if (cfg.mode == "assign") {
        entries.emplace_back("assigner", cfg.assigner);
        entries.emplace_back("top_k", std::to_string(cfg.top_k));
        char buf[32];
        std::snprintf(buf, sizeof(buf), "%g", cfg.gamma);
        entries.emplace_back("gamma", buf);
        if (cfg.assigner == "max-iou") {
            std::snprintf(buf, sizeof(buf), "%g", cfg.pos_thr);
            entries.emplace_back("pos_thr", buf);
            std::snprintf(buf, sizeof(buf), "%g", cfg.neg_thr);
            entries.emplace_back("neg_thr", buf);
        }
        add("zone_filter", cfg.zone_filter);
    }
    entries.emplace_back("out", cfg.out);
    entries.emplace_back("format", cfg.format);
    // --threads is deliberately not embedded: results are
    // schedule-independent and reports must be byte-identical across runs.
    return entries;
}

EvalOptions eval_options(const RunConfig& cfg) {
    EvalOptions opt;
    opt.iou_thresholds = parse_iou_spec(cfg.iou_spec);
    opt.max_dets = cfg.max_dets;
    opt.threads = cfg.threads > 0
                      ? cfg.threads
                      : static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
    return opt;
}

bool want_csv(const RunConfig& cfg) {
    return cfg.format == "csv" || cfg.format == "both";
}

// Mode-required fields must be present and input paths readable before
// any computation starts.
void check_inputs(const RunConfig& cfg) {
    std::vector<std::pair<const char*, const std::string*>> required;
    if (cfg.mode == "assign") {
        required.emplace_back("--scene", &cfg.scene_path);
    } else {
        required.emplace_back("--gt", &cfg.gt_path);
        required.emplace_back("--det", &cfg.det_path);
    }
    if (cfg.mode == "sweep" && cfg.sweep_spec.empty()) {
        throw ConfigError("--sweep is required in sweep mode");
    }
    if ((cfg.mode == "grid" || cfg.mode == "corr") && cfg.grid_spec.empty()) {
        throw ConfigError("--grid is required in " + cfg.mode + " mode");
    }
    for (const auto& [flag, path] : required) {
        if (path->empty()) {
            throw ConfigError(std::string(flag) + " is required in " + cfg.mode + " mode");
        }
        std::ifstream probe(*path);
        if (!probe) {
            throw IoError("cannot open file: " + *path);
        }
    }
}

int run_eval(const RunConfig& cfg) {
    const auto ds = load_ground_truth(cfg.gt_path);
    const auto dets = load_detections(cfg.det_path, ds);
    const auto report = zone_evaluation(ds, dets, cfg.zones, eval_options(cfg));
    write_file(cfg.out + ".json", report_to_json(report, resolved_config(cfg)));
    if (want_csv(cfg)) {
        write_file(cfg.out + ".csv", report_to_csv(report));
    }
    print_zone_table(report);
    return 0;
}

int run_sweep(const RunConfig& cfg) {
    const auto ds = load_ground_truth(cfg.gt_path);
    const auto dets = load_detections(cfg.det_path, ds);
    const auto bands = range_sweep(ds, dets, parse_sweep_spec(cfg.sweep_spec),
                                   eval_options(cfg));
    write_file(cfg.out + ".json", sweep_to_json(bands, resolved_config(cfg)));
    if (want_csv(cfg)) {
        write_file(cfg.out + ".csv", sweep_to_csv(bands));
    }
    std::printf("%-14s %6s %6s %7s %7s %7s\n", "range", "n_gt", "n_det", "ZP", "ZP50", "ZP75");
    for (const auto& m : bands) {
        char range[32];
        std::snprintf(range, sizeof(range), "(%.2f,%.2f)", m.zone.r_inner, m.zone.r_outer);
        std::printf("%-14s %6lld %6lld %7s %7s %7s\n", range, static_cast<long long>(m.n_gt),
                    static_cast<long long>(m.n_det), pct(m.zp).c_str(), pct(m.zp50).c_str(),
                    pct(m.zp75).c_str());
    }
    return 0;
}

int run_grid(const RunConfig& cfg) {
    const auto [rows, cols] = parse_grid_spec(cfg.grid_spec);
    const auto ds = load_ground_truth(cfg.gt_path);
    const auto dets = load_detections(cfg.det_path, ds);
    const auto grid = grid_evaluation(ds, dets, rows, cols, eval_options(cfg));
    const auto counts = object_distribution(ds, grid_zones(rows, cols));

    write_file(cfg.out + ".json", grid_to_json(grid, resolved_config(cfg)));
    if (want_csv(cfg)) {
        write_file(cfg.out + ".csv", grid_to_csv(grid));
        write_file(cfg.out + "_zp.csv", heatmap_csv(rows, cols, grid_zp_matrix(grid)));
        write_file(cfg.out + "_counts.csv", heatmap_csv(rows, cols, counts.per_zone));
    }

    int defined = 0;
    for (const auto& cell : grid.cells) {
        defined += cell.zp.has_value() ? 1 : 0;
    }
    std::printf("grid %dx%d: %d/%zu cells with ground truth, %lld objects total\n", rows, cols,
                defined, grid.cells.size(), static_cast<long long>(counts.total));
    return 0;
}

int run_corr(const RunConfig& cfg) {
    const auto [rows, cols] = parse_grid_spec(cfg.grid_spec);
    const auto ds = load_ground_truth(cfg.gt_path);
    const auto dets = load_detections(cfg.det_path, ds);
    const auto opt = eval_options(cfg);
    const auto grid = grid_evaluation(ds, dets, rows, cols, opt);
    const auto counts = object_distribution(ds, grid_zones(rows, cols));
    const auto curve = zone_metric_correlation(grid, counts, opt.iou_thresholds);

    write_file(cfg.out + ".json", correlation_to_json(curve, resolved_config(cfg)));
    if (want_csv(cfg)) {
        write_file(cfg.out + ".csv", correlation_to_csv(curve));
    }
    std::printf("%6s %8s %8s %8s\n", "IoU", "PCC", "SCC", "cells");
    for (std::size_t i = 0; i < curve.thresholds.size(); ++i) {
        auto field = [](const std::optional<double>& v) {
            if (!v.has_value()) {
                return std::string("-");
            }
            char buf[32];
            std::snprintf(buf, sizeof(buf), "%.3f", *v);
            return std::string(buf);
        };
        std::printf("%6.2f %8s %8s %8d\n", curve.thresholds[i], field(curve.pcc[i]).c_str(),
                    field(curve.scc[i]).c_str(), curve.n_points[i]);
    }
    return 0;
}

AssignConfig assign_config(const RunConfig& cfg) {
    AssignConfig config;
    if (cfg.assigner == "max-iou") {
        config.strategy = AssignStrategy::MaxIoU;
    } else if (cfg.assigner == "atss") {
        config.strategy = AssignStrategy::Atss;
    } else if (cfg.assigner == "sela") {
        config.strategy = AssignStrategy::SelaFreq;
    } else if (cfg.assigner == "sela-cost") {
        config.strategy = AssignStrategy::SelaCost;
    } else {
        throw ConfigError("--assigner must be max-iou, atss, sela or sela-cost");
    }
    config.pos_thr = cfg.pos_thr;
    config.neg_thr = cfg.neg_thr;
    config.top_k = cfg.top_k;
    config.gamma = cfg.gamma;
    config.zone_filter = parse_zone_filter(cfg.zone_filter);
    return config;
}

int run_assign(const RunConfig& cfg) {
    if (cfg.scene_path.empty()) {
        throw ConfigError("--scene is required in assign mode");
    }
    const Scene scene = load_scene(cfg.scene_path);
    const AnchorGrid grid = scene.build_grid();
    const AssignmentResult result = assign(grid, scene.gts, assign_config(cfg));

    std::vector<Zone> zones;
    if (!cfg.grid_spec.empty()) {
        const auto [rows, cols] = parse_grid_spec(cfg.grid_spec);
        zones = grid_zones(rows, cols);
    } else {
        zones = annular_zones(cfg.zones);
    }
    const ZoneSamplingStats stats = assignment_zone_stats(result, scene.gts, zones);

    std::int64_t positives = 0;
    std::int64_t ignores = 0;
    for (int label : result.labels) {
        if (label >= 0) {
            ++positives;
        } else if (label == AssignmentResult::kIgnore) {
            ++ignores;
        }
    }

    nlohmann::ordered_json root;
    root["schema_version"] = 1;
    root["tool"] = "zoneval";
    root["version"] = kVersion;
    nlohmann::ordered_json cj = nlohmann::ordered_json::object();
    for (const auto& [key, value] : resolved_config(cfg)) {
        cj[key] = value;
    }
    root["config"] = cj;
    root["image"] = {{"width", scene.width}, {"height", scene.height}};
    nlohmann::ordered_json levels = nlohmann::ordered_json::array();
    for (const auto& level : grid.levels) {
        levels.push_back({{"stride", level.stride},
                          {"scale", level.scale},
                          {"anchors", level.centers.size()}});
    }
    root["anchors"] = {{"total", grid.total}, {"levels", levels}};
    nlohmann::ordered_json gts = nlohmann::ordered_json::array();
    for (std::size_t g = 0; g < scene.gts.size(); ++g) {
        nlohmann::ordered_json e;
        const BBox& b = scene.gts[g];
        e["bbox"] = {b.x, b.y, b.w, b.h};
        e["positives"] = result.positives_per_gt[g];
        if (std::isnan(result.gt_threshold[g])) {
            e["threshold"] = nullptr;
        } else {
            e["threshold"] = result.gt_threshold[g];
        }
        gts.push_back(e);
    }
    root["gts"] = gts;
    root["totals"] = {{"anchors", grid.total},
                      {"positives", positives},
                      {"ignores", ignores},
                      {"negatives", static_cast<std::int64_t>(grid.total) - positives - ignores}};
    nlohmann::ordered_json zs = nlohmann::ordered_json::array();
    for (std::size_t z = 0; z < zones.size(); ++z) {
        nlohmann::ordered_json e;
        e["label"] = zones[z].label();
        e["gt_count"] = stats.gt_count[z];
        e["positives"] = stats.positives[z];
        if (stats.mean_positives_per_gt[z].has_value()) {
            e["mean_positives_per_gt"] = *stats.mean_positives_per_gt[z];
        } else {
            e["mean_positives_per_gt"] = nullptr;
        }
        zs.push_back(e);
    }
    root["zone_stats"] = zs;
    write_file(cfg.out + ".json", root.dump(2) + "\n");

    if (want_csv(cfg)) {
        std::string csv = "label,gt_count,positives,mean_positives_per_gt\n";
        for (std::size_t z = 0; z < zones.size(); ++z) {
            csv += zones[z].label();
            csv += ',';
            csv += std::to_string(stats.gt_count[z]);
            csv += ',';
            csv += std::to_string(stats.positives[z]);
            csv += ',';
            if (stats.mean_positives_per_gt[z].has_value()) {
                char buf[32];
                std::snprintf(buf, sizeof(buf), "%.6g", *stats.mean_positives_per_gt[z]);
                csv += buf;
            }
            csv += '\n';
        }
        write_file(cfg.out + ".csv", csv);
    }

    std::printf("%zu anchors, %zu GTs: %lld positives, %lld ignores\n", grid.total,
                scene.gts.size(), static_cast<long long>(positives),
                static_cast<long long>(ignores));
    std::printf("%-10s %8s %10s %10s\n", "zone", "GTs", "positives", "pos/GT");
    for (std::size_t z = 0; z < zones.size(); ++z) {
        std::string mean = "-";
        if (stats.mean_positives_per_gt[z].has_value()) {
            char buf[32];
            std::snprintf(buf, sizeof(buf), "%.2f", *stats.mean_positives_per_gt[z]);
            mean = buf;
        }
        std::printf("%-10s %8lld %10lld %10s\n", zones[z].label().c_str(),
                    static_cast<long long>(stats.gt_count[z]),
                    static_cast<long long>(stats.positives[z]), mean.c_str());
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    RunConfig cfg;
    CLI::App app{"zone-based evaluation and label-assignment simulation for object detection"};
    app.set_config("--config", "", "flat key=value config file; command-line flags override it");
    app.add_option("--mode", cfg.mode, "eval | sweep | grid | corr | assign")
        ->required()
        ->check(CLI::IsMember({"eval", "sweep", "grid", "corr", "assign"}));
    app.add_option("--gt", cfg.gt_path, "COCO annotation JSON (ground truth)");
    app.add_option("--det", cfg.det_path, "COCO results JSON (detections)");
    app.add_option("--scene", cfg.scene_path, "scene fixture JSON (assign mode)");
    app.add_option("--zones", cfg.zones, "number of annular zones")->check(CLI::PositiveNumber);
    app.add_option("--grid", cfg.grid_spec, "grid division RxC, e.g. 11x11");
    app.add_option("--sweep", cfg.sweep_spec, "zone ranges 'ri:rj,ri:rj,...'");
    app.add_option("--iou", cfg.iou_spec, "IoU thresholds: 'a:step:b' or comma list");
    app.add_option("--max-dets", cfg.max_dets, "per-image detection cap")
        ->check(CLI::PositiveNumber);
    app.add_option("--assigner", cfg.assigner, "max-iou | atss | sela | sela-cost");
    app.add_option("--top-k", cfg.top_k, "ATSS candidates per level")
        ->check(CLI::PositiveNumber);
    app.add_option("--gamma", cfg.gamma, "SELA relaxation strength")
        ->check(CLI::NonNegativeNumber);
    app.add_option("--pos-thr", cfg.pos_thr, "max-iou positive threshold");
    app.add_option("--neg-thr", cfg.neg_thr, "max-iou negative threshold");
    app.add_option("--zone-filter", cfg.zone_filter,
                   "sampling manipulation MODE:REGION, e.g. discard:left or keep1:right");
    app.add_option("--out", cfg.out, "output base path (writes <out>.json, <out>.csv)");
    app.add_option("--format", cfg.format, "json | csv | both")
        ->check(CLI::IsMember({"json", "csv", "both"}));
    app.add_option("--threads", cfg.threads, "worker threads (default: machine parallelism)")
        ->check(CLI::NonNegativeNumber);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (cfg.mode == "eval") {
            return run_eval(cfg);
        }
        if (cfg.mode == "sweep") {
            return run_sweep(cfg);
        }
        if (cfg.mode == "grid") {
            return run_grid(cfg);
        }
        if (cfg.mode == "corr") {
            return run_corr(cfg);
        }
        return run_assign(cfg);
    } catch (const IoError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    } catch (const ParseError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    } catch (const Error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    }
}
