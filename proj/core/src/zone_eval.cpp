#include "zoneval/zone_eval.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <functional>

#include <json.hpp>

#include "parallel.hpp"
#include "zoneval/errors.hpp"
#include "zoneval/version.hpp"

namespace zoneval {

namespace {

using ordered_json = nlohmann::ordered_json;

// Shortest round-trip decimal form, same as the JSON writer produces.
std::string fmt_double(double v) {
    if (std::isnan(v)) {
        return "nan";
    }
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

std::optional<double> weighted_mean_defined(
    const std::vector<ZoneMetrics>& zones,
    const std::function<std::optional<double>(const ZoneMetrics&)>& value) {
    std::vector<double> zps;
    std::vector<double> areas;
    double total_area = 0.0;
    for (const ZoneMetrics& z : zones) {
        const auto v = value(z);
        if (v.has_value()) {
            zps.push_back(*v);
            areas.push_back(z.zone.normalized_area);
            total_area += z.zone.normalized_area;
        }
    }
    if (zps.empty()) {
        return std::nullopt;
    }
    // Redistribute the weight of undefined zones proportionally.
    for (double& a : areas) {
        a /= total_area;
    }
    return spatial_equilibrium_precision(zps, areas);
}

std::optional<double> variance_defined(
    const std::vector<ZoneMetrics>& zones,
    const std::function<std::optional<double>(const ZoneMetrics&)>& value) {
    std::vector<double> vals;
    for (const ZoneMetrics& z : zones) {
        const auto v = value(z);
        if (v.has_value()) {
            vals.push_back(*v);
        }
    }
    if (vals.empty()) {
        return std::nullopt;
    }
    return zone_variance(vals);
}

const char* kind_name(ZoneKind kind) {
    switch (kind) {
        case ZoneKind::Annular:
            return "annular";
        case ZoneKind::GridCell:
            return "grid_cell";
        case ZoneKind::RangeBand:
            return "range_band";
    }
    return "?";
}

ordered_json opt_json(const std::optional<double>& v) {
    if (v.has_value()) {
        return *v;
    }
    return nullptr;
}

ordered_json zone_entry(const ZoneMetrics& m) {
    ordered_json e;
    e["label"] = m.zone.label();
    e["kind"] = kind_name(m.zone.kind);
    if (m.zone.kind == ZoneKind::GridCell) {
        e["row"] = m.zone.row;
        e["col"] = m.zone.col;
    } else {
        e["r_inner"] = m.zone.r_inner;
        e["r_outer"] = m.zone.r_outer;
    }
    e["area"] = m.zone.normalized_area;
    e["n_gt"] = m.n_gt;
    e["n_det"] = m.n_det;
    e["zp"] = opt_json(m.zp);
    e["zp50"] = opt_json(m.zp50);
    e["zp75"] = opt_json(m.zp75);
    ordered_json mzp = ordered_json::array();
    for (const auto& v : m.mzp) {
        mzp.push_back(opt_json(v));
    }
    e["mzp"] = mzp;
    return e;
}

ordered_json report_header(const ConfigEntries& config) {
    ordered_json root;
    root["schema_version"] = 1;
    root["tool"] = "zoneval";
    root["version"] = kVersion;
    ordered_json cfg = ordered_json::object();
    for (const auto& [key, value] : config) {
        cfg[key] = value;
    }
    root["config"] = cfg;
    root["metrics_scale"] = "fraction";
    return root;
}

void append_csv_metrics_header(std::string& out, const std::vector<double>& thresholds) {
    out += "label,kind,r_inner,r_outer,row,col,area,n_gt,n_det,zp,zp50,zp75";
    for (double t : thresholds) {
        char buf[32];
        std::snprintf(buf, sizeof(buf), ",mzp@%.6g", t);
        out += buf;
    }
    out += '\n';
}

void append_csv_row(std::string& out, const ZoneMetrics& m) {
    auto opt_field = [](const std::optional<double>& v) {
        return v.has_value() ? fmt_double(*v) : std::string();
    };
    out += m.zone.label();
    out += ',';
    out += kind_name(m.zone.kind);
    out += ',';
    if (m.zone.kind == ZoneKind::GridCell) {
        out += ",,";
        out += std::to_string(m.zone.row);
        out += ',';
        out += std::to_string(m.zone.col);
    } else {
        out += fmt_double(m.zone.r_inner);
        out += ',';
        out += fmt_double(m.zone.r_outer);
        out += ",,";
    }
    out += ',';
    out += fmt_double(m.zone.normalized_area);
    out += ',';
    out += std::to_string(m.n_gt);
    out += ',';
    out += std::to_string(m.n_det);
    out += ',';
    out += opt_field(m.zp);
    out += ',';
    out += opt_field(m.zp50);
    out += ',';
    out += opt_field(m.zp75);
    for (const auto& v : m.mzp) {
        out += ',';
        out += opt_field(v);
    }
    out += '\n';
}

}  // namespace

double spatial_equilibrium_precision(const std::vector<double>& zps,
                                     const std::vector<double>& areas) {
    if (zps.size() != areas.size()) {
        throw InputError("spatial_equilibrium_precision: length mismatch");
    }
    if (zps.empty()) {
        throw InputError("spatial_equilibrium_precision: empty input");
    }
    double area_sum = 0.0;
    for (double a : areas) {
        area_sum += a;
    }
    if (std::abs(area_sum - 1.0) > 1e-9) {
        throw InputError("spatial_equilibrium_precision: areas do not sum to 1");
    }
    double sp = 0.0;
    for (std::size_t i = 0; i < zps.size(); ++i) {
        sp += areas[i] * zps[i];
    }
    return sp;
}

double zone_variance(const std::vector<double>& zps) {
    if (zps.empty()) {
        throw InputError("zone_variance: empty input");
    }
    const double n = static_cast<double>(zps.size());
    double mean = 0.0;
    for (double v : zps) {
        mean += v;
    }
    mean /= n;
    double acc = 0.0;
    for (double v : zps) {
        acc += (v - mean) * (v - mean);
    }
    return acc / n;
}

ZoneReport zone_evaluation(const DetectionDataset& ds, const DetectionSet& dets,
                           int n_zones, const EvalOptions& opt) {
    const std::vector<Zone> zones = annular_zones(n_zones);

    ZoneReport report;
    report.zones.resize(zones.size());

    EvalOptions zone_opt = opt;
    zone_opt.threads = 1;
    detail::parallel_for(zones.size() + 1, opt.threads, [&](std::size_t i) {
        if (i < zones.size()) {
            report.zones[i] = evaluate_zone(ds, dets, zones[i], zone_opt);
        } else {
            report.traditional = evaluate_zone(ds, dets, Zone::full_image(), zone_opt);
        }
    });

    report.sp = weighted_mean_defined(report.zones,
                                      [](const ZoneMetrics& m) { return m.zp; });
    report.sp75 = weighted_mean_defined(report.zones,
                                        [](const ZoneMetrics& m) { return m.zp75; });
    report.variance = variance_defined(report.zones,
                                       [](const ZoneMetrics& m) { return m.zp; });
    report.variance75 = variance_defined(report.zones,
                                         [](const ZoneMetrics& m) { return m.zp75; });
    return report;
}

std::vector<ZoneMetrics> range_sweep(const DetectionDataset& ds, const DetectionSet& dets,
                                     const std::vector<std::pair<double, double>>& sweep,
                                     const EvalOptions& opt) {
    if (sweep.empty()) {
        throw InputError("range_sweep: empty sweep list");
    }
    std::vector<Zone> bands;
    bands.reserve(sweep.size());
    for (const auto& [ri, rj] : sweep) {
        bands.push_back(Zone::range_band(ri, rj));  // validates the pair
    }
    std::vector<ZoneMetrics> out(bands.size());
    EvalOptions zone_opt = opt;
    zone_opt.threads = 1;
    detail::parallel_for(bands.size(), opt.threads, [&](std::size_t i) {
        out[i] = evaluate_zone(ds, dets, bands[i], zone_opt);
    });
    return out;
}

GridMetrics grid_evaluation(const DetectionDataset& ds, const DetectionSet& dets,
                            int rows, int cols, const EvalOptions& opt) {
    const std::vector<Zone> cells = grid_zones(rows, cols);
    GridMetrics grid;
    grid.rows = rows;
    grid.cols = cols;
    grid.cells.resize(cells.size());
    EvalOptions zone_opt = opt;
    zone_opt.threads = 1;
    detail::parallel_for(cells.size(), opt.threads, [&](std::size_t i) {
        grid.cells[i] = evaluate_zone(ds, dets, cells[i], zone_opt);
    });
    return grid;
}

std::string report_to_json(const ZoneReport& report, const ConfigEntries& config) {
    ordered_json root = report_header(config);
    root["iou_thresholds"] = report.traditional.thresholds;
    ordered_json zones = ordered_json::array();
    for (const ZoneMetrics& m : report.zones) {
        zones.push_back(zone_entry(m));
    }
    root["zones"] = zones;
    root["traditional"] = zone_entry(report.traditional);
    root["sp"] = opt_json(report.sp);
    root["sp75"] = opt_json(report.sp75);
    root["variance"] = opt_json(report.variance);
    root["variance75"] = opt_json(report.variance75);
    return root.dump(2) + "\n";
}

std::string report_to_csv(const ZoneReport& report) {
    std::string out;
    append_csv_metrics_header(out, report.traditional.thresholds);
    for (const ZoneMetrics& m : report.zones) {
        append_csv_row(out, m);
    }
    append_csv_row(out, report.traditional);
    return out;
}

std::string sweep_to_json(const std::vector<ZoneMetrics>& bands, const ConfigEntries& config) {
    ordered_json root = report_header(config);
    if (!bands.empty()) {
        root["iou_thresholds"] = bands.front().thresholds;
    }
    ordered_json arr = ordered_json::array();
    for (const ZoneMetrics& m : bands) {
        arr.push_back(zone_entry(m));
    }
    root["bands"] = arr;
    return root.dump(2) + "\n";
}

std::string sweep_to_csv(const std::vector<ZoneMetrics>& bands) {
    std::string out;
    if (bands.empty()) {
        return out;
    }
    append_csv_metrics_header(out, bands.front().thresholds);
    for (const ZoneMetrics& m : bands) {
        append_csv_row(out, m);
    }
    return out;
}

std::string grid_to_json(const GridMetrics& grid, const ConfigEntries& config) {
    ordered_json root = report_header(config);
    root["rows"] = grid.rows;
    root["cols"] = grid.cols;
    if (!grid.cells.empty()) {
        root["iou_thresholds"] = grid.cells.front().thresholds;
    }
    ordered_json arr = ordered_json::array();
    for (const ZoneMetrics& m : grid.cells) {
        arr.push_back(zone_entry(m));
    }
    root["cells"] = arr;
    return root.dump(2) + "\n";
}

std::string grid_to_csv(const GridMetrics& grid) {
    std::string out;
    if (grid.cells.empty()) {
        return out;
    }
    append_csv_metrics_header(out, grid.cells.front().thresholds);
    for (const ZoneMetrics& m : grid.cells) {
        append_csv_row(out, m);
    }
    return out;
}

std::string heatmap_csv(int rows, int cols, const std::vector<double>& values) {
    if (values.size() != static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols)) {
        throw InputError("heatmap_csv: value count does not match rows*cols");
    }
    std::string out;
    for (int r = 0; r < rows; ++r) {
        for (int c = 0; c < cols; ++c) {
            if (c > 0) {
                out += ',';
            }
            out += fmt_double(values[static_cast<std::size_t>(r) * cols + c]);
        }
        out += '\n';
    }
    return out;
}

std::string heatmap_csv(int rows, int cols, const std::vector<std::int64_t>& values) {
    if (values.size() != static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols)) {
        throw InputError("heatmap_csv: value count does not match rows*cols");
    }
    std::string out;
    for (int r = 0; r < rows; ++r) {
        for (int c = 0; c < cols; ++c) {
            if (c > 0) {
                out += ',';
            }
            out += std::to_string(values[static_cast<std::size_t>(r) * cols + c]);
        }
        out += '\n';
    }
    return out;
}

std::vector<double> grid_zp_matrix(const GridMetrics& grid) {
    std::vector<double> m;
    m.reserve(grid.cells.size());
    for (const ZoneMetrics& cell : grid.cells) {
        m.push_back(cell.zp.value_or(std::nan("")));
    }
    return m;
}

}  // namespace zoneval
