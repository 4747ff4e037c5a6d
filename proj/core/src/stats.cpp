#include "zoneval/stats.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <numeric>

#include <json.hpp>

#include "zoneval/errors.hpp"
#include "zoneval/version.hpp"

namespace zoneval {

namespace {

std::string fmt_double(double v) {
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

}  // namespace

std::optional<double> pearson(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size()) {
        throw InputError("pearson: length mismatch");
    }
    if (x.size() < 2) {
        throw InputError("pearson: need at least 2 points");
    }
    const double n = static_cast<double>(x.size());
    const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
    const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
    double sxy = 0.0;
    double sxx = 0.0;
    double syy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double dx = x[i] - mx;
        const double dy = y[i] - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if (sxx == 0.0 || syy == 0.0) {
        return std::nullopt;  // constant input: correlation undefined
    }
    return sxy / std::sqrt(sxx * syy);
}

std::vector<double> average_ranks(const std::vector<double>& x) {
    std::vector<std::size_t> order(x.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&x](std::size_t a, std::size_t b) { return x[a] < x[b]; });
    std::vector<double> ranks(x.size(), 0.0);
    std::size_t i = 0;
    while (i < order.size()) {
        std::size_t j = i;
        while (j + 1 < order.size() && x[order[j + 1]] == x[order[i]]) {
            ++j;
        }
        // Positions i..j share the average 1-based rank.
        const double rank = (static_cast<double>(i + 1) + static_cast<double>(j + 1)) / 2.0;
        for (std::size_t k = i; k <= j; ++k) {
            ranks[order[k]] = rank;
        }
        i = j + 1;
    }
    return ranks;
}

std::optional<double> spearman(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size()) {
        throw InputError("spearman: length mismatch");
    }
    if (x.size() < 2) {
        throw InputError("spearman: need at least 2 points");
    }
    return pearson(average_ranks(x), average_ranks(y));
}

CorrelationCurve zone_metric_correlation(const GridMetrics& grid,
                                         const DistributionCounts& distribution,
                                         const std::vector<double>& thresholds) {
    if (thresholds.empty()) {
        throw InputError("zone_metric_correlation: empty threshold list");
    }
    if (distribution.per_zone.size() != grid.cells.size()) {
        throw InputError("zone_metric_correlation: grid and distribution sizes differ");
    }
    const std::vector<double>& available =
        grid.cells.empty() ? thresholds : grid.cells.front().thresholds;

    CorrelationCurve curve;
    for (double t : thresholds) {
        std::size_t ti = available.size();
        for (std::size_t i = 0; i < available.size(); ++i) {
            if (std::abs(available[i] - t) < 1e-9) {
                ti = i;
                break;
            }
        }
        if (ti == available.size()) {
            throw InputError("zone_metric_correlation: threshold not present in grid metrics");
        }
        std::vector<double> mzp;
        std::vector<double> counts;
        for (std::size_t c = 0; c < grid.cells.size(); ++c) {
            const auto& v = grid.cells[c].mzp[ti];
            if (v.has_value()) {
                mzp.push_back(*v);
                counts.push_back(static_cast<double>(distribution.per_zone[c]));
            }
        }
        curve.thresholds.push_back(t);
        curve.n_points.push_back(static_cast<int>(mzp.size()));
        if (mzp.size() < 2) {
            curve.pcc.push_back(std::nullopt);
            curve.scc.push_back(std::nullopt);
        } else {
            curve.pcc.push_back(pearson(mzp, counts));
            curve.scc.push_back(spearman(mzp, counts));
        }
    }
    return curve;
}

std::string correlation_to_json(const CorrelationCurve& curve, const ConfigEntries& config) {
    nlohmann::ordered_json root;
    root["schema_version"] = 1;
    root["tool"] = "zoneval";
    root["version"] = kVersion;
    nlohmann::ordered_json cfg = nlohmann::ordered_json::object();
    for (const auto& [key, value] : config) {
        cfg[key] = value;
    }
    root["config"] = cfg;
    root["iou_thresholds"] = curve.thresholds;
    auto opt_array = [](const std::vector<std::optional<double>>& vals) {
        nlohmann::ordered_json arr = nlohmann::ordered_json::array();
        for (const auto& v : vals) {
            if (v.has_value()) {
                arr.push_back(*v);
            } else {
                arr.push_back(nullptr);
            }
        }
        return arr;
    };
    root["pcc"] = opt_array(curve.pcc);
    root["scc"] = opt_array(curve.scc);
    root["n_points"] = curve.n_points;
    return root.dump(2) + "\n";
}

std::string correlation_to_csv(const CorrelationCurve& curve) {
    std::string out = "iou_threshold,pcc,scc,n_points\n";
    for (std::size_t i = 0; i < curve.thresholds.size(); ++i) {
        out += fmt_double(curve.thresholds[i]);
        out += ',';
        if (curve.pcc[i].has_value()) {
            out += fmt_double(*curve.pcc[i]);
        }
        out += ',';
        if (curve.scc[i].has_value()) {
            out += fmt_double(*curve.scc[i]);
        }
        out += ',';
        out += std::to_string(curve.n_points[i]);
        out += '\n';
    }
    return out;
}

}  // namespace zoneval
