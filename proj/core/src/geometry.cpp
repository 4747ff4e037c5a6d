#include "zoneval/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "zoneval/errors.hpp"

namespace zoneval {

bool Point::valid() const {
    return std::isfinite(x) && std::isfinite(y) && x >= 0.0 && y >= 0.0;
}

bool BBox::valid() const {
    return std::isfinite(x) && std::isfinite(y) && std::isfinite(w) &&
           std::isfinite(h) && w > 0.0 && h > 0.0;
}

namespace {

double intersection_area(const BBox& a, const BBox& b) {
    const double ix = std::min(a.right(), b.right()) - std::max(a.x, b.x);
    const double iy = std::min(a.bottom(), b.bottom()) - std::max(a.y, b.y);
    if (ix <= 0.0 || iy <= 0.0) {
        return 0.0;
    }
    return ix * iy;
}

// Closed centered rectangle R_r = [rW,(1-r)W] x [rH,(1-r)H]; empty once it
// degenerates at r >= 0.5.
bool in_centered_rect(double r, const Point& p, double width, double height) {
    if (r >= 0.5) {
        return false;
    }
    return p.x >= r * width && p.x <= (1.0 - r) * width && p.y >= r * height &&
           p.y <= (1.0 - r) * height;
}

int cell_coord(double v, double extent, int count) {
    const int i = static_cast<int>(std::floor(v * static_cast<double>(count) / extent));
    return std::clamp(i, 0, count - 1);
}

}  // namespace

double iou(const BBox& a, const BBox& b) {
    const double inter = intersection_area(a, b);
    if (inter <= 0.0) {
        return 0.0;
    }
    const double uni = a.area() + b.area() - inter;
    return inter / uni;
}

double intersection_over_detection(const BBox& det, const BBox& region) {
    const double inter = intersection_area(det, region);
    if (inter <= 0.0) {
        return 0.0;
    }
    return inter / det.area();
}

double spatial_weight(const Point& p, double width, double height) {
    if (!(width > 0.0) || !(height > 0.0)) {
        throw InputError("spatial_weight: image size must be positive");
    }
    if (p.x < 0.0 || p.x > width || p.y < 0.0 || p.y > height) {
        throw InputError("spatial_weight: point outside image rectangle");
    }
    const double dx = std::abs(p.x - width / 2.0) / width;
    const double dy = std::abs(p.y - height / 2.0) / height;
    return 2.0 * std::max(dx, dy);
}

Zone Zone::annular(int i, int j, int n) {
    if (n < 1 || i < 0 || j <= i || j > n) {
        throw InputError("Zone::annular: require 0 <= i < j <= n, n >= 1");
    }
    Zone z;
    z.kind = ZoneKind::Annular;
    z.ring_index = i;
    z.ring_count = n;
    z.r_inner = static_cast<double>(i) / (2.0 * n);
    z.r_outer = static_cast<double>(j) / (2.0 * n);
    const double a = 1.0 - 2.0 * z.r_inner;
    const double b = 1.0 - 2.0 * z.r_outer;
    z.normalized_area = a * a - b * b;
    return z;
}

Zone Zone::grid_cell(int row, int col, int rows, int cols) {
    if (rows < 1 || cols < 1 || row < 0 || row >= rows || col < 0 || col >= cols) {
        throw InputError("Zone::grid_cell: cell index outside grid");
    }
    Zone z;
    z.kind = ZoneKind::GridCell;
    z.row = row;
    z.col = col;
    z.rows = rows;
    z.cols = cols;
    z.r_inner = 0.0;
    z.r_outer = 0.0;
    z.normalized_area = 1.0 / (static_cast<double>(rows) * static_cast<double>(cols));
    return z;
}

Zone Zone::range_band(double r_inner, double r_outer) {
    if (!(r_inner >= 0.0) || !(r_inner < r_outer) || !(r_outer <= 0.5)) {
        throw InputError("Zone::range_band: require 0 <= r_inner < r_outer <= 0.5");
    }
    Zone z;
    z.kind = ZoneKind::RangeBand;
    z.r_inner = r_inner;
    z.r_outer = r_outer;
    const double a = 1.0 - 2.0 * r_inner;
    const double b = 1.0 - 2.0 * r_outer;
    z.normalized_area = a * a - b * b;
    return z;
}

bool Zone::contains(const Point& p, double width, double height) const {
    if (!(width > 0.0) || !(height > 0.0)) {
        throw InputError("Zone::contains: image size must be positive");
    }
    if (kind == ZoneKind::GridCell) {
        if (p.x < 0.0 || p.x > width || p.y < 0.0 || p.y > height) {
            return false;
        }
        return cell_coord(p.x, width, cols) == col && cell_coord(p.y, height, rows) == row;
    }
    return in_centered_rect(r_inner, p, width, height) &&
           !in_centered_rect(r_outer, p, width, height);
}

std::string Zone::label() const {
    char buf[64];
    switch (kind) {
        case ZoneKind::Annular:
            std::snprintf(buf, sizeof(buf), "z%d-%d", ring_index,
                          static_cast<int>(std::lround(r_outer * 2.0 * ring_count)));
            break;
        case ZoneKind::GridCell:
            std::snprintf(buf, sizeof(buf), "cell%d-%d", row, col);
            break;
        case ZoneKind::RangeBand:
            std::snprintf(buf, sizeof(buf), "band%.2f-%.2f", r_inner, r_outer);
            break;
    }
    return buf;
}

std::vector<Zone> annular_zones(int n) {
    if (n < 1) {
        throw InputError("annular_zones: zone count must be >= 1");
    }
    std::vector<Zone> zones;
    zones.reserve(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        zones.push_back(Zone::annular(i, i + 1, n));
    }
    return zones;
}

std::vector<Zone> grid_zones(int rows, int cols) {
    if (rows < 1 || cols < 1) {
        throw InputError("grid_zones: rows and cols must be >= 1");
    }
    std::vector<Zone> zones;
    zones.reserve(static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols));
    for (int r = 0; r < rows; ++r) {
        for (int c = 0; c < cols; ++c) {
            zones.push_back(Zone::grid_cell(r, c, rows, cols));
        }
    }
    return zones;
}

void validate_partition(const std::vector<Zone>& zones) {
    if (zones.empty()) {
        throw InputError("zone partition: empty zone list");
    }
    const bool grid = zones.front().kind == ZoneKind::GridCell;
    for (const Zone& z : zones) {
        if ((z.kind == ZoneKind::GridCell) != grid) {
            throw InputError("zone partition: mixed zone kinds");
        }
    }
    if (grid) {
        const int rows = zones.front().rows;
        const int cols = zones.front().cols;
        if (zones.size() != static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols)) {
            throw InputError("zone partition: grid cell count mismatch");
        }
        std::vector<char> seen(zones.size(), 0);
        for (const Zone& z : zones) {
            if (z.rows != rows || z.cols != cols) {
                throw InputError("zone partition: inconsistent grid dimensions");
            }
            const std::size_t idx = static_cast<std::size_t>(z.row) * cols + z.col;
            if (seen[idx]) {
                throw InputError("zone partition: duplicate grid cell");
            }
            seen[idx] = 1;
        }
        return;
    }
    // Annular/range chain: consecutive bands from r = 0 to r = 0.5.
    std::vector<const Zone*> sorted;
    sorted.reserve(zones.size());
    for (const Zone& z : zones) {
        sorted.push_back(&z);
    }
    std::sort(sorted.begin(), sorted.end(),
              [](const Zone* a, const Zone* b) { return a->r_inner < b->r_inner; });
    constexpr double kTol = 1e-12;
    if (std::abs(sorted.front()->r_inner) > kTol || std::abs(sorted.back()->r_outer - 0.5) > kTol) {
        throw InputError("zone partition: bands do not span [0, 0.5]");
    }
    for (std::size_t i = 0; i + 1 < sorted.size(); ++i) {
        if (std::abs(sorted[i]->r_outer - sorted[i + 1]->r_inner) > kTol) {
            throw InputError("zone partition: gap or overlap between bands");
        }
    }
}

std::size_t partition_index(const std::vector<Zone>& zones, const Point& p,
                            double width, double height) {
    if (zones.front().kind == ZoneKind::GridCell) {
        const int rows = zones.front().rows;
        const int cols = zones.front().cols;
        const int r = cell_coord(p.y, height, rows);
        const int c = cell_coord(p.x, width, cols);
        for (std::size_t i = 0; i < zones.size(); ++i) {
            if (zones[i].row == r && zones[i].col == c) {
                return i;
            }
        }
        throw InputError("partition_index: no grid cell for point");
    }
    for (std::size_t i = 0; i < zones.size(); ++i) {
        if (zones[i].contains(p, width, height)) {
            return i;
        }
    }
    throw InputError("partition_index: point not covered by partition");
}

}  // namespace zoneval
