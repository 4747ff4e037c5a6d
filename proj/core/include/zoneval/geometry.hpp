#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace zoneval {

/// 2-D point in absolute pixel coordinates.
struct Point {
    double x = 0.0;
    double y = 0.0;

    bool valid() const;

    friend bool operator==(const Point&, const Point&) = default;
};

/// Axis-aligned box, [x, y, w, h] top-left plus size (COCO convention).
struct BBox {
    double x = 0.0;
    double y = 0.0;
    double w = 0.0;
    double h = 0.0;

    Point center() const { return {x + w / 2.0, y + h / 2.0}; }
    double area() const { return w * h; }
    double right() const { return x + w; }
    double bottom() const { return y + h; }

    bool valid() const;  // finite fields, w > 0, h > 0

    friend bool operator==(const BBox&, const BBox&) = default;
};

/// Intersection over union. Symmetric, in [0,1], 0 when disjoint.
double iou(const BBox& a, const BBox& b);

/// Intersection area of `det` with `region`, divided by area(det).
/// This is the overlap rule COCO uses for crowd ignore-matching.
double intersection_over_detection(const BBox& det, const BBox& region);

/// Distance-from-center weight: 2*max(|x-W/2|/W, |y-H/2|/H).
/// 0 at the image center, 1 on the border. Throws InputError if the
/// point lies outside the image rectangle or W/H are not positive.
double spatial_weight(const Point& p, double width, double height);

enum class ZoneKind { Annular, GridCell, RangeBand };

/// An evaluation region in normalized image space. Annular zones are the
/// set difference of two centered rectangles R_i \ R_j with
/// R_r = [rW,(1-r)W] x [rH,(1-r)H]; a RangeBand is the same thing
/// parameterized by the fractions directly; a GridCell is one cell of an
/// equal-size rows x cols division.
struct Zone {
    ZoneKind kind = ZoneKind::RangeBand;

    // Annular / RangeBand
    double r_inner = 0.0;
    double r_outer = 0.5;
    int ring_index = -1;  // i of z^{i,j}; Annular only
    int ring_count = 0;   // n;            Annular only

    // GridCell
    int row = -1;
    int col = -1;
    int rows = 0;
    int cols = 0;

    double normalized_area = 0.0;

    /// Membership test for a point inside the image [0,W] x [0,H].
    /// Annular/RangeBand: closed outer rectangle minus closed inner
    /// rectangle, so boundary points belong to the inner-more ring; the
    /// degenerate rectangle at r = 0.5 is empty. GridCell: half-open
    /// cells, last row/column closed on the image edge.
    bool contains(const Point& p, double width, double height) const;

    /// Short CSV-safe identifier, e.g. "z0-1", "band0.00-0.25", "cell2-3".
    std::string label() const;

    static Zone annular(int i, int j, int n);
    static Zone grid_cell(int row, int col, int rows, int cols);
    static Zone range_band(double r_inner, double r_outer);
    static Zone full_image() { return range_band(0.0, 0.5); }

    friend bool operator==(const Zone&, const Zone&) = default;
};

/// The n annular zones z^{0,1}, ..., z^{n-1,n} with r_k = k/(2n),
/// ordered border to center. Throws InputError if n < 1.
std::vector<Zone> annular_zones(int n);

/// rows x cols equal cells in row-major order. Throws InputError if
/// either count is < 1.
std::vector<Zone> grid_zones(int rows, int cols);

/// Throws InputError unless `zones` is a full partition of the image
/// (a border-to-center chain of annular/range zones, or a complete grid).
void validate_partition(const std::vector<Zone>& zones);

/// Index of the unique zone of a full partition containing p.
/// Call validate_partition first; p must lie inside the image.
std::size_t partition_index(const std::vector<Zone>& zones, const Point& p,
                            double width, double height);

}  // namespace zoneval
