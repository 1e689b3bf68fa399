#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <span>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include "crimegraph/error.hpp"

namespace crimegraph {

using NodeId = std::int64_t;

/// A position in decimal degrees.
struct GeoPoint {
    double lat = 0.0;
    double lon = 0.0;

    friend bool operator==(const GeoPoint&, const GeoPoint&) = default;
};

inline bool is_valid(const GeoPoint& p) {
    return std::isfinite(p.lat) && std::isfinite(p.lon) && p.lat >= -90.0 && p.lat <= 90.0 &&
           p.lon >= -180.0 && p.lon <= 180.0;
}

/// Spherical earth.
struct EarthModel {
    double radius_m = 6371000.0;
};

inline constexpr double deg_to_rad(double deg) { return deg * std::numbers::pi / 180.0; }

/// Spherical law of cosines distance in meters.
///
/// The arccos argument is clamped to [-1, 1]; identical inputs short-circuit to 0 because the
/// cosine form cannot resolve separations below a few centimeters.
inline double great_circle_distance(const GeoPoint& a, const GeoPoint& b, const EarthModel& m = {}) {
    if (a == b) return 0.0;
    const double lat_a = deg_to_rad(a.lat);
    const double lat_b = deg_to_rad(b.lat);
    // |dlon| keeps the expression bit-symmetric in (a, b).
    const double dlon = deg_to_rad(std::fabs(a.lon - b.lon));
    const double sin_term = std::sin(lat_a) * std::sin(lat_b);
    const double cos_term = std::cos(lat_a) * std::cos(lat_b) * std::cos(dlon);
    const double c = std::clamp(sin_term + cos_term, -1.0, 1.0);
    return m.radius_m * std::acos(c);
}

struct IndexedPoint {
    NodeId id = 0;
    GeoPoint point;
};

struct NearestResult {
    NodeId id = 0;
    double meters = 0.0;
};

struct SpatialIndexConfig {
    /// Cell edge in degrees; 0 picks a size giving roughly `target_per_cell` points per cell.
    double cell_deg = 0.0;
    double target_per_cell = 2.0;
};

/// Uniform lat/lon cell grid answering exact great-circle nearest-neighbor queries.
///
/// Cells are scanned in square rings around the query cell; the scan stops once a lower bound
/// on the distance to every unvisited ring exceeds the best candidate. Candidates are always
/// compared with the exact metric, ties going to the smaller id.
class SpatialIndex {
public:
    explicit SpatialIndex(std::span<const IndexedPoint> points, EarthModel earth = {},
                          SpatialIndexConfig cfg = {})
        : earth_(earth) {
        if (points.empty()) throw InvalidArgument("spatial index: empty node list");
        std::unordered_set<NodeId> seen;
        seen.reserve(points.size());
        min_lat_ = min_lon_ = std::numeric_limits<double>::infinity();
        double max_lat = -min_lat_, max_lon = -min_lon_;
        for (const auto& p : points) {
            if (!seen.insert(p.id).second)
                throw InvalidArgument("spatial index: duplicate node id " + std::to_string(p.id));
            if (!is_valid(p.point))
                throw InvalidArgument("spatial index: invalid coordinate for node " + std::to_string(p.id));
            min_lat_ = std::min(min_lat_, p.point.lat);
            max_lat = std::max(max_lat, p.point.lat);
            min_lon_ = std::min(min_lon_, p.point.lon);
            max_lon = std::max(max_lon, p.point.lon);
        }
        max_lon_ = max_lon;
        const double span_lat = max_lat - min_lat_;
        const double span_lon = max_lon - min_lon_;
        cell_deg_ = cfg.cell_deg;
        if (cell_deg_ <= 0.0) {
            const double cells = std::max(1.0, static_cast<double>(points.size()) / cfg.target_per_cell);
            const double area = std::max(span_lat, 1e-9) * std::max(span_lon, 1e-9);
            cell_deg_ = std::sqrt(area / cells);
            cell_deg_ = std::max(cell_deg_, 1e-7);
            // Degenerate (collinear) extents: size the cell along the long axis.
            if (span_lat < 1e-9 || span_lon < 1e-9)
                cell_deg_ = std::max(std::max(span_lat, span_lon) / cells, 1e-7);
        }
        rows_ = static_cast<int>(std::floor(span_lat / cell_deg_)) + 1;
        cols_ = static_cast<int>(std::floor(span_lon / cell_deg_)) + 1;

        // Counting sort into cells (CSR layout).
        cell_start_.assign(static_cast<std::size_t>(rows_) * cols_ + 1, 0);
        std::vector<std::size_t> cell_of(points.size());
        for (std::size_t i = 0; i < points.size(); ++i) {
            cell_of[i] = cell_index(row_of(points[i].point.lat), col_of(points[i].point.lon));
            ++cell_start_[cell_of[i] + 1];
        }
        for (std::size_t c = 1; c < cell_start_.size(); ++c) cell_start_[c] += cell_start_[c - 1];
        points_.resize(points.size());
        std::vector<std::size_t> fill(cell_start_.begin(), cell_start_.end() - 1);
        for (std::size_t i = 0; i < points.size(); ++i) points_[fill[cell_of[i]]++] = points[i];
    }

    std::size_t size() const { return points_.size(); }
    int rows() const { return rows_; }
    int cols() const { return cols_; }
    double cell_deg() const { return cell_deg_; }
    const EarthModel& earth() const { return earth_; }

    /// Points in cell order (the exact set the index was built from).
    std::span<const IndexedPoint> points() const { return points_; }

    NearestResult nearest(const GeoPoint& q) const {
        const int qr = row_of(q.lat);
        const int qc = col_of(q.lon);
        // The longitude bound is only sound when no pair can be closer across the antimeridian.
        const bool lon_bound_ok = std::max(max_lon_, q.lon) - std::min(min_lon_, q.lon) <= 180.0;
        const double cos_q = std::cos(deg_to_rad(q.lat));
        const int max_ring = std::max({qr, rows_ - 1 - qr, qc, cols_ - 1 - qc});

        NearestResult best{0, std::numeric_limits<double>::infinity()};
        for (int ring = 0; ring <= max_ring; ++ring) {
            visit_ring(qr, qc, ring, [&](const IndexedPoint& p) {
                const double d = great_circle_distance(q, p.point, earth_);
                if (d < best.meters || (d == best.meters && p.id < best.id)) best = {p.id, d};
            });
            if (best.meters < lower_bound_beyond(ring, cos_q, lon_bound_ok)) break;
        }
        return best;
    }

private:
    int row_of(double lat) const {
        return std::clamp(static_cast<int>(std::floor((lat - min_lat_) / cell_deg_)), 0, rows_ - 1);
    }
    int col_of(double lon) const {
        return std::clamp(static_cast<int>(std::floor((lon - min_lon_) / cell_deg_)), 0, cols_ - 1);
    }
    std::size_t cell_index(int r, int c) const { return static_cast<std::size_t>(r) * cols_ + c; }

    template <class F>
    void visit_cell(int r, int c, F&& f) const {
        if (r < 0 || r >= rows_ || c < 0 || c >= cols_) return;
        const auto idx = cell_index(r, c);
        for (std::size_t i = cell_start_[idx]; i < cell_start_[idx + 1]; ++i) f(points_[i]);
    }

    template <class F>
    void visit_ring(int qr, int qc, int ring, F&& f) const {
        if (ring == 0) {
            visit_cell(qr, qc, f);
            return;
        }
        for (int c = qc - ring; c <= qc + ring; ++c) {
            visit_cell(qr - ring, c, f);
            visit_cell(qr + ring, c, f);
        }
        for (int r = qr - ring + 1; r <= qr + ring - 1; ++r) {
            visit_cell(r, qc - ring, f);
            visit_cell(r, qc + ring, f);
        }
    }

    /// Lower bound on the distance from the query to any point in rings > `ring`.
    ///
    /// Such points differ from the query by at least `ring` whole cells in latitude or in
    /// longitude. A latitude gap bounds the arc directly; a longitude gap bounds it by the
    /// distance from the query to the meridian plane at that offset.
    double lower_bound_beyond(int ring, double cos_q, bool lon_bound_ok) const {
        const double gap_deg = ring * cell_deg_;
        const double lat_bound = earth_.radius_m * deg_to_rad(gap_deg);
        if (!lon_bound_ok) return 0.0;
        const double gap_rad = deg_to_rad(std::min(gap_deg, 90.0));
        const double lon_bound = earth_.radius_m * std::asin(std::clamp(cos_q * std::sin(gap_rad), 0.0, 1.0));
        // Shave a relative epsilon so rounding in the bound never prunes an exact tie.
        return std::min(lat_bound, lon_bound) * (1.0 - 1e-9);
    }

    EarthModel earth_;
    double min_lat_ = 0.0, min_lon_ = 0.0, max_lon_ = 0.0;
    double cell_deg_ = 0.0;
    int rows_ = 1, cols_ = 1;
    std::vector<std::size_t> cell_start_;
    std::vector<IndexedPoint> points_;
};

inline SpatialIndex build_spatial_index(std::span<const IndexedPoint> nodes, EarthModel earth = {},
                                        SpatialIndexConfig cfg = {}) {
    return SpatialIndex(nodes, earth, cfg);
}

inline NearestResult nearest_node(const SpatialIndex& idx, const GeoPoint& q) { return idx.nearest(q); }

} // namespace crimegraph
