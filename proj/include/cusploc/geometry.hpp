#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "cusploc/errors.hpp"

namespace cusploc {

/// Point (or vector) in the detector plane.
struct Vec2 {
    double x = 0.0;
    double y = 0.0;

    friend Vec2 operator+(Vec2 a, Vec2 b) { return {a.x + b.x, a.y + b.y}; }
    friend Vec2 operator-(Vec2 a, Vec2 b) { return {a.x - b.x, a.y - b.y}; }
    friend Vec2 operator*(double c, Vec2 a) { return {c * a.x, c * a.y}; }
    friend Vec2 operator*(Vec2 a, double c) { return {c * a.x, c * a.y}; }
    friend bool operator==(Vec2 a, Vec2 b) { return a.x == b.x && a.y == b.y; }
};

inline double dot(Vec2 a, Vec2 b) { return a.x * b.x + a.y * b.y; }
inline double cross(Vec2 a, Vec2 b) { return a.x * b.y - a.y * b.x; }
inline double norm(Vec2 a) { return std::hypot(a.x, a.y); }
inline double distance(Vec2 a, Vec2 b) { return norm(a - b); }

/// Axis-aligned rectangle, open in the model but stored by its closure bounds.
struct Rect {
    double xmin = 0.0, xmax = 0.0;
    double ymin = 0.0, ymax = 0.0;

    bool valid() const { return xmin < xmax && ymin < ymax; }
    bool contains(Vec2 p) const {
        return p.x >= xmin && p.x <= xmax && p.y >= ymin && p.y <= ymax;
    }
    bool strictly_contains(Vec2 p) const {
        return p.x > xmin && p.x < xmax && p.y > ymin && p.y < ymax;
    }
    Vec2 center() const { return {0.5 * (xmin + xmax), 0.5 * (ymin + ymax)}; }
    double width() const { return xmax - xmin; }
    double height() const { return ymax - ymin; }
    double diameter() const { return std::hypot(width(), height()); }

    Rect inflated(double dx, double dy) const {
        return {xmin - dx, xmax + dx, ymin - dy, ymax + dy};
    }
};

/// Distance from p to the closest point of the rectangle (0 if inside).
inline double min_distance_to_rect(Vec2 p, const Rect& r) {
    const double cx = std::clamp(p.x, r.xmin, r.xmax);
    const double cy = std::clamp(p.y, r.ymin, r.ymax);
    return std::hypot(p.x - cx, p.y - cy);
}

/// Distance from p to the farthest point of the rectangle (always a corner).
inline double max_distance_to_rect(Vec2 p, const Rect& r) {
    const double dx = std::max(std::abs(p.x - r.xmin), std::abs(p.x - r.xmax));
    const double dy = std::max(std::abs(p.y - r.ymin), std::abs(p.y - r.ymax));
    return std::hypot(dx, dy);
}

/// Signal travel time from `source` to `detector` at speed `nu`.
inline double arrival_time(Vec2 detector, Vec2 source, double nu) {
    if (!(nu > 0.0))
        throw invalid_parameter_error("arrival_time: propagation speed must be positive");
    return distance(detector, source) / nu;
}

/// Unit vector pointing from `source` toward `detector`.
inline Vec2 unit_direction(Vec2 detector, Vec2 source) {
    const double rho = distance(detector, source);
    if (rho == 0.0)
        throw degenerate_geometry_error("unit_direction: detector coincides with source");
    return {(detector.x - source.x) / rho, (detector.y - source.y) / rho};
}

/// True if every point lies on one straight line (within relative tolerance).
inline bool all_collinear(const std::vector<Vec2>& pts, double rel_tol = 1e-12) {
    if (pts.size() < 3) return true;
    // pick the farthest pair as the baseline for numerical stability
    std::size_t a = 0, b = 1;
    double best = distance(pts[0], pts[1]);
    for (std::size_t i = 0; i < pts.size(); ++i)
        for (std::size_t j = i + 1; j < pts.size(); ++j)
            if (double d = distance(pts[i], pts[j]); d > best) { best = d; a = i; b = j; }
    if (best == 0.0) return true;
    const Vec2 base = pts[b] - pts[a];
    for (const Vec2& p : pts)
        if (std::abs(cross(base, p - pts[a])) > rel_tol * best * best) return false;
    return true;
}

} // namespace cusploc
