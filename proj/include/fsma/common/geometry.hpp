#pragma once

#include <cmath>
#include <vector>

namespace fsma {

/// Pixel coordinates; integer values sit on pixel centres.
struct Point2 {
    double x = 0.0;
    double y = 0.0;

    friend bool operator==(const Point2&, const Point2&) = default;
};

inline double distance(const Point2& a, const Point2& b) { return std::hypot(a.x - b.x, a.y - b.y); }

using PointSet = std::vector<Point2>;

} // namespace fsma
