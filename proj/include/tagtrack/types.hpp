#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

// Dense 2D containers used throughout. Coordinate convention: x = column,
// y = row, origin at the top-left pixel; data is row-major, index y*width+x.
// Displacements are in pixel units.

namespace tagtrack {

enum class FieldKind { displacement, velocity };

struct ScalarImage {
    int height = 0;
    int width = 0;
    std::vector<double> data;

    ScalarImage() = default;
    ScalarImage(int h, int w, double fill = 0.0)
        : height(h), width(w), data(static_cast<size_t>(h) * w, fill) {
        if (h <= 0 || w <= 0) throw std::invalid_argument("image dims must be positive");
    }

    double& at(int y, int x) { return data[static_cast<size_t>(y) * width + x]; }
    double at(int y, int x) const { return data[static_cast<size_t>(y) * width + x]; }
    size_t size() const { return data.size(); }

    bool same_shape(const ScalarImage& o) const {
        return height == o.height && width == o.width;
    }
};

struct VectorField {
    int height = 0;
    int width = 0;
    FieldKind kind = FieldKind::displacement;
    std::vector<double> dx;  // x (column) component
    std::vector<double> dy;  // y (row) component

    VectorField() = default;
    VectorField(int h, int w, FieldKind k)
        : height(h), width(w), kind(k),
          dx(static_cast<size_t>(h) * w, 0.0), dy(static_cast<size_t>(h) * w, 0.0) {
        if (h <= 0 || w <= 0) throw std::invalid_argument("field dims must be positive");
    }

    size_t size() const { return dx.size(); }

    bool same_shape(const VectorField& o) const {
        return height == o.height && width == o.width;
    }
    bool same_shape(const ScalarImage& o) const {
        return height == o.height && width == o.width;
    }
};

struct Point2 {
    double x = 0.0;
    double y = 0.0;
};

struct PointSet {
    std::vector<Point2> points;

    size_t size() const { return points.size(); }
};

// Per-pixel mean and diagonal log-variance of the approximate posterior
// over the stationary velocity field.
struct PosteriorParams {
    VectorField mu;       // kind = velocity
    VectorField log_var;  // same shape; log of the diagonal covariance

    PosteriorParams() = default;
    PosteriorParams(int h, int w)
        : mu(h, w, FieldKind::velocity), log_var(h, w, FieldKind::velocity) {}
};

inline bool all_finite(const std::vector<double>& v) {
    for (double x : v)
        if (!std::isfinite(x)) return false;
    return true;
}

inline bool all_finite(const ScalarImage& img) { return all_finite(img.data); }
inline bool all_finite(const VectorField& f) { return all_finite(f.dx) && all_finite(f.dy); }

inline void require(bool cond, const std::string& msg) {
    if (!cond) throw std::invalid_argument(msg);
}

}  // namespace tagtrack
