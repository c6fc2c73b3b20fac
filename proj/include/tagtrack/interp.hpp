#pragma once

#include <algorithm>
#include <cmath>

#include "tagtrack/types.hpp"

namespace tagtrack {

// Bilinear sampling on the pixel grid with clamp-to-border coordinates.
// The four corner weights are prod_d (1 - |p_d - q_d|); integer coordinates
// reproduce pixel values exactly (weights collapse to {1,0}).

struct BilinearTap {
    int x0, y0, x1, y1;   // corner indices, already clamped in-bounds
    double wx, wy;        // fractional weights toward (x1, y1)
    bool inside_x, inside_y;  // false if the coordinate was clamped
};

inline BilinearTap make_tap(int height, int width, double x, double y) {
    BilinearTap t;
    t.inside_x = (x >= 0.0 && x <= width - 1);
    t.inside_y = (y >= 0.0 && y <= height - 1);
    double xc = std::min(std::max(x, 0.0), static_cast<double>(width - 1));
    double yc = std::min(std::max(y, 0.0), static_cast<double>(height - 1));
    t.x0 = std::min(static_cast<int>(xc), width - 2 >= 0 ? width - 2 : 0);
    t.y0 = std::min(static_cast<int>(yc), height - 2 >= 0 ? height - 2 : 0);
    t.x1 = std::min(t.x0 + 1, width - 1);
    t.y1 = std::min(t.y0 + 1, height - 1);
    t.wx = xc - t.x0;
    t.wy = yc - t.y0;
    return t;
}

inline double tap_value(const BilinearTap& t, const double* chan, int width) {
    const double* r0 = chan + static_cast<size_t>(t.y0) * width;
    const double* r1 = chan + static_cast<size_t>(t.y1) * width;
    double top = (1.0 - t.wx) * r0[t.x0] + t.wx * r0[t.x1];
    double bot = (1.0 - t.wx) * r1[t.x0] + t.wx * r1[t.x1];
    return (1.0 - t.wy) * top + t.wy * bot;
}

// d(sample)/dx and d(sample)/dy of the interpolant; zero in a clamped
// direction (the clamp makes the value constant there).
inline void tap_grad(const BilinearTap& t, const double* chan, int width,
                     double& gx, double& gy) {
    const double* r0 = chan + static_cast<size_t>(t.y0) * width;
    const double* r1 = chan + static_cast<size_t>(t.y1) * width;
    gx = t.inside_x
             ? (1.0 - t.wy) * (r0[t.x1] - r0[t.x0]) + t.wy * (r1[t.x1] - r1[t.x0])
             : 0.0;
    gy = t.inside_y
             ? (1.0 - t.wx) * (r1[t.x0] - r0[t.x0]) + t.wx * (r1[t.x1] - r0[t.x1])
             : 0.0;
}

// adjoint of tap_value: scatter `adj` onto the four corners
inline void tap_splat(const BilinearTap& t, double* chan, int width, double adj) {
    double* r0 = chan + static_cast<size_t>(t.y0) * width;
    double* r1 = chan + static_cast<size_t>(t.y1) * width;
    r0[t.x0] += (1.0 - t.wx) * (1.0 - t.wy) * adj;
    r0[t.x1] += t.wx * (1.0 - t.wy) * adj;
    r1[t.x0] += (1.0 - t.wx) * t.wy * adj;
    r1[t.x1] += t.wx * t.wy * adj;
}

}  // namespace tagtrack
