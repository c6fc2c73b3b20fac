#pragma once

// Independent brute-force oracles and shared test fixtures. Everything here
// is deliberately coded from the definitions, not by calling the library
// routines it checks.

#include <cmath>
#include <functional>
#include <vector>

#include "tagtrack/rng.hpp"
#include "tagtrack/types.hpp"

namespace oracle {

using tagtrack::FieldKind;
using tagtrack::Point2;
using tagtrack::Rng;
using tagtrack::ScalarImage;
using tagtrack::VectorField;

// whole-image weight-sum interpolation: sum_q I[q] * prod_d max(0, 1-|p_d-q_d|)
inline double bilinear(const ScalarImage& img, double x, double y) {
    double xc = std::min(std::max(x, 0.0), static_cast<double>(img.width - 1));
    double yc = std::min(std::max(y, 0.0), static_cast<double>(img.height - 1));
    double acc = 0.0;
    for (int qy = 0; qy < img.height; ++qy) {
        for (int qx = 0; qx < img.width; ++qx) {
            double w = std::max(0.0, 1.0 - std::abs(xc - qx)) *
                       std::max(0.0, 1.0 - std::abs(yc - qy));
            if (w > 0.0) acc += w * img.at(qy, qx);
        }
    }
    return acc;
}

inline void sample_field(const VectorField& f, double x, double y, double& vx, double& vy) {
    ScalarImage cx(f.height, f.width), cy(f.height, f.width);
    cx.data = f.dx;
    cy.data = f.dy;
    vx = bilinear(cx, x, y);
    vy = bilinear(cy, x, y);
}

// random texture in [0,1]
inline ScalarImage random_image(int h, int w, Rng& rng) {
    ScalarImage img(h, w);
    for (auto& v : img.data) v = rng.uniform();
    return img;
}

// smooth random field from a handful of low-frequency sinusoids, scaled to a
// requested max magnitude
inline VectorField smooth_field(int h, int w, double max_mag, Rng& rng,
                                FieldKind kind = FieldKind::displacement) {
    VectorField f(h, w, kind);
    auto fill = [&](std::vector<double>& chan) {
        struct Mode {
            double fx, fy, phase, amp;
        };
        std::vector<Mode> modes;
        for (int k = 0; k < 4; ++k)
            modes.push_back({rng.uniform(-2.0, 2.0) / w, rng.uniform(-2.0, 2.0) / h,
                             rng.uniform(0.0, 6.283185307), rng.uniform(0.5, 1.0)});
        double peak = 0.0;
        std::vector<double> tmp(chan.size());
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) {
                double v = 0.0;
                for (const auto& m : modes)
                    v += m.amp * std::sin(6.283185307 * (m.fx * x + m.fy * y) + m.phase);
                tmp[static_cast<size_t>(y) * w + x] = v;
                peak = std::max(peak, std::abs(v));
            }
        double s = peak > 0 ? max_mag / peak : 0.0;
        for (size_t i = 0; i < chan.size(); ++i) chan[i] = tmp[i] * s;
    };
    fill(f.dx);
    fill(f.dy);
    return f;
}

inline double rel_err(double a, double b) {
    return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-6});
}

// central finite difference of a scalar functional w.r.t. one slot of a buffer
inline double fd_slot(std::vector<double>& buf, size_t i, double h,
                      const std::function<double()>& eval) {
    double keep = buf[i];
    buf[i] = keep + h;
    double fp = eval();
    buf[i] = keep - h;
    double fm = eval();
    buf[i] = keep;
    return (fp - fm) / (2.0 * h);
}

}  // namespace oracle
