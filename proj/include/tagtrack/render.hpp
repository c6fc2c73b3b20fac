#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "tagtrack/io.hpp"
#include "tagtrack/types.hpp"

// Flat-file figure rendering: 8-bit binary PPM images carrying landmark
// overlays, displacement quivers, deformed virtual tag grids, and RMS curves.
// Everything is drawn with integer/DDA primitives so output bytes depend only
// on the inputs.

namespace tagtrack {

struct ColorRGB {
    uint8_t r = 0, g = 0, b = 0;
};

struct ImageRGB {
    int height = 0, width = 0;
    std::vector<uint8_t> data;  // 3 bytes per pixel, row-major

    ImageRGB(int h, int w, ColorRGB fill = {0, 0, 0}) : height(h), width(w), data(3ull * h * w) {
        for (size_t i = 0; i < data.size(); i += 3) {
            data[i] = fill.r;
            data[i + 1] = fill.g;
            data[i + 2] = fill.b;
        }
    }

    // Out-of-range coordinates are clipped silently so drawing never throws.
    void set(int y, int x, ColorRGB c) {
        if (y < 0 || y >= height || x < 0 || x >= width) return;
        size_t i = 3 * (static_cast<size_t>(y) * width + x);
        data[i] = c.r;
        data[i + 1] = c.g;
        data[i + 2] = c.b;
    }
};

inline std::string ppm_serialize(const ImageRGB& img) {
    std::string out = "P6\n" + std::to_string(img.width) + " " + std::to_string(img.height) +
                      "\n255\n";
    out.append(reinterpret_cast<const char*>(img.data.data()), img.data.size());
    return out;
}

inline void write_ppm(const std::filesystem::path& path, const ImageRGB& img) {
    atomic_write(path, ppm_serialize(img));
}

// Grayscale base: intensities clamped to [0,1] and scaled to 8 bits, so tag
// fading stays visible across frames instead of being auto-normalised away.
inline ImageRGB grayscale_base(const ScalarImage& frame) {
    ImageRGB img(frame.height, frame.width);
    for (int y = 0; y < frame.height; ++y)
        for (int x = 0; x < frame.width; ++x) {
            double v = std::clamp(frame.data[static_cast<size_t>(y) * frame.width + x], 0.0, 1.0);
            uint8_t g = static_cast<uint8_t>(std::lround(v * 255.0));
            img.set(y, x, {g, g, g});
        }
    return img;
}

inline void draw_dot(ImageRGB& img, double x, double y, ColorRGB c) {
    int cx = static_cast<int>(std::lround(x)), cy = static_cast<int>(std::lround(y));
    for (int dy = -1; dy <= 1; ++dy)
        for (int dx = -1; dx <= 1; ++dx) img.set(cy + dy, cx + dx, c);
}

inline void draw_line(ImageRGB& img, double x0, double y0, double x1, double y1, ColorRGB c) {
    double dx = x1 - x0, dy = y1 - y0;
    int steps = static_cast<int>(std::ceil(std::max(std::abs(dx), std::abs(dy)))) + 1;
    for (int i = 0; i <= steps; ++i) {
        double t = static_cast<double>(i) / steps;
        img.set(static_cast<int>(std::lround(y0 + t * dy)),
                static_cast<int>(std::lround(x0 + t * dx)), c);
    }
}

inline ImageRGB render_overlay(const ScalarImage& frame, const PointSet& points,
                               ColorRGB c = {255, 64, 64}) {
    ImageRGB img = grayscale_base(frame);
    for (const Point2& p : points.points) draw_dot(img, p.x, p.y, c);
    return img;
}

// Arrows from every stride-th pixel p to p + scale * field(p).
inline ImageRGB render_quiver(const ScalarImage& frame, const VectorField& field, int stride = 4,
                              double scale = 1.0, ColorRGB c = {80, 220, 80}) {
    ImageRGB img = grayscale_base(frame);
    for (int y = stride / 2; y < field.height; y += stride)
        for (int x = stride / 2; x < field.width; x += stride) {
            size_t i = static_cast<size_t>(y) * field.width + x;
            double tx = x + scale * field.dx[i], ty = y + scale * field.dy[i];
            draw_line(img, x, y, tx, ty, c);
            img.set(static_cast<int>(std::lround(ty)), static_cast<int>(std::lround(tx)),
                    {255, 255, 120});
        }
    return img;
}

// Virtual tag grid: regular frame-0 grid lines carried to the current frame
// by the Lagrangian displacement (q = p + lag(p)), drawn over the frame.
inline ImageRGB render_tag_grid(const ScalarImage& frame, const VectorField& lag, int spacing = 8,
                                ColorRGB c = {90, 200, 255}) {
    ImageRGB img = grayscale_base(frame);
    auto carried = [&](double gx, double gy, double& qx, double& qy) {
        int xi = std::clamp(static_cast<int>(std::lround(gx)), 0, lag.width - 1);
        int yi = std::clamp(static_cast<int>(std::lround(gy)), 0, lag.height - 1);
        size_t i = static_cast<size_t>(yi) * lag.width + xi;
        qx = gx + lag.dx[i];
        qy = gy + lag.dy[i];
    };
    for (int gx = 0; gx < lag.width; gx += spacing)
        for (double gy = 0; gy < lag.height; gy += 0.5) {
            double qx, qy;
            carried(gx, gy, qx, qy);
            img.set(static_cast<int>(std::lround(qy)), static_cast<int>(std::lround(qx)), c);
        }
    for (int gy = 0; gy < lag.height; gy += spacing)
        for (double gx = 0; gx < lag.width; gx += 0.5) {
            double qx, qy;
            carried(gx, gy, qx, qy);
            img.set(static_cast<int>(std::lround(qy)), static_cast<int>(std::lround(qx)), c);
        }
    return img;
}

// Simple curve plot: white canvas, grey frame, red polyline; y spans
// [0, 1.1 * max(values)].
inline ImageRGB render_curve(const std::vector<double>& values, int height = 200, int width = 320,
                             ColorRGB c = {220, 40, 40}) {
    ImageRGB img(height, width, {255, 255, 255});
    for (int x = 0; x < width; ++x) {
        img.set(0, x, {160, 160, 160});
        img.set(height - 1, x, {160, 160, 160});
    }
    for (int y = 0; y < height; ++y) {
        img.set(y, 0, {160, 160, 160});
        img.set(y, width - 1, {160, 160, 160});
    }
    if (values.empty()) return img;
    double vmax = 0;
    for (double v : values) vmax = std::max(vmax, v);
    vmax = vmax > 0 ? 1.1 * vmax : 1.0;
    auto px = [&](size_t k) {
        double fx = values.size() == 1 ? 0.5 : static_cast<double>(k) / (values.size() - 1);
        return 8.0 + fx * (width - 17);
    };
    auto py = [&](double v) { return (height - 9) - v / vmax * (height - 17); };
    for (size_t k = 0; k + 1 < values.size(); ++k)
        draw_line(img, px(k), py(values[k]), px(k + 1), py(values[k + 1]), c);
    for (size_t k = 0; k < values.size(); ++k) draw_dot(img, px(k), py(values[k]), c);
    return img;
}

}  // namespace tagtrack
