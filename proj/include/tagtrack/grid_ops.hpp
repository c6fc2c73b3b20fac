#pragma once

#include <cmath>
#include <vector>

#include "tagtrack/interp.hpp"
#include "tagtrack/parallel.hpp"
#include "tagtrack/types.hpp"

// Core grid operations. Every differentiable operation comes with an
// analytic adjoint (suffix _backward); adjoint buffers are accumulated into,
// never overwritten, so callers can sum contributions from several paths.
// Scatter-adds (splats) run serially; gather loops are row-parallel.

namespace tagtrack {

inline std::vector<double> bilinear_sample(const ScalarImage& img, const PointSet& pts) {
    require(all_finite(img), "non-finite image");
    std::vector<double> out(pts.size());
    for (size_t i = 0; i < pts.size(); ++i) {
        const Point2& p = pts.points[i];
        if (!std::isfinite(p.x) || !std::isfinite(p.y)) throw std::invalid_argument("invalid point");
        BilinearTap t = make_tap(img.height, img.width, p.x, p.y);
        out[i] = tap_value(t, img.data.data(), img.width);
    }
    return out;
}

// adjoint: adj_values -> (adj_pts, adj_img), both accumulated
inline void bilinear_sample_backward(const ScalarImage& img, const PointSet& pts,
                                     const std::vector<double>& adj_values,
                                     PointSet* adj_pts, ScalarImage* adj_img) {
    require(adj_values.size() == pts.size(), "adjoint size mismatch");
    for (size_t i = 0; i < pts.size(); ++i) {
        const Point2& p = pts.points[i];
        BilinearTap t = make_tap(img.height, img.width, p.x, p.y);
        if (adj_pts) {
            double gx, gy;
            tap_grad(t, img.data.data(), img.width, gx, gy);
            adj_pts->points[i].x += gx * adj_values[i];
            adj_pts->points[i].y += gy * adj_values[i];
        }
        if (adj_img) tap_splat(t, adj_img->data.data(), img.width, adj_values[i]);
    }
}

inline void sample_field(const VectorField& f, double x, double y, double& vx, double& vy) {
    BilinearTap t = make_tap(f.height, f.width, x, y);
    vx = tap_value(t, f.dx.data(), f.width);
    vy = tap_value(t, f.dy.data(), f.width);
}

// Backward warping: output(p) = input(p + field(p)).
inline ScalarImage warp_image(const ScalarImage& img, const VectorField& field) {
    require(field.same_shape(img), "shape mismatch");
    require(field.kind == FieldKind::displacement, "warp expects a displacement field");
    ScalarImage out(img.height, img.width);
    const int W = img.width;
    par_for(img.height, [&](int y) {
        for (int x = 0; x < W; ++x) {
            size_t i = static_cast<size_t>(y) * W + x;
            BilinearTap t = make_tap(img.height, W, x + field.dx[i], y + field.dy[i]);
            out.data[i] = tap_value(t, img.data.data(), W);
        }
    });
    return out;
}

inline void warp_image_backward(const ScalarImage& img, const VectorField& field,
                                const ScalarImage& adj_out,
                                ScalarImage* adj_img, VectorField* adj_field) {
    require(field.same_shape(img) && adj_out.same_shape(img), "shape mismatch");
    const int W = img.width;
    if (adj_field) {
        par_for(img.height, [&](int y) {
            for (int x = 0; x < W; ++x) {
                size_t i = static_cast<size_t>(y) * W + x;
                BilinearTap t = make_tap(img.height, W, x + field.dx[i], y + field.dy[i]);
                double gx, gy;
                tap_grad(t, img.data.data(), W, gx, gy);
                adj_field->dx[i] += gx * adj_out.data[i];
                adj_field->dy[i] += gy * adj_out.data[i];
            }
        });
    }
    if (adj_img) {
        for (int y = 0; y < img.height; ++y) {
            for (int x = 0; x < W; ++x) {
                size_t i = static_cast<size_t>(y) * W + x;
                BilinearTap t = make_tap(img.height, W, x + field.dx[i], y + field.dy[i]);
                tap_splat(t, adj_img->data.data(), W, adj_out.data[i]);
            }
        }
    }
}

// (outer ∘ inner)(p) = p + result(p) with result(p) = inner(p) + outer
// interpolated at p + inner(p).
inline VectorField compose_fields(const VectorField& outer, const VectorField& inner) {
    require(outer.same_shape(inner), "shape mismatch");
    require(outer.kind == FieldKind::displacement && inner.kind == FieldKind::displacement,
            "compose expects displacement fields");
    VectorField out(outer.height, outer.width, FieldKind::displacement);
    const int W = outer.width;
    par_for(outer.height, [&](int y) {
        for (int x = 0; x < W; ++x) {
            size_t i = static_cast<size_t>(y) * W + x;
            BilinearTap t = make_tap(outer.height, W, x + inner.dx[i], y + inner.dy[i]);
            out.dx[i] = inner.dx[i] + tap_value(t, outer.dx.data(), W);
            out.dy[i] = inner.dy[i] + tap_value(t, outer.dy.data(), W);
        }
    });
    return out;
}

inline void compose_fields_backward(const VectorField& outer, const VectorField& inner,
                                    const VectorField& adj_out,
                                    VectorField* adj_outer, VectorField* adj_inner) {
    require(outer.same_shape(inner) && adj_out.same_shape(inner), "shape mismatch");
    const int W = outer.width;
    if (adj_inner) {
        par_for(outer.height, [&](int y) {
            for (int x = 0; x < W; ++x) {
                size_t i = static_cast<size_t>(y) * W + x;
                BilinearTap t = make_tap(outer.height, W, x + inner.dx[i], y + inner.dy[i]);
                double gxx, gxy, gyx, gyy;  // g<chan><coord>
                tap_grad(t, outer.dx.data(), W, gxx, gxy);
                tap_grad(t, outer.dy.data(), W, gyx, gyy);
                adj_inner->dx[i] += adj_out.dx[i] * (1.0 + gxx) + adj_out.dy[i] * gyx;
                adj_inner->dy[i] += adj_out.dx[i] * gxy + adj_out.dy[i] * (1.0 + gyy);
            }
        });
    }
    if (adj_outer) {
        for (int y = 0; y < outer.height; ++y) {
            for (int x = 0; x < W; ++x) {
                size_t i = static_cast<size_t>(y) * W + x;
                BilinearTap t = make_tap(outer.height, W, x + inner.dx[i], y + inner.dy[i]);
                tap_splat(t, adj_outer->dx.data(), W, adj_out.dx[i]);
                tap_splat(t, adj_outer->dy.data(), W, adj_out.dy[i]);
            }
        }
    }
}

// Four forward-difference derivative images (zero in the padded last
// row/column), order: d(dx)/dx, d(dx)/dy, d(dy)/dx, d(dy)/dy.
struct FieldGradient {
    ScalarImage dxx, dxy, dyx, dyy;
};

inline FieldGradient spatial_gradient(const VectorField& f) {
    FieldGradient g{ScalarImage(f.height, f.width), ScalarImage(f.height, f.width),
                    ScalarImage(f.height, f.width), ScalarImage(f.height, f.width)};
    const int W = f.width, H = f.height;
    for (int y = 0; y < H; ++y) {
        for (int x = 0; x < W; ++x) {
            size_t i = static_cast<size_t>(y) * W + x;
            if (x + 1 < W) {
                g.dxx.data[i] = f.dx[i + 1] - f.dx[i];
                g.dyx.data[i] = f.dy[i + 1] - f.dy[i];
            }
            if (y + 1 < H) {
                g.dxy.data[i] = f.dx[i + W] - f.dx[i];
                g.dyy.data[i] = f.dy[i + W] - f.dy[i];
            }
        }
    }
    return g;
}

// adjoint of spatial_gradient (transposed difference stencils)
inline void spatial_gradient_backward(const FieldGradient& adj_g, VectorField* adj_f) {
    const int W = adj_f->width, H = adj_f->height;
    for (int y = 0; y < H; ++y) {
        for (int x = 0; x < W; ++x) {
            size_t i = static_cast<size_t>(y) * W + x;
            if (x + 1 < W) {
                adj_f->dx[i + 1] += adj_g.dxx.data[i];
                adj_f->dx[i] -= adj_g.dxx.data[i];
                adj_f->dy[i + 1] += adj_g.dyx.data[i];
                adj_f->dy[i] -= adj_g.dyx.data[i];
            }
            if (y + 1 < H) {
                adj_f->dx[i + W] += adj_g.dxy.data[i];
                adj_f->dx[i] -= adj_g.dxy.data[i];
                adj_f->dy[i + W] += adj_g.dyy.data[i];
                adj_f->dy[i] -= adj_g.dyy.data[i];
            }
        }
    }
}

namespace detail {
// central difference in the interior, one-sided at the borders; returns the
// derivative of channel `c` along x or y at (y,x)
inline double diff_x(const std::vector<double>& c, int W, int y, int x) {
    size_t i = static_cast<size_t>(y) * W + x;
    if (x == 0) return c[i + 1] - c[i];
    if (x == W - 1) return c[i] - c[i - 1];
    return 0.5 * (c[i + 1] - c[i - 1]);
}
inline double diff_y(const std::vector<double>& c, int W, int H, int y, int x) {
    size_t i = static_cast<size_t>(y) * W + x;
    if (y == 0) return c[i + W] - c[i];
    if (y == H - 1) return c[i] - c[i - W];
    return 0.5 * (c[i + W] - c[i - W]);
}
}  // namespace detail

// det(I + grad u) per pixel
inline ScalarImage jacobian_determinant(const VectorField& f) {
    require(all_finite(f), "non-finite field");
    ScalarImage det(f.height, f.width);
    const int W = f.width, H = f.height;
    par_for(H, [&](int y) {
        for (int x = 0; x < W; ++x) {
            double a = 1.0 + detail::diff_x(f.dx, W, y, x);
            double b = detail::diff_y(f.dx, W, H, y, x);
            double c = detail::diff_x(f.dy, W, y, x);
            double d = 1.0 + detail::diff_y(f.dy, W, H, y, x);
            det.at(y, x) = a * d - b * c;
        }
    });
    return det;
}

inline int count_nonpositive(const ScalarImage& det) {
    int n = 0;
    for (double v : det.data)
        if (v <= 0.0) ++n;
    return n;
}

// adjoint of jacobian_determinant w.r.t. the field
inline void jacobian_determinant_backward(const VectorField& f, const ScalarImage& adj_det,
                                          VectorField* adj_f) {
    const int W = f.width, H = f.height;
    auto splat_diff_x = [&](std::vector<double>& adj_c, int y, int x, double a) {
        size_t i = static_cast<size_t>(y) * W + x;
        if (x == 0) {
            adj_c[i + 1] += a;
            adj_c[i] -= a;
        } else if (x == W - 1) {
            adj_c[i] += a;
            adj_c[i - 1] -= a;
        } else {
            adj_c[i + 1] += 0.5 * a;
            adj_c[i - 1] -= 0.5 * a;
        }
    };
    auto splat_diff_y = [&](std::vector<double>& adj_c, int y, int x, double a) {
        size_t i = static_cast<size_t>(y) * W + x;
        if (y == 0) {
            adj_c[i + W] += a;
            adj_c[i] -= a;
        } else if (y == H - 1) {
            adj_c[i] += a;
            adj_c[i - W] -= a;
        } else {
            adj_c[i + W] += 0.5 * a;
            adj_c[i - W] -= 0.5 * a;
        }
    };
    for (int y = 0; y < H; ++y) {
        for (int x = 0; x < W; ++x) {
            double a = 1.0 + detail::diff_x(f.dx, W, y, x);
            double b = detail::diff_y(f.dx, W, H, y, x);
            double c = detail::diff_x(f.dy, W, y, x);
            double d = 1.0 + detail::diff_y(f.dy, W, H, y, x);
            double g = adj_det.at(y, x);
            // det = a d - b c
            splat_diff_x(adj_f->dx, y, x, g * d);
            splat_diff_y(adj_f->dy, y, x, g * a);
            splat_diff_y(adj_f->dx, y, x, -g * c);
            splat_diff_x(adj_f->dy, y, x, -g * b);
        }
    }
}

}  // namespace tagtrack
