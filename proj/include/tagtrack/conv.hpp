#pragma once

#include <cmath>
#include <vector>

#include "tagtrack/parallel.hpp"
#include "tagtrack/types.hpp"

// Dense channels-first feature maps and the handful of primitives the
// posterior network is built from: 3x3 convolutions (stride 1 or 2, pad 1),
// leaky ReLU, nearest-neighbour x2 upsampling, and channel concatenation.
// Backward passes accumulate, matching the grid-op convention.

namespace tagtrack {

struct TensorC {
    int c = 0, h = 0, w = 0;
    std::vector<double> data;  // [c][h][w] row-major

    TensorC() = default;
    TensorC(int c_, int h_, int w_) : c(c_), h(h_), w(w_) {
        data.assign(static_cast<size_t>(c_) * h_ * w_, 0.0);
    }
    double* plane(int ch) { return data.data() + static_cast<size_t>(ch) * h * w; }
    const double* plane(int ch) const { return data.data() + static_cast<size_t>(ch) * h * w; }
    size_t size() const { return data.size(); }
};

// One 3x3 convolution: weights laid out [out_c][in_c][3][3], one bias per
// output channel.
struct ConvLayer {
    int in_c = 0, out_c = 0, stride = 1;
    std::vector<double> w, b;

    ConvLayer() = default;
    ConvLayer(int in, int out, int s) : in_c(in), out_c(out), stride(s) {
        w.assign(static_cast<size_t>(out) * in * 9, 0.0);
        b.assign(out, 0.0);
    }
    size_t param_count() const { return w.size() + b.size(); }
};

inline int conv_out_extent(int n, int stride) { return (n - 1) / stride + 1; }

inline TensorC conv2d(const TensorC& in, const ConvLayer& L) {
    require(in.c == L.in_c, "conv2d: channel mismatch");
    const int H = in.h, W = in.w, s = L.stride;
    const int OH = conv_out_extent(H, s), OW = conv_out_extent(W, s);
    TensorC out(L.out_c, OH, OW);
    par_for(L.out_c, [&](int oc) {
        double* op = out.plane(oc);
        for (int oy = 0; oy < OH; ++oy) {
            int iy0 = oy * s - 1;
            for (int ox = 0; ox < OW; ++ox) {
                int ix0 = ox * s - 1;
                double acc = L.b[oc];
                for (int ic = 0; ic < in.c; ++ic) {
                    const double* ip = in.plane(ic);
                    const double* k = L.w.data() + (static_cast<size_t>(oc) * in.c + ic) * 9;
                    for (int ky = 0; ky < 3; ++ky) {
                        int iy = iy0 + ky;
                        if (iy < 0 || iy >= H) continue;
                        const double* row = ip + static_cast<size_t>(iy) * W;
                        for (int kx = 0; kx < 3; ++kx) {
                            int ix = ix0 + kx;
                            if (ix < 0 || ix >= W) continue;
                            acc += k[ky * 3 + kx] * row[ix];
                        }
                    }
                }
                op[static_cast<size_t>(oy) * OW + ox] = acc;
            }
        }
    });
    return out;
}

// adj_out -> {adj_in, adj_w, adj_b}, all accumulated; any may be null
inline void conv2d_backward(const TensorC& in, const ConvLayer& L, const TensorC& adj_out,
                            TensorC* adj_in, ConvLayer* adj_L) {
    const int H = in.h, W = in.w, s = L.stride;
    const int OH = adj_out.h, OW = adj_out.w;
    for (int oc = 0; oc < L.out_c; ++oc) {
        const double* op = adj_out.plane(oc);
        if (adj_L)
            for (int oy = 0; oy < OH; ++oy)
                for (int ox = 0; ox < OW; ++ox)
                    adj_L->b[oc] += op[static_cast<size_t>(oy) * OW + ox];
        for (int ic = 0; ic < in.c; ++ic) {
            const double* ip = in.plane(ic);
            double* aip = adj_in ? adj_in->plane(ic) : nullptr;
            const double* k = L.w.data() + (static_cast<size_t>(oc) * in.c + ic) * 9;
            double* ak = adj_L ? adj_L->w.data() + (static_cast<size_t>(oc) * in.c + ic) * 9
                               : nullptr;
            for (int oy = 0; oy < OH; ++oy) {
                int iy0 = oy * s - 1;
                for (int ky = 0; ky < 3; ++ky) {
                    int iy = iy0 + ky;
                    if (iy < 0 || iy >= H) continue;
                    const double* irow = ip + static_cast<size_t>(iy) * W;
                    double* arow = aip ? aip + static_cast<size_t>(iy) * W : nullptr;
                    const double* orow = op + static_cast<size_t>(oy) * OW;
                    for (int ox = 0; ox < OW; ++ox) {
                        int ix0 = ox * s - 1;
                        double g = orow[ox];
                        for (int kx = 0; kx < 3; ++kx) {
                            int ix = ix0 + kx;
                            if (ix < 0 || ix >= W) continue;
                            if (arow) arow[ix] += g * k[ky * 3 + kx];
                            if (ak) ak[ky * 3 + kx] += g * irow[ix];
                        }
                    }
                }
            }
        }
    }
}

inline TensorC leaky_relu(const TensorC& in, double slope = 0.2) {
    TensorC out = in;
    for (auto& v : out.data) v = v > 0.0 ? v : slope * v;
    return out;
}

inline void leaky_relu_backward(const TensorC& pre, const TensorC& adj_out, double slope,
                                TensorC* adj_pre) {
    for (size_t i = 0; i < pre.size(); ++i)
        adj_pre->data[i] += adj_out.data[i] * (pre.data[i] > 0.0 ? 1.0 : slope);
}

inline TensorC upsample2(const TensorC& in) {
    TensorC out(in.c, in.h * 2, in.w * 2);
    for (int c = 0; c < in.c; ++c) {
        const double* ip = in.plane(c);
        double* op = out.plane(c);
        for (int y = 0; y < out.h; ++y)
            for (int x = 0; x < out.w; ++x)
                op[static_cast<size_t>(y) * out.w + x] =
                    ip[static_cast<size_t>(y / 2) * in.w + x / 2];
    }
    return out;
}

inline void upsample2_backward(const TensorC& adj_out, TensorC* adj_in) {
    for (int c = 0; c < adj_in->c; ++c) {
        const double* op = adj_out.plane(c);
        double* ip = adj_in->plane(c);
        for (int y = 0; y < adj_out.h; ++y)
            for (int x = 0; x < adj_out.w; ++x)
                ip[static_cast<size_t>(y / 2) * adj_in->w + x / 2] +=
                    op[static_cast<size_t>(y) * adj_out.w + x];
    }
}

inline TensorC concat(const TensorC& a, const TensorC& b) {
    require(a.h == b.h && a.w == b.w, "concat: spatial mismatch");
    TensorC out(a.c + b.c, a.h, a.w);
    std::copy(a.data.begin(), a.data.end(), out.data.begin());
    std::copy(b.data.begin(), b.data.end(), out.data.begin() + a.data.size());
    return out;
}

inline void concat_backward(const TensorC& adj_out, TensorC* adj_a, TensorC* adj_b) {
    size_t na = adj_a->size();
    for (size_t i = 0; i < na; ++i) adj_a->data[i] += adj_out.data[i];
    for (size_t i = 0; i < adj_b->size(); ++i) adj_b->data[i] += adj_out.data[na + i];
}

}  // namespace tagtrack
