#pragma once

#include <cmath>
#include <vector>

#include "tagtrack/conv.hpp"
#include "tagtrack/rng.hpp"
#include "tagtrack/types.hpp"

// Posterior network: a frame pair goes in as a 2-channel map, an
// encoder-decoder with skip connections comes back out as per-pixel mu and
// log_var over the stationary velocity field. All convolutions are 3x3; the
// first two encoder levels stride 2 and the decoder upsamples back, so H and
// W must be divisible by 4 and the trunk is equivariant to 4-px shifts. The
// mu head starts at zero (identity transform) and the log_var head at a -10
// bias (near-deterministic early training).

namespace tagtrack {

struct NetConfig {
    std::vector<int> enc = {16, 32, 32, 32};  // strides 2,2,1,1
    std::vector<int> dec = {32, 32, 32, 16};
    double leaky_slope = 0.2;

    void validate() const {
        require(enc.size() == 4 && dec.size() == 4,
                "net config: four encoder and four decoder widths expected");
        for (int c : enc) require(c >= 1, "net config: widths must be positive");
        for (int c : dec) require(c >= 1, "net config: widths must be positive");
        require(leaky_slope > 0.0 && leaky_slope < 1.0, "net config: bad leaky slope");
    }
};

struct NetParams {
    NetConfig cfg;
    ConvLayer e0, e1, e2, e3;  // encoder
    ConvLayer d0, d1, d2, d3;  // decoder
    ConvLayer head_mu, head_lv;

    std::vector<ConvLayer*> layers() {
        return {&e0, &e1, &e2, &e3, &d0, &d1, &d2, &d3, &head_mu, &head_lv};
    }
    std::vector<const ConvLayer*> layers() const {
        return {&e0, &e1, &e2, &e3, &d0, &d1, &d2, &d3, &head_mu, &head_lv};
    }
    static const char* layer_name(int i) {
        static const char* names[] = {"e0", "e1", "e2", "e3", "d0",
                                      "d1", "d2", "d3", "head_mu", "head_lv"};
        return names[i];
    }
    size_t param_count() const {
        size_t n = 0;
        for (const auto* l : layers()) n += l->param_count();
        return n;
    }
};

// He-normal trunk, zero mu head, zero-weight log_var head with -10 bias
inline NetParams make_net(const NetConfig& cfg, uint64_t seed) {
    cfg.validate();
    NetParams p;
    p.cfg = cfg;
    const auto& e = cfg.enc;
    const auto& d = cfg.dec;
    p.e0 = ConvLayer(2, e[0], 2);
    p.e1 = ConvLayer(e[0], e[1], 2);
    p.e2 = ConvLayer(e[1], e[2], 1);
    p.e3 = ConvLayer(e[2], e[3], 1);
    p.d0 = ConvLayer(e[3] + e[1], d[0], 1);  // skip from e1 at quarter res
    p.d1 = ConvLayer(d[0] + e[0], d[1], 1);  // skip from e0 at half res
    p.d2 = ConvLayer(d[1] + 2, d[2], 1);     // skip from the input pair
    p.d3 = ConvLayer(d[2], d[3], 1);
    p.head_mu = ConvLayer(d[3], 2, 1);
    p.head_lv = ConvLayer(d[3], 2, 1);

    Rng rng(Rng::derive(seed, 0x4e45u));
    auto trunk = {&p.e0, &p.e1, &p.e2, &p.e3, &p.d0, &p.d1, &p.d2, &p.d3};
    for (ConvLayer* l : trunk) {
        double std = std::sqrt(2.0 / (l->in_c * 9.0));
        for (auto& v : l->w) v = std * rng.normal();
    }
    for (auto& v : p.head_lv.b) v = -10.0;
    return p;
}

inline NetParams zero_like(const NetParams& p) {
    NetParams z = p;
    for (ConvLayer* l : z.layers()) {
        std::fill(l->w.begin(), l->w.end(), 0.0);
        std::fill(l->b.begin(), l->b.end(), 0.0);
    }
    return z;
}

// intermediates kept for the backward pass (a* pre-activations, h* post,
// c* concatenations)
struct NetCache {
    TensorC in;
    TensorC a0, h0, a1, h1, a2, h2, a3, h3;
    TensorC c0, a4, h4, c1, a5, h5, c2, a6, h6, a7, h7;
};

namespace detail {

inline TensorC pair_to_tensor(const ScalarImage& x, const ScalarImage& y) {
    TensorC t(2, x.height, x.width);
    std::copy(x.data.begin(), x.data.end(), t.plane(0));
    std::copy(y.data.begin(), y.data.end(), t.plane(1));
    return t;
}

inline VectorField tensor_to_field(const TensorC& t, FieldKind kind) {
    VectorField f(t.h, t.w, kind);
    std::copy(t.plane(0), t.plane(0) + f.size(), f.dx.begin());
    std::copy(t.plane(1), t.plane(1) + f.size(), f.dy.begin());
    return f;
}

inline TensorC field_to_tensor(const VectorField& f) {
    TensorC t(2, f.height, f.width);
    std::copy(f.dx.begin(), f.dx.end(), t.plane(0));
    std::copy(f.dy.begin(), f.dy.end(), t.plane(1));
    return t;
}

}  // namespace detail

inline PosteriorParams net_forward(const ScalarImage& x, const ScalarImage& y,
                                   const NetParams& p, NetCache* cache = nullptr) {
    require(x.same_shape(y), "net_forward: frame shape mismatch");
    require(x.height % 4 == 0 && x.width % 4 == 0,
            "net_forward: grid must be divisible by 4");
    const double slope = p.cfg.leaky_slope;
    NetCache local;
    NetCache& c = cache ? *cache : local;

    c.in = detail::pair_to_tensor(x, y);
    c.a0 = conv2d(c.in, p.e0);
    c.h0 = leaky_relu(c.a0, slope);
    c.a1 = conv2d(c.h0, p.e1);
    c.h1 = leaky_relu(c.a1, slope);
    c.a2 = conv2d(c.h1, p.e2);
    c.h2 = leaky_relu(c.a2, slope);
    c.a3 = conv2d(c.h2, p.e3);
    c.h3 = leaky_relu(c.a3, slope);
    c.c0 = concat(c.h3, c.h1);
    c.a4 = conv2d(c.c0, p.d0);
    c.h4 = leaky_relu(c.a4, slope);
    c.c1 = concat(upsample2(c.h4), c.h0);
    c.a5 = conv2d(c.c1, p.d1);
    c.h5 = leaky_relu(c.a5, slope);
    c.c2 = concat(upsample2(c.h5), c.in);
    c.a6 = conv2d(c.c2, p.d2);
    c.h6 = leaky_relu(c.a6, slope);
    c.a7 = conv2d(c.h6, p.d3);
    c.h7 = leaky_relu(c.a7, slope);
    TensorC mu = conv2d(c.h7, p.head_mu);
    TensorC lv = conv2d(c.h7, p.head_lv);

    PosteriorParams post;
    post.mu = detail::tensor_to_field(mu, FieldKind::velocity);
    post.log_var = detail::tensor_to_field(lv, FieldKind::velocity);
    return post;
}

// adjoints over (mu, log_var) -> parameter gradients, accumulated into *grads
inline void net_backward(const NetParams& p, const NetCache& c, const VectorField& adj_mu,
                         const VectorField& adj_lv, NetParams* grads) {
    const double slope = p.cfg.leaky_slope;
    TensorC adj_h7(c.h7.c, c.h7.h, c.h7.w);
    conv2d_backward(c.h7, p.head_mu, detail::field_to_tensor(adj_mu), &adj_h7,
                    &grads->head_mu);
    conv2d_backward(c.h7, p.head_lv, detail::field_to_tensor(adj_lv), &adj_h7,
                    &grads->head_lv);

    TensorC adj_a7(c.a7.c, c.a7.h, c.a7.w);
    leaky_relu_backward(c.a7, adj_h7, slope, &adj_a7);
    TensorC adj_h6(c.h6.c, c.h6.h, c.h6.w);
    conv2d_backward(c.h6, p.d3, adj_a7, &adj_h6, &grads->d3);

    TensorC adj_a6(c.a6.c, c.a6.h, c.a6.w);
    leaky_relu_backward(c.a6, adj_h6, slope, &adj_a6);
    TensorC adj_c2(c.c2.c, c.c2.h, c.c2.w);
    conv2d_backward(c.c2, p.d2, adj_a6, &adj_c2, &grads->d2);

    TensorC adj_u1(c.h5.c, c.h5.h * 2, c.h5.w * 2);
    TensorC adj_in_drop(c.in.c, c.in.h, c.in.w);  // frames are data; dropped
    concat_backward(adj_c2, &adj_u1, &adj_in_drop);
    TensorC adj_h5(c.h5.c, c.h5.h, c.h5.w);
    upsample2_backward(adj_u1, &adj_h5);

    TensorC adj_a5(c.a5.c, c.a5.h, c.a5.w);
    leaky_relu_backward(c.a5, adj_h5, slope, &adj_a5);
    TensorC adj_c1(c.c1.c, c.c1.h, c.c1.w);
    conv2d_backward(c.c1, p.d1, adj_a5, &adj_c1, &grads->d1);

    TensorC adj_u0(c.h4.c, c.h4.h * 2, c.h4.w * 2);
    TensorC adj_h0(c.h0.c, c.h0.h, c.h0.w);
    concat_backward(adj_c1, &adj_u0, &adj_h0);
    TensorC adj_h4(c.h4.c, c.h4.h, c.h4.w);
    upsample2_backward(adj_u0, &adj_h4);

    TensorC adj_a4(c.a4.c, c.a4.h, c.a4.w);
    leaky_relu_backward(c.a4, adj_h4, slope, &adj_a4);
    TensorC adj_c0(c.c0.c, c.c0.h, c.c0.w);
    conv2d_backward(c.c0, p.d0, adj_a4, &adj_c0, &grads->d0);

    TensorC adj_h3(c.h3.c, c.h3.h, c.h3.w);
    TensorC adj_h1(c.h1.c, c.h1.h, c.h1.w);
    concat_backward(adj_c0, &adj_h3, &adj_h1);

    TensorC adj_a3(c.a3.c, c.a3.h, c.a3.w);
    leaky_relu_backward(c.a3, adj_h3, slope, &adj_a3);
    TensorC adj_h2(c.h2.c, c.h2.h, c.h2.w);
    conv2d_backward(c.h2, p.e3, adj_a3, &adj_h2, &grads->e3);

    TensorC adj_a2(c.a2.c, c.a2.h, c.a2.w);
    leaky_relu_backward(c.a2, adj_h2, slope, &adj_a2);
    conv2d_backward(c.h1, p.e2, adj_a2, &adj_h1, &grads->e2);

    TensorC adj_a1(c.a1.c, c.a1.h, c.a1.w);
    leaky_relu_backward(c.a1, adj_h1, slope, &adj_a1);
    conv2d_backward(c.h0, p.e1, adj_a1, &adj_h0, &grads->e1);

    TensorC adj_a0(c.a0.c, c.a0.h, c.a0.w);
    leaky_relu_backward(c.a0, adj_h0, slope, &adj_a0);
    conv2d_backward(c.in, p.e0, adj_a0, nullptr, &grads->e0);
}

// z = mu + eps .* exp(log_var / 2); eps_out receives the drawn noise so the
// reparameterized gradient (d z / d log_var = eps/2 * std) can be formed
inline VectorField sample_z(const PosteriorParams& post, uint64_t seed,
                            VectorField* eps_out = nullptr) {
    Rng rng(seed);
    VectorField z(post.mu.height, post.mu.width, FieldKind::velocity);
    if (eps_out) *eps_out = VectorField(z.height, z.width, FieldKind::velocity);
    for (size_t i = 0; i < z.size(); ++i) {
        double e = rng.normal();
        z.dx[i] = post.mu.dx[i] + e * std::exp(0.5 * post.log_var.dx[i]);
        if (eps_out) eps_out->dx[i] = e;
    }
    for (size_t i = 0; i < z.size(); ++i) {
        double e = rng.normal();
        z.dy[i] = post.mu.dy[i] + e * std::exp(0.5 * post.log_var.dy[i]);
        if (eps_out) eps_out->dy[i] = e;
    }
    return z;
}

}  // namespace tagtrack
