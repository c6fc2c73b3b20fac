#pragma once

#include <cmath>

#include "tagtrack/net.hpp"

// Adaptive-moment gradient descent. Moment buffers mirror the parameter
// layout; bias correction follows the step counter, so state must not be
// shared between parameter sets.

namespace tagtrack {

struct AdamConfig {
    double lr = 5e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;

    void validate() const {
        require(lr > 0.0, "adam: lr must be positive");
        require(beta1 >= 0.0 && beta1 < 1.0, "adam: beta1 must be in [0,1)");
        require(beta2 >= 0.0 && beta2 < 1.0, "adam: beta2 must be in [0,1)");
        require(eps > 0.0, "adam: eps must be positive");
    }
};

struct AdamState {
    NetParams m, v;
    long step = 0;
};

inline AdamState make_adam_state(const NetParams& p) {
    return AdamState{zero_like(p), zero_like(p), 0};
}

inline void adam_step(NetParams* p, const NetParams& g, AdamState* s, const AdamConfig& cfg) {
    cfg.validate();
    s->step += 1;
    double c1 = 1.0 - std::pow(cfg.beta1, double(s->step));
    double c2 = 1.0 - std::pow(cfg.beta2, double(s->step));
    auto pl = p->layers();
    auto gl = g.layers();
    auto ml = s->m.layers();
    auto vl = s->v.layers();
    for (size_t li = 0; li < pl.size(); ++li) {
        auto update = [&](std::vector<double>& w, const std::vector<double>& gw,
                          std::vector<double>& m, std::vector<double>& v) {
            require(w.size() == gw.size(), "adam: gradient layout mismatch");
            for (size_t i = 0; i < w.size(); ++i) {
                m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * gw[i];
                v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * gw[i] * gw[i];
                w[i] -= cfg.lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + cfg.eps);
            }
        };
        update(pl[li]->w, gl[li]->w, ml[li]->w, vl[li]->w);
        update(pl[li]->b, gl[li]->b, ml[li]->b, vl[li]->b);
    }
}

}  // namespace tagtrack
