#pragma once

#include <cmath>
#include <cstdio>
#include <vector>

#include "tagtrack/grid_ops.hpp"
#include "tagtrack/types.hpp"

// Scaling-and-squaring integration of a stationary velocity field:
// u_0 = v / 2^T, then T self-compositions. Backpropagation unrolls the
// composition steps exactly.

namespace tagtrack {

struct SSConfig {
    int steps = 7;

    void validate() const {
        require(steps >= 1 && steps <= 12, "SS steps must be in [1,12]");
    }
};

// forward with cached intermediate fields u_0..u_{T-1} for the backward pass
struct SSCache {
    std::vector<VectorField> levels;  // levels[k] = u_k, k = 0..T-1
};

inline VectorField integrate_svf_cached(const VectorField& v, const SSConfig& cfg,
                                        SSCache* cache) {
    cfg.validate();
    require(v.kind == FieldKind::velocity, "integrate_svf expects a velocity field");
    require(all_finite(v), "non-finite velocity field");

    double max_mag = 0.0;
    for (size_t i = 0; i < v.size(); ++i) {
        max_mag = std::max(max_mag, std::abs(v.dx[i]));
        max_mag = std::max(max_mag, std::abs(v.dy[i]));
    }
    double scale = std::ldexp(1.0, -cfg.steps);  // 1 / 2^T
    if (max_mag * scale > 0.5)
        std::fprintf(stderr,
                     "warning: velocity max %.3g px leaves %.3g px per squaring step; "
                     "consider more SS steps\n",
                     max_mag, max_mag * scale);

    VectorField u(v.height, v.width, FieldKind::displacement);
    for (size_t i = 0; i < v.size(); ++i) {
        u.dx[i] = v.dx[i] * scale;
        u.dy[i] = v.dy[i] * scale;
    }
    if (cache) cache->levels.clear();
    for (int k = 0; k < cfg.steps; ++k) {
        if (cache) cache->levels.push_back(u);
        u = compose_fields(u, u);
    }
    return u;
}

inline VectorField integrate_svf(const VectorField& v, const SSConfig& cfg) {
    return integrate_svf_cached(v, cfg, nullptr);
}

inline VectorField invert_svf(const VectorField& v, const SSConfig& cfg) {
    VectorField neg(v.height, v.width, FieldKind::velocity);
    for (size_t i = 0; i < v.size(); ++i) {
        neg.dx[i] = -v.dx[i];
        neg.dy[i] = -v.dy[i];
    }
    return integrate_svf(neg, cfg);
}

// adjoint of integrate_svf: adj over the output displacement -> adj over v
inline void integrate_svf_backward(const SSCache& cache, const SSConfig& cfg,
                                   const VectorField& adj_out, VectorField* adj_v) {
    require(static_cast<int>(cache.levels.size()) == cfg.steps, "stale SS cache");
    VectorField adj = adj_out;
    for (int k = cfg.steps - 1; k >= 0; --k) {
        const VectorField& u = cache.levels[k];
        VectorField adj_u(u.height, u.width, FieldKind::displacement);
        // u_{k+1} = compose(u_k, u_k): both slots receive the adjoint
        compose_fields_backward(u, u, adj, &adj_u, &adj_u);
        adj = std::move(adj_u);
    }
    double scale = std::ldexp(1.0, -cfg.steps);
    for (size_t i = 0; i < adj.size(); ++i) {
        adj_v->dx[i] += adj.dx[i] * scale;
        adj_v->dy[i] += adj.dy[i] * scale;
    }
}

}  // namespace tagtrack
