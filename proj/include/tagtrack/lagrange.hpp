#pragma once

#include <vector>

#include "tagtrack/grid_ops.hpp"
#include "tagtrack/types.hpp"

// Recomposition of interframe (INF) motion into Lagrangian motion, and point
// tracking through Lagrangian fields. The recursion
//   Lag[0]   = inf[0]
//   Lag[n]   = compose(inf[n], Lag[n-1])
// is differentiable w.r.t. every INF field; the backward pass walks the
// chain in reverse, converting each Lagrangian adjoint into an INF adjoint
// plus a carried adjoint for the earlier prefix.

namespace tagtrack {

struct MotionSequence {
    std::vector<VectorField> inf_fields;  // phi_{n(n+1)}, n = 0..N-2
    std::vector<VectorField> lag_fields;  // Phi_{0(n+1)}, same count
};

inline std::vector<VectorField> compose_sequence(const std::vector<VectorField>& inf) {
    require(!inf.empty(), "compose_sequence: empty field list");
    for (const auto& f : inf)
        require(f.same_shape(inf[0]), "compose_sequence: grid mismatch");
    std::vector<VectorField> lag;
    lag.reserve(inf.size());
    lag.push_back(inf[0]);
    for (size_t n = 1; n < inf.size(); ++n) lag.push_back(compose_fields(inf[n], lag[n - 1]));
    return lag;
}

// adj_lag[n] holds dL/dLag[n]; accumulates dL/dinf[n] into adj_inf. Consumes
// the per-step adjoints front to back by carrying a running prefix adjoint.
inline void compose_sequence_backward(const std::vector<VectorField>& inf,
                                      const std::vector<VectorField>& lag,
                                      const std::vector<VectorField>& adj_lag,
                                      std::vector<VectorField>* adj_inf) {
    require(inf.size() == lag.size() && adj_lag.size() == lag.size(),
            "compose_sequence_backward: length mismatch");
    VectorField carry = adj_lag.back();
    for (size_t n = inf.size() - 1; n >= 1; --n) {
        VectorField adj_prefix(carry.height, carry.width, FieldKind::displacement);
        compose_fields_backward(inf[n], lag[n - 1], carry, &(*adj_inf)[n], &adj_prefix);
        carry = std::move(adj_prefix);
        for (size_t i = 0; i < carry.size(); ++i) {
            carry.dx[i] += adj_lag[n - 1].dx[i];
            carry.dy[i] += adj_lag[n - 1].dy[i];
        }
    }
    for (size_t i = 0; i < carry.size(); ++i) {
        (*adj_inf)[0].dx[i] += carry.dx[i];
        (*adj_inf)[0].dy[i] += carry.dy[i];
    }
}

// Tracked positions p + Phi(p); sampling clamps to the grid but the returned
// positions are not clamped, so out-of-frame drift stays measurable.
inline PointSet track_points(const VectorField& Phi, const PointSet& pts) {
    PointSet out;
    out.points.reserve(pts.size());
    for (const Point2& p : pts.points) {
        require(std::isfinite(p.x) && std::isfinite(p.y), "track_points: non-finite point");
        double vx, vy;
        sample_field(Phi, p.x, p.y, vx, vy);
        out.points.push_back({p.x + vx, p.y + vy});
    }
    return out;
}

}  // namespace tagtrack
