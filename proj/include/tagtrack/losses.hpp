#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "tagtrack/grid_ops.hpp"
#include "tagtrack/ncc.hpp"
#include "tagtrack/types.hpp"

// Scalar training objectives with analytic gradients. Sign convention:
// everything here is a loss (lower is better); similarity terms enter with a
// negative weight (gamma < 0, and the global term carries an explicit minus).

namespace tagtrack {

enum class Similarity { ncc, ssd };

struct LossConfig {
    double lambda = 10.0;  // velocity-scale prior weight
    double gamma = -0.5;   // Boltzmann temperature on NCC (negative)
    int window = 9;        // NCC window side, odd
    int K = 1;             // posterior samples per pair
    double alpha1 = 5.0;   // interframe smoothness weight
    double alpha2 = 1.0;   // Lagrangian smoothness weight
    double beta = 0.5;     // global consistency weight
    double sigma2 = 1.0;   // Gaussian likelihood variance (ssd mode only)
    Similarity similarity = Similarity::ncc;

    void validate() const {
        require(window >= 3 && window % 2 == 1, "NCC window must be odd and >= 3");
        require(K >= 1, "K must be >= 1");
        require(gamma < 0.0, "gamma must be negative");
        require(sigma2 > 0.0, "sigma2 must be positive");
        require(std::isfinite(lambda) && std::isfinite(alpha1) && std::isfinite(alpha2) &&
                    std::isfinite(beta),
                "loss weights must be finite");
    }
};

// ---- sum of squared differences ----

inline double ssd(const ScalarImage& I, const ScalarImage& J) {
    require(I.same_shape(J), "ssd: shape mismatch");
    double s = 0.0;
    for (size_t i = 0; i < I.size(); ++i) {
        double d = I.data[i] - J.data[i];
        s += d * d;
    }
    return s;
}

inline void ssd_backward(const ScalarImage& I, const ScalarImage& J, double adj,
                         ScalarImage* adj_I, ScalarImage* adj_J) {
    for (size_t i = 0; i < I.size(); ++i) {
        double d = 2.0 * (I.data[i] - J.data[i]) * adj;
        if (adj_I) adj_I->data[i] += d;
        if (adj_J) adj_J->data[i] -= d;
    }
}

// ---- KL term with graph-Laplacian prior ----
//
// kl = 1/2 [ lambda * sum_p deg(p) var(p)  -  sum_p log_var(p)
//            + (lambda/2) * sum_i sum_{j in N(i)} (mu_i - mu_j)^2 ]
// over both vector components, 4-neighbourhood grid graph, additive
// constants dropped.

namespace detail {

inline int grid_degree(int H, int W, int y, int x) {
    return (y > 0) + (y < H - 1) + (x > 0) + (x < W - 1);
}

// sum over components of lambda * mu^T L mu = (lambda/2) sum_i sum_j (mu_i-mu_j)^2,
// plus its gradient lambda * (L mu) when adj_mu is given
inline double laplacian_quad(const VectorField& mu, double lambda, double adj,
                             VectorField* adj_mu) {
    const int H = mu.height, W = mu.width;
    double quad = 0.0;
    auto edge = [&](const std::vector<double>& c, std::vector<double>* adj_c, size_t i,
                    size_t j) {
        double d = c[i] - c[j];
        quad += d * d;  // each unordered edge once; doubled below
        if (adj_c) {
            (*adj_c)[i] += 2.0 * lambda * d * adj;
            (*adj_c)[j] -= 2.0 * lambda * d * adj;
        }
    };
    for (int y = 0; y < H; ++y)
        for (int x = 0; x < W; ++x) {
            size_t i = static_cast<size_t>(y) * W + x;
            if (x + 1 < W) {
                edge(mu.dx, adj_mu ? &adj_mu->dx : nullptr, i, i + 1);
                edge(mu.dy, adj_mu ? &adj_mu->dy : nullptr, i, i + 1);
            }
            if (y + 1 < H) {
                edge(mu.dx, adj_mu ? &adj_mu->dx : nullptr, i, i + W);
                edge(mu.dy, adj_mu ? &adj_mu->dy : nullptr, i, i + W);
            }
        }
    // (lambda/2) * sum over ordered pairs = lambda * sum over unordered edges
    return lambda * quad;
}

}  // namespace detail

inline double kl_term(const PosteriorParams& post, double lambda) {
    require(all_finite(post.mu) && all_finite(post.log_var), "kl_term: non-finite posterior");
    const int H = post.mu.height, W = post.mu.width;
    double trace = 0.0, logdet = 0.0;
    for (int y = 0; y < H; ++y)
        for (int x = 0; x < W; ++x) {
            size_t i = static_cast<size_t>(y) * W + x;
            double deg = detail::grid_degree(H, W, y, x);
            trace += deg * (std::exp(post.log_var.dx[i]) + std::exp(post.log_var.dy[i]));
            logdet += post.log_var.dx[i] + post.log_var.dy[i];
        }
    double quad = detail::laplacian_quad(post.mu, lambda, 0.0, nullptr);
    return 0.5 * (lambda * trace - logdet + quad);
}

inline void kl_term_backward(const PosteriorParams& post, double lambda, double adj,
                             PosteriorParams* adj_post) {
    const int H = post.mu.height, W = post.mu.width;
    for (int y = 0; y < H; ++y)
        for (int x = 0; x < W; ++x) {
            size_t i = static_cast<size_t>(y) * W + x;
            double deg = detail::grid_degree(H, W, y, x);
            adj_post->log_var.dx[i] +=
                adj * 0.5 * (lambda * deg * std::exp(post.log_var.dx[i]) - 1.0);
            adj_post->log_var.dy[i] +=
                adj * 0.5 * (lambda * deg * std::exp(post.log_var.dy[i]) - 1.0);
        }
    detail::laplacian_quad(post.mu, lambda, 0.5 * adj, &adj_post->mu);
}

// ---- smoothness: sum of squared forward differences ----

inline double smooth_loss(const VectorField& f) {
    FieldGradient g = spatial_gradient(f);
    double s = 0.0;
    for (size_t i = 0; i < g.dxx.size(); ++i)
        s += g.dxx.data[i] * g.dxx.data[i] + g.dxy.data[i] * g.dxy.data[i] +
             g.dyx.data[i] * g.dyx.data[i] + g.dyy.data[i] * g.dyy.data[i];
    return s;
}

inline void smooth_loss_backward(const VectorField& f, double adj, VectorField* adj_f) {
    FieldGradient g = spatial_gradient(f);
    for (auto* c : {&g.dxx, &g.dxy, &g.dyx, &g.dyy})
        for (auto& v : c->data) v *= 2.0 * adj;
    spatial_gradient_backward(g, adj_f);
}

// ---- reconstruction term ----
//
// ncc mode: (gamma/K) sum_k ncc(fixed, warp(moving, phi_k)); gamma < 0 turns
// similarity into a loss. ssd mode: (1/(2 sigma2 K)) sum_k ssd(...).
// Frames are data, so no image adjoints are produced.

inline double recon_term(const ScalarImage& fixed, const ScalarImage& moving,
                         const std::vector<VectorField>& phis, const LossConfig& cfg) {
    require(!phis.empty() && static_cast<int>(phis.size()) == cfg.K,
            "recon_term: need K sampled fields");
    double s = 0.0;
    for (const auto& phi : phis) {
        ScalarImage warped = warp_image(moving, phi);
        if (cfg.similarity == Similarity::ncc)
            s += cfg.gamma / cfg.K * ncc(fixed, warped, cfg.window);
        else
            s += ssd(fixed, warped) / (2.0 * cfg.sigma2 * cfg.K);
    }
    return s;
}

inline void recon_term_backward(const ScalarImage& fixed, const ScalarImage& moving,
                                const std::vector<VectorField>& phis, const LossConfig& cfg,
                                double adj, std::vector<VectorField>* adj_phis) {
    for (size_t k = 0; k < phis.size(); ++k) {
        ScalarImage warped = warp_image(moving, phis[k]);
        ScalarImage adj_warped(warped.height, warped.width);
        if (cfg.similarity == Similarity::ncc) {
            NccCache cache;
            ncc_cached(fixed, warped, cfg.window, &cache);
            ncc_backward(fixed, warped, cache, adj * cfg.gamma / cfg.K, nullptr, &adj_warped);
        } else {
            ssd_backward(fixed, warped, adj / (2.0 * cfg.sigma2 * cfg.K), nullptr, &adj_warped);
        }
        warp_image_backward(moving, phis[k], adj_warped, nullptr, &(*adj_phis)[k]);
    }
}

// ---- combined bi-directional pair loss ----
//
// The combined form drops the 1/2 of kl_term (both directions share one z),
// then adds reconstruction in both directions. Forward-only training uses
// the same doubled penalty with the backward reconstruction masked, so
// "forward-only" differs from "bi-directional" by exactly that one term.

inline double bidirectional_kl_loss(const ScalarImage& x, const ScalarImage& y,
                                    const PosteriorParams& post,
                                    const std::vector<VectorField>& phis_fwd,
                                    const std::vector<VectorField>& phis_bwd,
                                    const LossConfig& cfg) {
    require(x.same_shape(y), "bidirectional_kl_loss: shape mismatch");
    require(post.mu.same_shape(x), "bidirectional_kl_loss: posterior shape mismatch");
    return 2.0 * kl_term(post, cfg.lambda) + recon_term(y, x, phis_fwd, cfg) +
           recon_term(x, y, phis_bwd, cfg);
}

// ---- global Lagrangian consistency ----
//
// frames[0] is the reference; lag[k] carries frame 0 to frame k+1, meaning a
// reference point p lands at p + lag[k](p) in frame k+1. Under backward-warp
// sampling that same field pulls frame k+1 back onto the reference grid, so
// the consistency score keeps the orientation of the per-pair reconstruction:
// loss = -sum_k ncc(frames[0], warp(frames[k+1], lag[k])).

inline double global_lagrangian_loss(const std::vector<ScalarImage>& frames,
                                     const std::vector<VectorField>& lag, int window) {
    require(frames.size() >= 2, "global_lagrangian_loss: need at least 2 frames");
    require(lag.size() == frames.size() - 1, "global_lagrangian_loss: field count mismatch");
    double s = 0.0;
    for (size_t k = 0; k < lag.size(); ++k)
        s -= ncc(frames[0], warp_image(frames[k + 1], lag[k]), window);
    return s;
}

inline void global_lagrangian_loss_backward(const std::vector<ScalarImage>& frames,
                                            const std::vector<VectorField>& lag, int window,
                                            double adj, std::vector<VectorField>* adj_lag) {
    for (size_t k = 0; k < lag.size(); ++k) {
        ScalarImage warped = warp_image(frames[k + 1], lag[k]);
        NccCache cache;
        ncc_cached(frames[0], warped, window, &cache);
        ScalarImage adj_warped(warped.height, warped.width);
        ncc_backward(frames[0], warped, cache, -adj, nullptr, &adj_warped);
        warp_image_backward(frames[k + 1], lag[k], adj_warped, nullptr, &(*adj_lag)[k]);
    }
}

// ---- total objective over one sequence ----

// One registered pair (frame a -> frame b) with its posterior and K sampled
// field pairs. Padded pairs get weight 0.
struct PairTerm {
    int a = 0, b = 0;
    const PosteriorParams* post = nullptr;
    const std::vector<VectorField>* phi_fwd = nullptr;
    const std::vector<VectorField>* phi_bwd = nullptr;
    double weight = 1.0;
};

// One consistency segment: composed fields carrying frames[ref] onto each
// target frame. For full-sequence training ref = 0 and targets = 1..N-1; the
// windowed ablation uses one segment per window.
struct GlobalTerm {
    int ref = 0;
    std::vector<int> targets;
    const std::vector<VectorField>* lag = nullptr;
};

struct LossBreakdown {
    double total = 0, kl = 0, recon_fwd = 0, recon_bwd = 0;
    double smooth_inf = 0, smooth_lag = 0, global_term = 0;
};

// Adjoint buffers mirroring the total_loss inputs; sized by the caller.
struct TotalLossAdjoints {
    std::vector<PosteriorParams> posts;
    std::vector<std::vector<VectorField>> phi_fwd, phi_bwd;
    std::vector<std::vector<VectorField>> lag;  // per global term
};

// Weighted sum of all terms. `backward_weight` masks the backward
// reconstruction (1 = bi-directional, 0 = forward-only). Sample 0 of each
// pair carries the smoothness penalties. Components returned are already
// weighted, so total is their plain sum.
inline LossBreakdown total_loss(const std::vector<ScalarImage>& frames,
                                const std::vector<PairTerm>& pairs,
                                const std::vector<GlobalTerm>& globals,
                                double backward_weight, const LossConfig& cfg,
                                TotalLossAdjoints* adj) {
    cfg.validate();
    LossBreakdown out;
    for (size_t n = 0; n < pairs.size(); ++n) {
        const PairTerm& pt = pairs[n];
        if (pt.weight == 0.0) continue;
        const ScalarImage& xa = frames[pt.a];
        const ScalarImage& xb = frames[pt.b];
        out.kl += pt.weight * 2.0 * kl_term(*pt.post, cfg.lambda);
        out.recon_fwd += pt.weight * recon_term(xb, xa, *pt.phi_fwd, cfg);
        if (backward_weight != 0.0)
            out.recon_bwd += pt.weight * backward_weight * recon_term(xa, xb, *pt.phi_bwd, cfg);
        if (cfg.alpha1 != 0.0)
            out.smooth_inf += pt.weight * cfg.alpha1 *
                              (smooth_loss((*pt.phi_fwd)[0]) + smooth_loss((*pt.phi_bwd)[0]));
        if (adj) {
            kl_term_backward(*pt.post, cfg.lambda, 2.0 * pt.weight, &adj->posts[n]);
            recon_term_backward(xb, xa, *pt.phi_fwd, cfg, pt.weight, &adj->phi_fwd[n]);
            if (backward_weight != 0.0)
                recon_term_backward(xa, xb, *pt.phi_bwd, cfg, pt.weight * backward_weight,
                                    &adj->phi_bwd[n]);
            if (cfg.alpha1 != 0.0) {
                smooth_loss_backward((*pt.phi_fwd)[0], pt.weight * cfg.alpha1,
                                     &adj->phi_fwd[n][0]);
                smooth_loss_backward((*pt.phi_bwd)[0], pt.weight * cfg.alpha1,
                                     &adj->phi_bwd[n][0]);
            }
        }
    }
    for (size_t g = 0; g < globals.size(); ++g) {
        const GlobalTerm& gt = globals[g];
        require(gt.lag->size() == gt.targets.size(), "total_loss: segment size mismatch");
        std::vector<ScalarImage> seg;
        seg.push_back(frames[gt.ref]);
        for (int t : gt.targets) seg.push_back(frames[t]);
        if (cfg.beta != 0.0) {
            out.global_term += cfg.beta * global_lagrangian_loss(seg, *gt.lag, cfg.window);
            if (adj)
                global_lagrangian_loss_backward(seg, *gt.lag, cfg.window, cfg.beta,
                                                &adj->lag[g]);
        }
        if (cfg.alpha2 != 0.0)
            for (size_t k = 0; k < gt.lag->size(); ++k) {
                out.smooth_lag += cfg.alpha2 * smooth_loss((*gt.lag)[k]);
                if (adj) smooth_loss_backward((*gt.lag)[k], cfg.alpha2, &adj->lag[g][k]);
            }
    }
    out.total = out.kl + out.recon_fwd + out.recon_bwd + out.smooth_inf + out.smooth_lag +
                out.global_term;
    return out;
}

}  // namespace tagtrack
