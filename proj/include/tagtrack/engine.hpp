#pragma once

#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "tagtrack/adam.hpp"
#include "tagtrack/checkpoint.hpp"
#include "tagtrack/diffeo.hpp"
#include "tagtrack/io.hpp"
#include "tagtrack/lagrange.hpp"
#include "tagtrack/losses.hpp"
#include "tagtrack/net.hpp"

// Training loop. One batch = one sequence: posteriors for every registered
// pair, sampled velocities integrated to forward/backward fields, Lagrangian
// recomposition where the mode wants it, one total-loss evaluation, one
// optimizer update. All stochasticity derives from the config seed.
//
// Field direction: for the consecutive pair (t, t+1) the moving image is
// frame t+1 and the fixed image is frame t, so phi_fwd = SS(z) lives on
// frame-t coordinates and points along the physical motion. That makes
// compose_sequence and track_points carry frame-0 material points forward
// exactly; the global consistency term compares I_0 warped by the composed
// field against the later frames, which treats the field and its inverse
// interchangeably — second-order error for smooth motion, and the term is a
// soft constraint, so the approximation only shapes training pressure.

namespace tagtrack {

// Ablation ladder. a1 registers (frame0 -> frame n) directly and tracks with
// those fields; every later mode works on consecutive pairs and adds one
// ingredient: a3 the backward reconstruction, a4 interframe smoothness, a5 a
// windowed consistency term, a6 the full-sequence term, full the Lagrangian
// smoothness on top.
enum class Mode { a1, a2, a3, a4, a5, a6, full };

inline const char* mode_name(Mode m) {
    switch (m) {
        case Mode::a1: return "A1";
        case Mode::a2: return "A2";
        case Mode::a3: return "A3";
        case Mode::a4: return "A4";
        case Mode::a5: return "A5";
        case Mode::a6: return "A6";
        case Mode::full: return "FULL";
    }
    return "?";
}

inline Mode mode_from_string(const std::string& s) {
    for (Mode m : {Mode::a1, Mode::a2, Mode::a3, Mode::a4, Mode::a5, Mode::a6, Mode::full})
        if (s == mode_name(m)) return m;
    throw std::invalid_argument("unknown mode '" + s + "' (expected A1..A6 or FULL)");
}

struct TrainConfig {
    AdamConfig adam;
    int epochs = 60;
    uint64_t seed = 1;
    Mode mode = Mode::full;
    LossConfig loss;
    NetConfig net;
    SSConfig ss;
    int pad_to = 0;     // repeat the last frame up to this length; 0 = off
    int val_count = 0;  // trailing sequences reserved for model selection

    void validate() const {
        adam.validate();
        loss.validate();
        net.validate();
        ss.validate();
        require(epochs >= 0, "train config: epochs must be non-negative");
        require(pad_to == 0 || pad_to >= 2, "train config: pad_to must be 0 or >= 2");
        require(val_count >= 0, "train config: val_count must be non-negative");
    }
};

// Which loss ingredients a mode keeps. Weights are taken from the base
// config where the mode enables them and forced to zero elsewhere, so every
// mode is the declared term masking of the same objective.
struct ModePlan {
    bool direct = false;
    double backward_weight = 1.0;
    double alpha1 = 0.0, alpha2 = 0.0, beta = 0.0;
    int global_window = 0;  // 0 = none, -1 = full sequence, w>0 = windows of w frames
};

inline ModePlan mode_plan(Mode m, const LossConfig& base) {
    ModePlan p;
    switch (m) {
        case Mode::a1:
            p.direct = true;
            p.backward_weight = 0.0;
            break;
        case Mode::a2:
            p.backward_weight = 0.0;
            break;
        case Mode::a3:
            break;
        case Mode::a4:
            p.alpha1 = base.alpha1;
            break;
        case Mode::a5:
            p.alpha1 = base.alpha1;
            p.beta = base.beta;
            p.global_window = 4;
            break;
        case Mode::a6:
            p.alpha1 = base.alpha1;
            p.beta = base.beta;
            p.global_window = -1;
            break;
        case Mode::full:
            p.alpha1 = base.alpha1;
            p.alpha2 = base.alpha2;
            p.beta = base.beta;
            p.global_window = -1;
            break;
    }
    return p;
}

namespace detail {

inline VectorField negated(const VectorField& v) {
    VectorField out(v.height, v.width, v.kind);
    for (size_t i = 0; i < v.size(); ++i) {
        out.dx[i] = -v.dx[i];
        out.dy[i] = -v.dy[i];
    }
    return out;
}

}  // namespace detail

// One full loss evaluation (and, when `grads` is given, the gradient of it)
// for a single sequence under the mode's masking. `step_seed` fixes the
// posterior draws; `use_mean_z` replaces sampling by z = mu with K = 1,
// which validation and inference use for determinism.
inline LossBreakdown sequence_loss(const std::vector<ScalarImage>& frames_in,
                                   const NetParams& params, const TrainConfig& cfg,
                                   uint64_t step_seed, bool use_mean_z, NetParams* grads) {
    const int real_n = static_cast<int>(frames_in.size());
    require(real_n >= 2, "sequence_loss: need at least 2 frames");
    const ModePlan plan = mode_plan(cfg.mode, cfg.loss);
    LossConfig eff = cfg.loss;
    eff.alpha1 = plan.alpha1;
    eff.alpha2 = plan.alpha2;
    eff.beta = plan.beta;
    if (use_mean_z) eff.K = 1;
    const int K = eff.K;

    std::vector<ScalarImage> frames = frames_in;
    while (static_cast<int>(frames.size()) < cfg.pad_to) frames.push_back(frames.back());
    const int N = static_cast<int>(frames.size());
    const int P = N - 1;
    const int H = frames[0].height, W = frames[0].width;

    struct PairBuf {
        PosteriorParams post;
        std::vector<VectorField> z, fwd, bwd;
        NetCache cache;
        std::vector<SSCache> cache_fwd, cache_bwd;
        bool active = false;
    };
    std::vector<PairBuf> bufs(P);
    std::vector<PairTerm> pairs(P);

    for (int n = 0; n < P; ++n) {
        PairTerm& pt = pairs[n];
        pt.a = n + 1;                  // moving (later) frame
        pt.b = plan.direct ? 0 : n;    // fixed frame
        if (n >= real_n - 1) {         // pair touches only padded copies
            pt.weight = 0.0;
            continue;
        }
        PairBuf& pb = bufs[n];
        pb.active = true;
        pb.post = net_forward(frames[pt.b], frames[pt.a], params, grads ? &pb.cache : nullptr);
        pb.z.reserve(K);
        pb.fwd.reserve(K);
        pb.bwd.reserve(K);
        if (grads) {
            pb.cache_fwd.resize(K);
            pb.cache_bwd.resize(K);
        }
        for (int k = 0; k < K; ++k) {
            VectorField z = use_mean_z ? pb.post.mu
                                       : sample_z(pb.post, Rng::derive(step_seed, n, k));
            pb.fwd.push_back(
                integrate_svf_cached(z, cfg.ss, grads ? &pb.cache_fwd[k] : nullptr));
            pb.bwd.push_back(integrate_svf_cached(detail::negated(z), cfg.ss,
                                                  grads ? &pb.cache_bwd[k] : nullptr));
            pb.z.push_back(std::move(z));
        }
        pt.post = &pb.post;
        pt.phi_fwd = &pb.fwd;
        pt.phi_bwd = &pb.bwd;
        pt.weight = 1.0;
    }

    // consistency segments over real frames; sample 0 carries the composition
    struct Segment {
        int start = 0;  // index of the first INF pair in the segment
        std::vector<VectorField> inf, lag;
    };
    std::vector<Segment> segments;
    std::vector<GlobalTerm> globals;
    const bool need_lag =
        !plan.direct && plan.global_window != 0 && (plan.beta != 0.0 || plan.alpha2 != 0.0);
    if (need_lag) {
        const int win = plan.global_window == -1 ? real_n : plan.global_window;
        for (int s = 0; s + 1 < real_n; s += win) {
            int last = std::min(s + win - 1, real_n - 1);
            if (last == s) break;
            Segment seg;
            seg.start = s;
            for (int t = s; t < last; ++t) seg.inf.push_back(bufs[t].fwd[0]);
            seg.lag = compose_sequence(seg.inf);
            segments.push_back(std::move(seg));
            if (last == real_n - 1) break;
        }
        globals.reserve(segments.size());
        for (const Segment& seg : segments) {
            GlobalTerm gt;
            gt.ref = seg.start;
            for (int t = seg.start + 1; t <= seg.start + static_cast<int>(seg.lag.size()); ++t)
                gt.targets.push_back(t);
            gt.lag = &seg.lag;
            globals.push_back(gt);
        }
    }

    if (!grads) return total_loss(frames, pairs, globals, plan.backward_weight, eff, nullptr);

    TotalLossAdjoints adj;
    adj.posts.resize(P);
    adj.phi_fwd.resize(P);
    adj.phi_bwd.resize(P);
    for (int n = 0; n < P; ++n) {
        if (!bufs[n].active) continue;
        adj.posts[n] = PosteriorParams(H, W);
        adj.phi_fwd[n].assign(K, VectorField(H, W, FieldKind::displacement));
        adj.phi_bwd[n].assign(K, VectorField(H, W, FieldKind::displacement));
    }
    adj.lag.resize(segments.size());
    for (size_t g = 0; g < segments.size(); ++g)
        adj.lag[g].assign(segments[g].lag.size(), VectorField(H, W, FieldKind::displacement));

    LossBreakdown bd = total_loss(frames, pairs, globals, plan.backward_weight, eff, &adj);

    // segment adjoints -> INF adjoints of the sample-0 forward fields
    for (size_t g = 0; g < segments.size(); ++g) {
        const Segment& seg = segments[g];
        std::vector<VectorField> adj_inf(seg.inf.size(),
                                         VectorField(H, W, FieldKind::displacement));
        compose_sequence_backward(seg.inf, seg.lag, adj.lag[g], &adj_inf);
        for (size_t j = 0; j < adj_inf.size(); ++j) {
            VectorField& dst = adj.phi_fwd[seg.start + j][0];
            for (size_t i = 0; i < dst.size(); ++i) {
                dst.dx[i] += adj_inf[j].dx[i];
                dst.dy[i] += adj_inf[j].dy[i];
            }
        }
    }

    // field adjoints -> velocity -> posterior -> parameters
    for (int n = 0; n < P; ++n) {
        PairBuf& pb = bufs[n];
        if (!pb.active) continue;
        VectorField& adj_mu = adj.posts[n].mu;
        VectorField& adj_lv = adj.posts[n].log_var;
        for (int k = 0; k < K; ++k) {
            VectorField adj_z(H, W, FieldKind::velocity);
            integrate_svf_backward(pb.cache_fwd[k], cfg.ss, adj.phi_fwd[n][k], &adj_z);
            VectorField adj_neg(H, W, FieldKind::velocity);
            integrate_svf_backward(pb.cache_bwd[k], cfg.ss, adj.phi_bwd[n][k], &adj_neg);
            for (size_t i = 0; i < adj_z.size(); ++i) {
                adj_z.dx[i] -= adj_neg.dx[i];
                adj_z.dy[i] -= adj_neg.dy[i];
            }
            // z = mu + eps*std: d z/d mu = 1, d z/d log_var = (z - mu)/2
            for (size_t i = 0; i < adj_z.size(); ++i) {
                adj_mu.dx[i] += adj_z.dx[i];
                adj_mu.dy[i] += adj_z.dy[i];
                adj_lv.dx[i] += 0.5 * (pb.z[k].dx[i] - pb.post.mu.dx[i]) * adj_z.dx[i];
                adj_lv.dy[i] += 0.5 * (pb.z[k].dy[i] - pb.post.mu.dy[i]) * adj_z.dy[i];
            }
        }
        net_backward(params, pb.cache, adj_mu, adj_lv, grads);
    }
    return bd;
}

struct Sequence {
    std::vector<ScalarImage> frames;
};

struct TrainResult {
    NetParams params;                    // snapshot with the best validation loss
    std::vector<LossBreakdown> history;  // one entry per optimizer step
    std::vector<double> val_history;     // one entry per epoch
    int best_epoch = -1;
    double best_val = std::numeric_limits<double>::infinity();
};

// Validation uses z = mu (deterministic); without a validation split the
// epoch-mean training loss stands in for it.
inline TrainResult train(const std::vector<Sequence>& dataset, const TrainConfig& cfg) {
    cfg.validate();
    require(!dataset.empty(), "train: empty dataset");
    for (const Sequence& s : dataset) {
        require(s.frames.size() >= 2, "train: every sequence needs at least 2 frames");
        require(s.frames[0].same_shape(dataset[0].frames[0]), "train: inconsistent grids");
    }
    require(cfg.val_count < static_cast<int>(dataset.size()),
            "train: validation split leaves no training data");
    const int ntrain = static_cast<int>(dataset.size()) - cfg.val_count;

    TrainResult out;
    NetParams params = make_net(cfg.net, cfg.seed);
    AdamState opt = make_adam_state(params);
    out.params = params;
    long step = 0;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        double epoch_sum = 0.0;
        for (int s = 0; s < ntrain; ++s) {
            uint64_t seed = Rng::derive(cfg.seed, 0x57e9, static_cast<uint64_t>(step));
            NetParams grads = zero_like(params);
            LossBreakdown bd =
                sequence_loss(dataset[s].frames, params, cfg, seed, false, &grads);
            adam_step(&params, grads, &opt, cfg.adam);
            out.history.push_back(bd);
            epoch_sum += bd.total;
            ++step;
        }
        double val = 0.0;
        if (cfg.val_count > 0) {
            for (int s = ntrain; s < static_cast<int>(dataset.size()); ++s)
                val += sequence_loss(dataset[s].frames, params, cfg, 0, true, nullptr).total;
            val /= cfg.val_count;
        } else {
            val = epoch_sum / ntrain;
        }
        out.val_history.push_back(val);
        if (val < out.best_val) {
            out.best_val = val;
            out.best_epoch = epoch;
            out.params = params;
        }
    }
    return out;
}

// Deterministic inference: z = mu. Direct-mode checkpoints register
// (frame0 -> frame n) pairs, so their fields are already Lagrangian and the
// INF list repeats them; consecutive modes compose as in training.
inline MotionSequence infer_sequence(const std::vector<ScalarImage>& frames,
                                     const NetParams& params, const SSConfig& ss,
                                     Mode mode = Mode::full) {
    require(frames.size() >= 2, "infer_sequence: need at least 2 frames");
    MotionSequence out;
    const int N = static_cast<int>(frames.size());
    if (mode == Mode::a1) {
        for (int n = 1; n < N; ++n) {
            PosteriorParams post = net_forward(frames[0], frames[n], params);
            out.lag_fields.push_back(integrate_svf(post.mu, ss));
        }
        out.inf_fields = out.lag_fields;
    } else {
        for (int t = 0; t + 1 < N; ++t) {
            PosteriorParams post = net_forward(frames[t], frames[t + 1], params);
            out.inf_fields.push_back(integrate_svf(post.mu, ss));
        }
        out.lag_fields = compose_sequence(out.inf_fields);
    }
    return out;
}

inline nlohmann::json train_config_to_json(const TrainConfig& cfg) {
    return {{"epochs", cfg.epochs},
            {"seed", cfg.seed},
            {"mode", mode_name(cfg.mode)},
            {"pad_to", cfg.pad_to},
            {"val_count", cfg.val_count},
            {"adam", {{"lr", cfg.adam.lr},
                      {"beta1", cfg.adam.beta1},
                      {"beta2", cfg.adam.beta2},
                      {"eps", cfg.adam.eps}}},
            {"loss", {{"lambda", cfg.loss.lambda},
                      {"gamma", cfg.loss.gamma},
                      {"window", cfg.loss.window},
                      {"K", cfg.loss.K},
                      {"alpha1", cfg.loss.alpha1},
                      {"alpha2", cfg.loss.alpha2},
                      {"beta", cfg.loss.beta},
                      {"sigma2", cfg.loss.sigma2},
                      {"similarity", cfg.loss.similarity == Similarity::ncc ? "ncc" : "ssd"}}},
            {"net", net_config_to_json(cfg.net)},
            {"ss", {{"steps", cfg.ss.steps}}}};
}

// Missing keys keep their defaults, so a config file only states what it
// overrides.
inline TrainConfig train_config_from_json(const nlohmann::json& j) {
    TrainConfig cfg;
    cfg.epochs = j.value("epochs", cfg.epochs);
    cfg.seed = j.value("seed", cfg.seed);
    if (j.contains("mode")) cfg.mode = mode_from_string(j.at("mode").get<std::string>());
    cfg.pad_to = j.value("pad_to", cfg.pad_to);
    cfg.val_count = j.value("val_count", cfg.val_count);
    if (j.contains("adam")) {
        const auto& a = j.at("adam");
        cfg.adam.lr = a.value("lr", cfg.adam.lr);
        cfg.adam.beta1 = a.value("beta1", cfg.adam.beta1);
        cfg.adam.beta2 = a.value("beta2", cfg.adam.beta2);
        cfg.adam.eps = a.value("eps", cfg.adam.eps);
    }
    if (j.contains("loss")) {
        const auto& l = j.at("loss");
        cfg.loss.lambda = l.value("lambda", cfg.loss.lambda);
        cfg.loss.gamma = l.value("gamma", cfg.loss.gamma);
        cfg.loss.window = l.value("window", cfg.loss.window);
        cfg.loss.K = l.value("K", cfg.loss.K);
        cfg.loss.alpha1 = l.value("alpha1", cfg.loss.alpha1);
        cfg.loss.alpha2 = l.value("alpha2", cfg.loss.alpha2);
        cfg.loss.beta = l.value("beta", cfg.loss.beta);
        cfg.loss.sigma2 = l.value("sigma2", cfg.loss.sigma2);
        if (l.contains("similarity")) {
            std::string s = l.at("similarity").get<std::string>();
            if (s == "ncc")
                cfg.loss.similarity = Similarity::ncc;
            else if (s == "ssd")
                cfg.loss.similarity = Similarity::ssd;
            else
                throw std::invalid_argument("unknown similarity: " + s);
        }
    }
    if (j.contains("net")) cfg.net = net_config_from_json(j.at("net"));
    if (j.contains("ss")) cfg.ss.steps = j.at("ss").value("steps", cfg.ss.steps);
    cfg.validate();
    return cfg;
}

inline void write_loss_csv(const std::filesystem::path& path,
                           const std::vector<LossBreakdown>& history) {
    std::ostringstream ss;
    ss.precision(17);
    ss << "step,loss_total,loss_kl,loss_recon_fwd,loss_recon_bwd,"
          "loss_smooth_inf,loss_smooth_lag,loss_global\n";
    for (size_t i = 0; i < history.size(); ++i) {
        const LossBreakdown& b = history[i];
        ss << i << ',' << b.total << ',' << b.kl << ',' << b.recon_fwd << ',' << b.recon_bwd
           << ',' << b.smooth_inf << ',' << b.smooth_lag << ',' << b.global_term << '\n';
    }
    atomic_write(path, ss.str());
}

}  // namespace tagtrack
