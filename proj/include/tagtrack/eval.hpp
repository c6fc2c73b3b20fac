#pragma once

#include <chrono>
#include <cmath>
#include <filesystem>
#include <sstream>
#include <stdexcept>
#include <vector>

#include "tagtrack/engine.hpp"
#include "tagtrack/grid_ops.hpp"
#include "tagtrack/io.hpp"
#include "tagtrack/lagrange.hpp"

// Tracking-accuracy metrics: landmarks are tracked from frame 0 through the
// Lagrangian fields and compared against their true trajectories as RMS
// distance per frame, alongside Jacobian health of every INF field and the
// wall-clock cost of inference.

namespace tagtrack {

inline double rms(const PointSet& pred, const PointSet& gt) {
    if (pred.size() != gt.size() || pred.size() == 0)
        throw std::invalid_argument("rms: point sets must have equal nonzero cardinality");
    double acc = 0.0;
    for (size_t i = 0; i < pred.size(); ++i) {
        double dx = pred.points[i].x - gt.points[i].x;
        double dy = pred.points[i].y - gt.points[i].y;
        acc += dx * dx + dy * dy;
    }
    return std::sqrt(acc / static_cast<double>(pred.size()));
}

// Per-frame RMS of points tracked through lag[k] (frame 0 -> k+1) against the
// true trajectory; traj holds one PointSet per frame including frame 0.
inline std::vector<double> rms_per_frame(const std::vector<VectorField>& lag,
                                         const std::vector<PointSet>& traj) {
    if (traj.size() != lag.size() + 1)
        throw std::invalid_argument("rms_per_frame: trajectory/field count mismatch");
    std::vector<double> out;
    out.reserve(lag.size());
    for (size_t k = 0; k < lag.size(); ++k)
        out.push_back(rms(track_points(lag[k], traj[0]), traj[k + 1]));
    return out;
}

struct EvalSequence {
    std::vector<ScalarImage> frames;
    std::vector<PointSet> landmarks;  // one PointSet per frame
};

struct EvalReport {
    std::vector<double> frame_rms;     // per tracked frame (index 0 <-> frame 1), averaged over sequences, px
    double mean_rms = 0.0;             // mean over every (sequence, frame) entry, px
    double std_rms = 0.0;              // std of frame_rms across frames
    double mean_rms_mm = 0.0;          // mean_rms * spacing; 0 when no spacing given
    std::vector<double> sequence_rms;  // mean RMS per sequence, px
    std::vector<long> npj_per_field;   // nonpositive Jacobian determinants per INF field
    long npj_total = 0;
    double inference_seconds = 0.0;    // wall clock spent in infer_sequence
};

inline EvalReport evaluate(const NetParams& params, const std::vector<EvalSequence>& seqs,
                           const SSConfig& ss, Mode mode = Mode::full, double mm_per_px = 0.0) {
    if (seqs.empty()) throw std::invalid_argument("evaluate: no sequences");
    EvalReport rep;
    std::vector<double> frame_sum, frame_cnt;
    double total = 0.0;
    size_t entries = 0;
    for (const EvalSequence& seq : seqs) {
        if (seq.landmarks.size() != seq.frames.size() || seq.landmarks.empty())
            throw std::invalid_argument("evaluate: sequence is missing landmark trajectories");
        auto t0 = std::chrono::steady_clock::now();
        MotionSequence motion = infer_sequence(seq.frames, params, ss, mode);
        auto t1 = std::chrono::steady_clock::now();
        rep.inference_seconds += std::chrono::duration<double>(t1 - t0).count();

        std::vector<double> per_frame = rms_per_frame(motion.lag_fields, seq.landmarks);
        double seq_sum = 0.0;
        for (size_t k = 0; k < per_frame.size(); ++k) {
            if (frame_sum.size() <= k) {
                frame_sum.resize(k + 1, 0.0);
                frame_cnt.resize(k + 1, 0.0);
            }
            frame_sum[k] += per_frame[k];
            frame_cnt[k] += 1.0;
            seq_sum += per_frame[k];
        }
        total += seq_sum;
        entries += per_frame.size();
        rep.sequence_rms.push_back(seq_sum / static_cast<double>(per_frame.size()));

        for (const VectorField& f : motion.inf_fields) {
            long n = count_nonpositive(jacobian_determinant(f));
            rep.npj_per_field.push_back(n);
            rep.npj_total += n;
        }
    }
    for (size_t k = 0; k < frame_sum.size(); ++k)
        rep.frame_rms.push_back(frame_sum[k] / frame_cnt[k]);
    rep.mean_rms = total / static_cast<double>(entries);
    double var = 0.0;
    for (double v : rep.frame_rms) var += (v - rep.mean_rms) * (v - rep.mean_rms);
    rep.std_rms = rep.frame_rms.empty() ? 0.0 : std::sqrt(var / rep.frame_rms.size());
    rep.mean_rms_mm = rep.mean_rms * mm_per_px;
    return rep;
}

inline nlohmann::json eval_report_to_json(const EvalReport& r) {
    return {{"mean_rms_px", r.mean_rms},
            {"std_rms_px", r.std_rms},
            {"mean_rms_mm", r.mean_rms_mm},
            {"frame_rms_px", r.frame_rms},
            {"sequence_rms_px", r.sequence_rms},
            {"nonpositive_jacobians", r.npj_total},
            {"nonpositive_jacobians_per_field", r.npj_per_field},
            {"inference_seconds", r.inference_seconds}};
}

inline void write_rms_csv(const std::filesystem::path& path,
                          const std::vector<double>& frame_rms) {
    std::ostringstream out;
    out.precision(17);
    out << "frame,rms_px\n";
    for (size_t k = 0; k < frame_rms.size(); ++k) out << (k + 1) << ',' << frame_rms[k] << '\n';
    atomic_write(path, out.str());
}

}  // namespace tagtrack
