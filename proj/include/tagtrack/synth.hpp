#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "tagtrack/io.hpp"
#include "tagtrack/parallel.hpp"
#include "tagtrack/rng.hpp"
#include "tagtrack/types.hpp"

// Synthetic tagged-sequence phantom: an annular bright region carrying two
// oblique stripe patterns, advected by an analytic time-dependent map with
// intensity fading and additive noise.  Frames are rendered by backward
// mapping through the inverse of the motion (exact for translation and
// rotation, fixed-point for the annulus), so the dense ground-truth
// Lagrangian displacement Phi_n(p) = Psi_n(p) - p on the frame-0 grid and
// the landmark trajectories Psi_n(X0) come from the same analytic map and
// carry no discretisation error of their own.

namespace tagtrack {

enum class MotionModel { translation, rotation, annulus };

inline const char* motion_model_name(MotionModel m) {
    switch (m) {
        case MotionModel::translation: return "translation";
        case MotionModel::rotation: return "rotation";
        case MotionModel::annulus: return "annulus";
    }
    throw std::logic_error("bad motion model");
}

inline MotionModel motion_model_from_string(const std::string& s) {
    for (MotionModel m :
         {MotionModel::translation, MotionModel::rotation, MotionModel::annulus})
        if (s == motion_model_name(m)) return m;
    throw std::invalid_argument("unknown motion model: " + s);
}

struct PhantomConfig {
    int height = 64;
    int width = 64;
    int frames = 12;
    double tag_spacing = 6.0;  // stripe period, px
    double tag_depth = 0.7;    // stripe contrast, in (0, 1]
    double fade_tau = 20.0;    // frames; brightness decays as exp(-n/tau)
    double fade_floor = 0.1;   // asymptote of the fade curve
    double noise_std = 0.02;
    MotionModel model = MotionModel::annulus;
    // translation: (amp_x, amp_y) px per frame.  rotation: amp_x radians per
    // frame about the grid centre.  annulus: peak radial contraction -- the
    // ring radius scales by 1 - amp_x at mid-sequence.
    double amp_x = 0.15;
    double amp_y = 0.0;
    int landmark_count = 16;

    void validate() const {
        if (height < 4 || width < 4) throw std::invalid_argument("phantom: grid too small");
        if (frames < 2) throw std::invalid_argument("phantom: need at least 2 frames");
        if (tag_spacing < 3.0) throw std::invalid_argument("phantom: tag spacing must be >= 3");
        if (!(tag_depth > 0.0) || tag_depth > 1.0)
            throw std::invalid_argument("phantom: tag depth must be in (0, 1]");
        if (!(fade_tau > 0.0)) throw std::invalid_argument("phantom: fade tau must be positive");
        if (fade_floor < 0.0 || fade_floor > 1.0)
            throw std::invalid_argument("phantom: fade floor must be in [0, 1]");
        if (noise_std < 0.0) throw std::invalid_argument("phantom: noise std must be >= 0");
        if (landmark_count < 1) throw std::invalid_argument("phantom: need at least 1 landmark");
    }
};

namespace detail {

// Geometry shared by the texture and the annulus motion, scaled to the grid.
struct PhantomGeom {
    double cx, cy;   // grid centre
    double ring_r;   // radius of the bright ring
    double ring_w;   // brightness profile sigma
    double bump_w;   // radial-motion profile sigma
};

inline PhantomGeom phantom_geom(const PhantomConfig& cfg) {
    double m = std::min(cfg.height, cfg.width);
    return {(cfg.width - 1) / 2.0, (cfg.height - 1) / 2.0, 0.30 * m, 0.08 * m, 0.10 * m};
}

// Per-frame analytic map Psi_n on continuous coordinates.  The annulus model
// moves radius r to r (1 - a w(r)) with a ring-centred Gaussian bump w, so the
// contraction is concentrated on the annulus and vanishes toward the grid
// border; its inverse has no closed form and is solved by fixed-point
// iteration (30 steps, tol 1e-6 px).
class FrameMap {
  public:
    FrameMap(const PhantomConfig& cfg, const PhantomGeom& g, int n) : model_(cfg.model), g_(g) {
        const double pi = 3.14159265358979323846;
        switch (model_) {
            case MotionModel::translation:
                tx_ = n * cfg.amp_x;
                ty_ = n * cfg.amp_y;
                break;
            case MotionModel::rotation:
                cos_ = std::cos(n * cfg.amp_x);
                sin_ = std::sin(n * cfg.amp_x);
                break;
            case MotionModel::annulus:
                amp_ = cfg.amp_x * std::sin(pi * n / (cfg.frames - 1));
                break;
        }
    }

    Point2 forward(Point2 p) const {
        switch (model_) {
            case MotionModel::translation: return {p.x + tx_, p.y + ty_};
            case MotionModel::rotation: {
                double dx = p.x - g_.cx, dy = p.y - g_.cy;
                return {g_.cx + cos_ * dx - sin_ * dy, g_.cy + sin_ * dx + cos_ * dy};
            }
            case MotionModel::annulus: {
                double dx = p.x - g_.cx, dy = p.y - g_.cy;
                double r = std::hypot(dx, dy);
                if (r < 1e-12) return p;
                double scale = radial(r) / r;
                return {g_.cx + scale * dx, g_.cy + scale * dy};
            }
        }
        throw std::logic_error("bad motion model");
    }

    Point2 inverse(Point2 q) const {
        switch (model_) {
            case MotionModel::translation: return {q.x - tx_, q.y - ty_};
            case MotionModel::rotation: {
                double dx = q.x - g_.cx, dy = q.y - g_.cy;
                return {g_.cx + cos_ * dx + sin_ * dy, g_.cy - sin_ * dx + cos_ * dy};
            }
            case MotionModel::annulus: {
                double dx = q.x - g_.cx, dy = q.y - g_.cy;
                double rq = std::hypot(dx, dy);
                if (rq < 1e-12) return q;
                // solve radial(r) = rq:  r <- rq + a r w(r)
                double r = rq;
                for (int it = 0; it < 30; ++it) {
                    double next = rq + amp_ * r * bump(r);
                    if (std::abs(next - r) < 1e-6) {
                        r = next;
                        break;
                    }
                    r = next;
                }
                double scale = r / rq;
                return {g_.cx + scale * dx, g_.cy + scale * dy};
            }
        }
        throw std::logic_error("bad motion model");
    }

    // Injective iff the radial profile is strictly increasing (translation and
    // rotation are rigid).  Scanned numerically out to the grid corners.
    bool injective(double max_r) const {
        if (model_ != MotionModel::annulus) return true;
        double prev = radial(0.0);
        for (double r = 0.05; r <= max_r; r += 0.05) {
            double cur = radial(r);
            if (cur <= prev + 1e-9) return false;
            prev = cur;
        }
        return true;
    }

  private:
    double bump(double r) const {
        double d = r - g_.ring_r;
        return std::exp(-d * d / (2.0 * g_.bump_w * g_.bump_w));
    }
    double radial(double r) const { return r * (1.0 - amp_ * bump(r)); }

    MotionModel model_;
    PhantomGeom g_;
    double tx_ = 0, ty_ = 0;      // translation
    double cos_ = 1, sin_ = 0;    // rotation
    double amp_ = 0;              // annulus contraction at the ring radius
};

}  // namespace detail

// Reference texture: bright annulus times two stripe gratings at +-45 deg.
inline double phantom_texture(const PhantomConfig& cfg, const detail::PhantomGeom& g, double x,
                              double y) {
    const double pi = 3.14159265358979323846;
    const double inv_sqrt2 = 0.70710678118654752440;
    double u = (x + y) * inv_sqrt2;
    double v = (x - y) * inv_sqrt2;
    double su = 1.0 - cfg.tag_depth * 0.5 * (1.0 + std::cos(2.0 * pi * u / cfg.tag_spacing));
    double sv = 1.0 - cfg.tag_depth * 0.5 * (1.0 + std::cos(2.0 * pi * v / cfg.tag_spacing));
    double dr = std::hypot(x - g.cx, y - g.cy) - g.ring_r;
    double bright = 0.2 + 0.8 * std::exp(-dr * dr / (2.0 * g.ring_w * g.ring_w));
    return bright * su * sv;
}

inline double phantom_fade(const PhantomConfig& cfg, int n) {
    return cfg.fade_floor + (1.0 - cfg.fade_floor) * std::exp(-n / cfg.fade_tau);
}

struct PhantomSequence {
    PhantomConfig cfg;
    uint64_t seed = 0;
    std::vector<ScalarImage> frames;   // N
    std::vector<VectorField> gt_lag;   // N-1 displacement fields on the frame-0 grid
    std::vector<PointSet> landmarks;   // N trajectories; landmarks[n][i] tracks point i
};

inline PhantomSequence generate_phantom(const PhantomConfig& cfg, uint64_t seed) {
    cfg.validate();
    detail::PhantomGeom g = detail::phantom_geom(cfg);
    int H = cfg.height, W = cfg.width, N = cfg.frames;

    // Maps are built (and vetted) up front so bad configs fail before work.
    std::vector<detail::FrameMap> maps;
    double max_r = std::hypot(std::max(g.cx, W - 1 - g.cx), std::max(g.cy, H - 1 - g.cy)) + 1.0;
    for (int n = 0; n < N; ++n) {
        maps.emplace_back(cfg, g, n);
        if (!maps.back().injective(max_r)) throw std::runtime_error("non-diffeomorphic phantom");
    }

    PhantomSequence out;
    out.cfg = cfg;
    out.seed = seed;
    out.frames.assign(N, ScalarImage(H, W));
    par_for(N, [&](int n) {
        double fade = phantom_fade(cfg, n);
        ScalarImage& img = out.frames[n];
        for (int y = 0; y < H; ++y)
            for (int x = 0; x < W; ++x) {
                Point2 p = maps[n].inverse({static_cast<double>(x), static_cast<double>(y)});
                double val = fade * phantom_texture(cfg, g, p.x, p.y);
                size_t idx = static_cast<size_t>(y) * W + x;
                if (cfg.noise_std > 0.0)
                    val += cfg.noise_std * Rng(Rng::derive(seed, 0x4652u, n, idx)).normal();
                img.data[idx] = val;
            }
    });

    for (int n = 1; n < N; ++n) {
        VectorField f(H, W, FieldKind::displacement);
        for (int y = 0; y < H; ++y)
            for (int x = 0; x < W; ++x) {
                Point2 q = maps[n].forward({static_cast<double>(x), static_cast<double>(y)});
                size_t idx = static_cast<size_t>(y) * W + x;
                f.dx[idx] = q.x - x;
                f.dy[idx] = q.y - y;
            }
        out.gt_lag.push_back(std::move(f));
    }

    // Landmarks ring the annulus at frame 0 with a little seeded scatter.
    PointSet base;
    const double pi = 3.14159265358979323846;
    for (int i = 0; i < cfg.landmark_count; ++i) {
        Rng rng(Rng::derive(seed, 0x4c4du, i));
        double theta = 2.0 * pi * (i + rng.uniform(-0.25, 0.25)) / cfg.landmark_count;
        double rad = g.ring_r + rng.uniform(-0.5, 0.5) * g.ring_w;
        base.points.push_back({g.cx + rad * std::cos(theta), g.cy + rad * std::sin(theta)});
    }
    for (int n = 0; n < N; ++n) {
        PointSet s;
        for (const Point2& p : base.points) s.points.push_back(maps[n].forward(p));
        out.landmarks.push_back(std::move(s));
    }
    return out;
}

// Mixed-model benchmark suite: cycles annulus / rotation / translation with
// seeded amplitude jitter around per-model defaults. Every entry stays well
// inside the diffeomorphic range.
inline std::vector<PhantomConfig> benchmark_suite(int count, uint64_t seed,
                                                  PhantomConfig base = {}) {
    if (count < 1) throw std::invalid_argument("benchmark_suite: count must be >= 1");
    std::vector<PhantomConfig> out;
    for (int i = 0; i < count; ++i) {
        Rng rng(Rng::derive(seed, 0x5355u, i));
        double j = rng.uniform(0.7, 1.3);
        PhantomConfig cfg = base;
        switch (i % 3) {
            case 0:
                cfg.model = MotionModel::annulus;
                cfg.amp_x = 0.15 * j;
                cfg.amp_y = 0.0;
                break;
            case 1:
                cfg.model = MotionModel::rotation;
                cfg.amp_x = 0.035 * j;
                cfg.amp_y = 0.0;
                break;
            case 2:
                cfg.model = MotionModel::translation;
                cfg.amp_x = 0.45 * j;
                cfg.amp_y = -0.30 * j;
                break;
        }
        cfg.validate();
        out.push_back(cfg);
    }
    return out;
}

inline nlohmann::json phantom_config_to_json(const PhantomConfig& cfg) {
    return {{"height", cfg.height},
            {"width", cfg.width},
            {"frames", cfg.frames},
            {"tag_spacing", cfg.tag_spacing},
            {"tag_depth", cfg.tag_depth},
            {"fade_tau", cfg.fade_tau},
            {"fade_floor", cfg.fade_floor},
            {"noise_std", cfg.noise_std},
            {"model", motion_model_name(cfg.model)},
            {"amp_x", cfg.amp_x},
            {"amp_y", cfg.amp_y},
            {"landmark_count", cfg.landmark_count}};
}

inline PhantomConfig phantom_config_from_json(const nlohmann::json& j) {
    PhantomConfig cfg;
    cfg.height = j.value("height", cfg.height);
    cfg.width = j.value("width", cfg.width);
    cfg.frames = j.value("frames", cfg.frames);
    cfg.tag_spacing = j.value("tag_spacing", cfg.tag_spacing);
    cfg.tag_depth = j.value("tag_depth", cfg.tag_depth);
    cfg.fade_tau = j.value("fade_tau", cfg.fade_tau);
    cfg.fade_floor = j.value("fade_floor", cfg.fade_floor);
    cfg.noise_std = j.value("noise_std", cfg.noise_std);
    if (j.contains("model")) cfg.model = motion_model_from_string(j.at("model").get<std::string>());
    cfg.amp_x = j.value("amp_x", cfg.amp_x);
    cfg.amp_y = j.value("amp_y", cfg.amp_y);
    cfg.landmark_count = j.value("landmark_count", cfg.landmark_count);
    cfg.validate();
    return cfg;
}

inline void export_phantom(const PhantomSequence& seq, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    write_tgf1(dir / "frames.tgf", images_to_tensor(seq.frames));
    write_tgf1(dir / "gt_lag.tgf", fields_to_tensor(seq.gt_lag));
    write_landmarks(dir / "landmarks.csv", seq.landmarks);
    nlohmann::json files;
    for (const char* name : {"frames.tgf", "gt_lag.tgf", "landmarks.csv"})
        files[name] = file_checksum(dir / name);
    nlohmann::json manifest = {{"format", "tagtrack-phantom-1"},
                               {"seed", seq.seed},
                               {"config", phantom_config_to_json(seq.cfg)},
                               {"files", files}};
    atomic_write(dir / "manifest.json", manifest.dump(2) + "\n");
}

inline PhantomSequence load_phantom(const std::filesystem::path& dir) {
    std::ifstream in(dir / "manifest.json");
    require(in.good(), "cannot open " + (dir / "manifest.json").string());
    nlohmann::json manifest = nlohmann::json::parse(in);
    require(manifest.value("format", "") == std::string("tagtrack-phantom-1"),
            "phantom manifest: bad format tag");
    PhantomSequence seq;
    seq.cfg = phantom_config_from_json(manifest.at("config"));
    seq.seed = manifest.value("seed", uint64_t{0});
    seq.frames = tensor_to_images(read_tgf1(dir / "frames.tgf"));
    seq.gt_lag = tensor_to_fields(read_tgf1(dir / "gt_lag.tgf"), FieldKind::displacement);
    seq.landmarks = read_landmarks(dir / "landmarks.csv");
    require(static_cast<int>(seq.frames.size()) == seq.cfg.frames, "phantom: frame count mismatch");
    require(seq.gt_lag.size() + 1 == seq.frames.size(), "phantom: field count mismatch");
    require(seq.landmarks.size() == seq.frames.size(), "phantom: landmark frame count mismatch");
    return seq;
}

}  // namespace tagtrack
