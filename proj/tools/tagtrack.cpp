#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "tagtrack/checkpoint.hpp"
#include "tagtrack/engine.hpp"
#include "tagtrack/eval.hpp"
#include "tagtrack/render.hpp"
#include "tagtrack/synth.hpp"

namespace fs = std::filesystem;
using namespace tagtrack;

namespace {

nlohmann::json read_json_file(const fs::path& path) {
    std::ifstream in(path);
    require(in.good(), "cannot open " + path.string());
    return nlohmann::json::parse(in);
}

// One manifest per run, written last so a crash never leaves a manifest that
// describes missing artifacts. Checksums make reruns comparable; timings are
// the only non-reproducible part.
struct RunManifest {
    std::string command;
    uint64_t seed = 0;
    std::string config_hash;
    nlohmann::json inputs = nlohmann::json::object();
    nlohmann::json outputs = nlohmann::json::object();
    std::chrono::steady_clock::time_point t0 = std::chrono::steady_clock::now();

    void hash_config(const nlohmann::json& cfg) { config_hash = fnv1a64_hex(cfg.dump()); }
    void add_input(const fs::path& p) { inputs[p.string()] = file_checksum(p); }
    void add_output(const fs::path& base, const fs::path& p) {
        outputs[p.lexically_relative(base).generic_string()] = file_checksum(p);
    }
    void write(const fs::path& out_dir) {
        double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        nlohmann::json j = {{"command", command},       {"seed", seed},
                            {"config_hash", config_hash}, {"inputs", inputs},
                            {"outputs", outputs},       {"timings", {{"total_seconds", secs}}}};
        atomic_write(out_dir / "run.json", j.dump(2) + "\n");
    }
};

std::string seq_name(int i) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "seq_%03d", i);
    return buf;
}

// Dataset directories contain seq_NNN subdirectories plus dataset.json; fall
// back to a directory scan so hand-assembled datasets work too.
std::vector<fs::path> dataset_sequence_dirs(const fs::path& data) {
    require(fs::is_directory(data), "not a directory: " + data.string());
    std::vector<fs::path> dirs;
    if (fs::exists(data / "dataset.json")) {
        nlohmann::json ds = read_json_file(data / "dataset.json");
        for (const auto& name : ds.at("sequences")) dirs.push_back(data / name.get<std::string>());
    } else {
        for (const auto& e : fs::directory_iterator(data))
            if (e.is_directory() && e.path().filename().string().rfind("seq_", 0) == 0)
                dirs.push_back(e.path());
        std::sort(dirs.begin(), dirs.end());
    }
    require(!dirs.empty(), "no sequences found under " + data.string());
    return dirs;
}

struct SynthArgs {
    std::string out, config;
    uint64_t seed = 1;
    int count = 25;
    int frames = 0;  // 0 = keep per-config value
};

int cmd_synth(const SynthArgs& a) {
    RunManifest manifest;
    manifest.command = "synth";
    manifest.seed = a.seed;

    std::vector<PhantomConfig> configs;
    nlohmann::json cfg_json;
    if (!a.config.empty()) {
        cfg_json = read_json_file(a.config);
        if (cfg_json.contains("sequences")) {
            for (const auto& entry : cfg_json.at("sequences"))
                configs.push_back(phantom_config_from_json(entry));
        } else {
            configs.assign(a.count, phantom_config_from_json(cfg_json));
        }
    } else {
        cfg_json = {{"suite", "benchmark"}, {"count", a.count}};
        configs = benchmark_suite(a.count, a.seed);
    }
    if (a.frames > 0)
        for (PhantomConfig& c : configs) {
            c.frames = a.frames;
            c.validate();
        }
    manifest.hash_config(cfg_json);

    fs::path out = a.out;
    fs::create_directories(out);
    nlohmann::json names = nlohmann::json::array();
    for (size_t i = 0; i < configs.size(); ++i) {
        PhantomSequence seq = generate_phantom(configs[i], Rng::derive(a.seed, 0x5351u, i));
        fs::path dir = out / seq_name(static_cast<int>(i));
        export_phantom(seq, dir);
        names.push_back(seq_name(static_cast<int>(i)));
        for (const char* f : {"frames.tgf", "gt_lag.tgf", "landmarks.csv", "manifest.json"})
            manifest.add_output(out, dir / f);
    }
    nlohmann::json ds = {{"format", "tagtrack-dataset-1"},
                         {"count", configs.size()},
                         {"sequences", names}};
    atomic_write(out / "dataset.json", ds.dump(2) + "\n");
    manifest.add_output(out, out / "dataset.json");
    manifest.write(out);
    std::cout << "wrote " << configs.size() << " sequences to " << out.string() << "\n";
    return 0;
}

struct TrainArgs {
    std::string data, out, config, mode;
    uint64_t seed = 0;
    bool seed_set = false;
};

int cmd_train(const TrainArgs& a) {
    RunManifest manifest;
    manifest.command = "train";

    TrainConfig cfg;
    if (!a.config.empty()) cfg = train_config_from_json(read_json_file(a.config));
    if (!a.mode.empty()) cfg.mode = mode_from_string(a.mode);
    if (a.seed_set) cfg.seed = a.seed;
    cfg.validate();
    manifest.seed = cfg.seed;
    manifest.hash_config(train_config_to_json(cfg));

    std::vector<Sequence> dataset;
    for (const fs::path& dir : dataset_sequence_dirs(a.data)) {
        PhantomSequence seq = load_phantom(dir);
        dataset.push_back({std::move(seq.frames)});
        manifest.add_input(dir / "manifest.json");
    }

    TrainResult r = train(dataset, cfg);

    fs::path out = a.out;
    fs::create_directories(out);
    save_checkpoint(out / "checkpoint", r.params, static_cast<long>(r.history.size()),
                    {{"train_config", train_config_to_json(cfg)}});
    write_loss_csv(out / "loss.csv", r.history);
    {
        std::ostringstream csv;
        csv.precision(17);
        csv << "epoch,val_loss\n";
        for (size_t e = 0; e < r.val_history.size(); ++e)
            csv << e << ',' << r.val_history[e] << '\n';
        atomic_write(out / "val_loss.csv", csv.str());
    }
    for (const char* f : {"checkpoint/params.tgf", "checkpoint/manifest.json", "loss.csv",
                          "val_loss.csv"})
        manifest.add_output(out, out / f);
    manifest.write(out);

    std::cout << "trained " << mode_name(cfg.mode) << " for " << r.history.size() << " steps; "
              << "final loss " << (r.history.empty() ? 0.0 : r.history.back().total);
    if (r.best_epoch >= 0)
        std::cout << "; best validation " << r.best_val << " at epoch " << r.best_epoch;
    std::cout << "\n";
    return 0;
}

struct TrackArgs {
    std::string checkpoint, sequence, out;
};

int cmd_track(const TrackArgs& a) {
    RunManifest manifest;
    manifest.command = "track";

    Checkpoint ck = load_checkpoint(a.checkpoint);
    TrainConfig tc;
    if (ck.config.contains("train_config")) tc = train_config_from_json(ck.config.at("train_config"));
    manifest.seed = tc.seed;
    manifest.hash_config(train_config_to_json(tc));
    manifest.add_input(fs::path(a.checkpoint) / "manifest.json");

    fs::path seq_dir = a.sequence;
    fs::path frames_file = fs::is_directory(seq_dir) ? seq_dir / "frames.tgf" : seq_dir;
    std::vector<ScalarImage> frames = tensor_to_images(read_tgf1(frames_file));
    manifest.add_input(frames_file);

    MotionSequence motion = infer_sequence(frames, ck.params, tc.ss, tc.mode);

    // Landmarks from the sequence when available, else a regular seed grid.
    PointSet start;
    fs::path lm = fs::is_directory(seq_dir) ? seq_dir / "landmarks.csv" : fs::path();
    if (!lm.empty() && fs::exists(lm)) {
        start = read_landmarks(lm).at(0);
        manifest.add_input(lm);
    } else {
        for (int y = 8; y < frames[0].height - 4; y += 8)
            for (int x = 8; x < frames[0].width - 4; x += 8)
                start.points.push_back({static_cast<double>(x), static_cast<double>(y)});
    }
    std::vector<PointSet> tracked{start};
    for (const VectorField& lag : motion.lag_fields)
        tracked.push_back(track_points(lag, start));

    fs::path out = a.out;
    fs::create_directories(out);
    write_tgf1(out / "inf.tgf", fields_to_tensor(motion.inf_fields));
    write_tgf1(out / "lag.tgf", fields_to_tensor(motion.lag_fields));
    write_landmarks(out / "tracked.csv", tracked);
    manifest.add_output(out, out / "inf.tgf");
    manifest.add_output(out, out / "lag.tgf");
    manifest.add_output(out, out / "tracked.csv");

    char buf[32];
    for (size_t n = 0; n < frames.size(); ++n) {
        std::snprintf(buf, sizeof buf, "overlay_%03zu.ppm", n);
        write_ppm(out / buf, render_overlay(frames[n], tracked[n]));
        manifest.add_output(out, out / buf);
        if (n == 0) continue;
        std::snprintf(buf, sizeof buf, "quiver_%03zu.ppm", n);
        write_ppm(out / buf, render_quiver(frames[n], motion.inf_fields[n - 1]));
        manifest.add_output(out, out / buf);
        std::snprintf(buf, sizeof buf, "taggrid_%03zu.ppm", n);
        write_ppm(out / buf, render_tag_grid(frames[n], motion.lag_fields[n - 1]));
        manifest.add_output(out, out / buf);
    }
    manifest.write(out);
    std::cout << "tracked " << start.size() << " points over " << frames.size() << " frames\n";
    return 0;
}

struct EvalArgs {
    std::string checkpoint, data, out, mode;
    double spacing = 0.0;
};

int cmd_eval(const EvalArgs& a) {
    RunManifest manifest;
    manifest.command = "eval";

    Checkpoint ck = load_checkpoint(a.checkpoint);
    TrainConfig tc;
    if (ck.config.contains("train_config")) tc = train_config_from_json(ck.config.at("train_config"));
    if (!a.mode.empty()) tc.mode = mode_from_string(a.mode);
    manifest.seed = tc.seed;
    manifest.hash_config(train_config_to_json(tc));
    manifest.add_input(fs::path(a.checkpoint) / "manifest.json");

    std::vector<EvalSequence> seqs;
    nlohmann::json names = nlohmann::json::array();
    for (const fs::path& dir : dataset_sequence_dirs(a.data)) {
        PhantomSequence seq = load_phantom(dir);
        seqs.push_back({std::move(seq.frames), std::move(seq.landmarks)});
        names.push_back(dir.filename().string());
        manifest.add_input(dir / "manifest.json");
    }

    EvalReport rep = evaluate(ck.params, seqs, tc.ss, tc.mode, a.spacing);

    fs::path out = a.out;
    fs::create_directories(out);
    nlohmann::json report = eval_report_to_json(rep);
    report["mode"] = mode_name(tc.mode);
    report["sequences"] = names;
    atomic_write(out / "report.json", report.dump(2) + "\n");
    write_rms_csv(out / "rms_curve.csv", rep.frame_rms);
    write_ppm(out / "rms_curve.ppm", render_curve(rep.frame_rms));
    for (const char* f : {"report.json", "rms_curve.csv", "rms_curve.ppm"})
        manifest.add_output(out, out / f);
    manifest.write(out);

    std::printf("mode %s: mean RMS %.4f px over %zu sequences; %ld nonpositive Jacobians\n",
                mode_name(tc.mode), rep.mean_rms, seqs.size(), rep.npj_total);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"unsupervised motion tracking for tagged image sequences"};
    app.require_subcommand(1);

    SynthArgs sa;
    CLI::App* synth = app.add_subcommand("synth", "generate a phantom dataset");
    synth->add_option("--out", sa.out, "output dataset directory")->required();
    synth->add_option("--config", sa.config, "phantom config JSON");
    synth->add_option("--seed", sa.seed, "master seed");
    synth->add_option("--count", sa.count, "number of sequences")->check(CLI::PositiveNumber);
    synth->add_option("--frames", sa.frames, "override frames per sequence")
        ->check(CLI::PositiveNumber);

    TrainArgs ta;
    CLI::App* train = app.add_subcommand("train", "train a tracking model");
    train->add_option("--data", ta.data, "dataset directory")->required();
    train->add_option("--out", ta.out, "output directory")->required();
    train->add_option("--config", ta.config, "training config JSON");
    train->add_option("--mode", ta.mode, "ablation mode: A1..A6 or FULL");
    CLI::Option* seed_opt = train->add_option("--seed", ta.seed, "training seed");

    TrackArgs ka;
    CLI::App* track = app.add_subcommand("track", "run inference on one sequence");
    track->add_option("--checkpoint", ka.checkpoint, "checkpoint directory")->required();
    track->add_option("--sequence", ka.sequence, "sequence directory or frames TGF1 file")
        ->required();
    track->add_option("--out", ka.out, "output directory")->required();

    EvalArgs ea;
    CLI::App* eval = app.add_subcommand("eval", "evaluate a checkpoint on a dataset");
    eval->add_option("--checkpoint", ea.checkpoint, "checkpoint directory")->required();
    eval->add_option("--data", ea.data, "dataset directory")->required();
    eval->add_option("--out", ea.out, "output directory")->required();
    eval->add_option("--mode", ea.mode, "override inference mode");
    eval->add_option("--spacing", ea.spacing, "pixel spacing in mm for mm-unit RMS");

    CLI11_PARSE(app, argc, argv);

    try {
        if (synth->parsed()) return cmd_synth(sa);
        if (train->parsed()) {
            ta.seed_set = seed_opt->count() > 0;
            return cmd_train(ta);
        }
        if (track->parsed()) return cmd_track(ka);
        if (eval->parsed()) return cmd_eval(ea);
    } catch (const std::exception& e) {
        std::cerr << "tagtrack: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
