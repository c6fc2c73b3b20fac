#include <catch2/catch_amalgamated.hpp>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <sys/wait.h>

#include "tagtrack/io.hpp"

using namespace tagtrack;
namespace fs = std::filesystem;

namespace {

struct CmdResult {
    int exit_code = -1;
    std::string out, err;
};

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

CmdResult run_cli(const std::string& args) {
    static int call = 0;
    fs::path base = fs::temp_directory_path() / ("tagtrack_cli_io_" + std::to_string(call++));
    fs::path of = base.string() + ".out", ef = base.string() + ".err";
    std::string cmd = std::string(TAGTRACK_BIN) + " " + args + " >" + of.string() + " 2>" +
                      ef.string();
    int rc = std::system(cmd.c_str());
    CmdResult r;
    r.exit_code = WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
    r.out = slurp(of);
    r.err = slurp(ef);
    return r;
}

fs::path temp_dir(const char* tag) {
    fs::path p = fs::temp_directory_path() / (std::string("tagtrack_cli_") + tag);
    fs::remove_all(p);
    return p;
}

nlohmann::json read_json(const fs::path& p) {
    std::ifstream in(p);
    REQUIRE(in.good());
    return nlohmann::json::parse(in);
}

// Small dataset + checkpoint fixture shared by the track/eval cases.
void make_dataset(const fs::path& dir, const std::string& extra = "") {
    CmdResult r = run_cli("synth --out " + dir.string() + " --count 2 --frames 3 --seed 1" + extra);
    REQUIRE(r.exit_code == 0);
}

fs::path make_checkpoint(const fs::path& data, const fs::path& out) {
    fs::path cfg = out.string() + "_cfg.json";
    atomic_write(cfg, R"({"epochs": 1, "seed": 7, "mode": "A2",
        "adam": {"lr": 0.001}, "loss": {"window": 5},
        "net": {"enc": [4, 6, 6, 6], "dec": [6, 6, 6, 4]}, "ss": {"steps": 4}})");
    CmdResult r = run_cli("train --data " + data.string() + " --out " + out.string() +
                          " --config " + cfg.string());
    REQUIRE(r.exit_code == 0);
    return out / "checkpoint";
}

}  // namespace

TEST_CASE("synth writes a complete dataset with a stable golden checksum") {
    fs::path dir = temp_dir("golden");
    make_dataset(dir);

    nlohmann::json ds = read_json(dir / "dataset.json");
    CHECK(ds.at("format") == "tagtrack-dataset-1");
    CHECK(ds.at("count") == 2);
    CHECK(fs::exists(dir / "seq_001" / "frames.tgf"));

    // Golden value recorded from the first build of this suite; any change to
    // the generator, the seeding, or the file format will move it.
    CHECK(file_checksum(dir / "seq_000" / "frames.tgf") == "9070160084106d64");

    fs::path dir2 = temp_dir("golden2");
    make_dataset(dir2);
    for (const char* f : {"frames.tgf", "gt_lag.tgf", "landmarks.csv", "manifest.json"})
        CHECK(file_checksum(dir / "seq_000" / f) == file_checksum(dir2 / "seq_000" / f));

    nlohmann::json run_a = read_json(dir / "run.json");
    nlohmann::json run_b = read_json(dir2 / "run.json");
    CHECK(run_a.at("outputs") == run_b.at("outputs"));
    CHECK(run_a.at("config_hash") == run_b.at("config_hash"));
    CHECK(run_a.contains("timings"));
}

TEST_CASE("synth honours a minimal two-frame request") {
    fs::path dir = temp_dir("twoframe");
    CmdResult r = run_cli("synth --out " + dir.string() + " --count 1 --frames 2 --seed 4");
    REQUIRE(r.exit_code == 0);
    Tensor4 gt = read_tgf1(dir / "seq_000" / "gt_lag.tgf");
    CHECK(gt.shape == std::array<int, 4>{1, 2, 64, 64});
    Tensor4 frames = read_tgf1(dir / "seq_000" / "frames.tgf");
    CHECK(frames.shape == std::array<int, 4>{2, 1, 64, 64});
}

TEST_CASE("invalid inputs exit nonzero with a one-line diagnostic") {
    fs::path dir = temp_dir("badcfg");
    fs::path cfg = fs::temp_directory_path() / "tagtrack_cli_bad.json";
    atomic_write(cfg, R"({"tag_depth": 0.0})");
    CmdResult r = run_cli("synth --out " + dir.string() + " --config " + cfg.string());
    CHECK(r.exit_code == 1);
    CHECK(r.err.find("tag depth") != std::string::npos);
    CHECK(r.err.find('\n') == r.err.size() - 1);

    CmdResult missing = run_cli("train --data /nonexistent_tagtrack --out " + dir.string());
    CHECK(missing.exit_code == 1);
    CHECK(!missing.err.empty());

    CmdResult nosub = run_cli("");
    CHECK(nosub.exit_code != 0);
}

TEST_CASE("train reproduces its loss log bitwise under a fixed seed") {
    fs::path data = temp_dir("train_data");
    make_dataset(data);
    fs::path a = temp_dir("train_a"), b = temp_dir("train_b");
    make_checkpoint(data, a);
    make_checkpoint(data, b);

    CHECK(file_checksum(a / "loss.csv") == file_checksum(b / "loss.csv"));
    CHECK(file_checksum(a / "val_loss.csv") == file_checksum(b / "val_loss.csv"));
    CHECK(file_checksum(a / "checkpoint" / "params.tgf") ==
          file_checksum(b / "checkpoint" / "params.tgf"));

    nlohmann::json run_a = read_json(a / "run.json");
    nlohmann::json run_b = read_json(b / "run.json");
    run_a.erase("timings");
    run_b.erase("timings");
    CHECK(run_a == run_b);

    // --mode overrides the config file.
    CmdResult r = run_cli("train --data " + data.string() + " --out " + a.string() +
                          "_a1 --mode A1 --config " + (a.string() + "_cfg.json"));
    REQUIRE(r.exit_code == 0);
    CHECK(r.out.find("trained A1") != std::string::npos);
}

TEST_CASE("track emits fields, tracked landmarks, and figures") {
    fs::path data = temp_dir("track_data");
    make_dataset(data);
    fs::path ck = make_checkpoint(data, temp_dir("track_run"));
    fs::path out = temp_dir("track_out");

    CmdResult r = run_cli("track --checkpoint " + ck.string() + " --sequence " +
                          (data / "seq_000").string() + " --out " + out.string());
    REQUIRE(r.exit_code == 0);

    Tensor4 inf = read_tgf1(out / "inf.tgf");
    Tensor4 lag = read_tgf1(out / "lag.tgf");
    CHECK(inf.shape == std::array<int, 4>{2, 2, 64, 64});
    CHECK(lag.shape == std::array<int, 4>{2, 2, 64, 64});
    auto lms = read_landmarks(out / "tracked.csv");
    REQUIRE(lms.size() == 3);
    CHECK(lms[0].size() == 16);
    for (const char* f : {"overlay_000.ppm", "overlay_002.ppm", "quiver_001.ppm",
                          "taggrid_002.ppm", "run.json"})
        CHECK(fs::exists(out / f));

    // Figures and fields are byte-stable across reruns.
    fs::path out2 = temp_dir("track_out2");
    REQUIRE(run_cli("track --checkpoint " + ck.string() + " --sequence " +
                    (data / "seq_000").string() + " --out " + out2.string())
                .exit_code == 0);
    for (const char* f : {"inf.tgf", "lag.tgf", "tracked.csv", "overlay_001.ppm",
                          "quiver_002.ppm", "taggrid_001.ppm"})
        CHECK(file_checksum(out / f) == file_checksum(out2 / f));

    // A bare frames file works without landmarks: a seed grid is tracked.
    fs::path out3 = temp_dir("track_out3");
    REQUIRE(run_cli("track --checkpoint " + ck.string() + " --sequence " +
                    (data / "seq_000" / "frames.tgf").string() + " --out " + out3.string())
                .exit_code == 0);
    CHECK(read_landmarks(out3 / "tracked.csv")[0].size() > 16);
}

TEST_CASE("eval writes a report with the expected schema") {
    fs::path data = temp_dir("eval_data");
    make_dataset(data);
    fs::path ck = make_checkpoint(data, temp_dir("eval_run"));
    fs::path out = temp_dir("eval_out");

    CmdResult r = run_cli("eval --checkpoint " + ck.string() + " --data " + data.string() +
                          " --out " + out.string() + " --spacing 1.25");
    REQUIRE(r.exit_code == 0);
    CHECK(r.out.find("mean RMS") != std::string::npos);

    nlohmann::json rep = read_json(out / "report.json");
    for (const char* key : {"mean_rms_px", "std_rms_px", "mean_rms_mm", "frame_rms_px",
                            "sequence_rms_px", "nonpositive_jacobians",
                            "nonpositive_jacobians_per_field", "inference_seconds", "mode",
                            "sequences"})
        CHECK(rep.contains(key));
    CHECK(rep.at("mode") == "A2");
    CHECK(rep.at("sequences").size() == 2);
    CHECK(rep.at("frame_rms_px").size() == 2);
    CHECK(rep.at("mean_rms_mm").get<double>() ==
          Catch::Approx(1.25 * rep.at("mean_rms_px").get<double>()));

    std::string csv = slurp(out / "rms_curve.csv");
    CHECK(csv.rfind("frame,rms_px\n", 0) == 0);
    CHECK(fs::exists(out / "rms_curve.ppm"));

    // Mode override changes inference pairing.
    fs::path out2 = temp_dir("eval_out2");
    REQUIRE(run_cli("eval --checkpoint " + ck.string() + " --data " + data.string() +
                    " --out " + out2.string() + " --mode A1")
                .exit_code == 0);
    CHECK(read_json(out2 / "report.json").at("mode") == "A1");
}
