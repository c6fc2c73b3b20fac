#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "tagtrack/io.hpp"
#include "tagtrack/net.hpp"

// Checkpoints: every parameter tensor as one TGF1 record concatenated into
// params.tgf, plus manifest.json carrying {name, shape, offset, bytes} per
// tensor alongside the network config and the training step. Payloads are
// 32-bit floats, so a load-save cycle is idempotent but the first save
// rounds.

namespace tagtrack {

inline nlohmann::json net_config_to_json(const NetConfig& cfg) {
    return {{"enc", cfg.enc}, {"dec", cfg.dec}, {"leaky_slope", cfg.leaky_slope}};
}

inline NetConfig net_config_from_json(const nlohmann::json& j) {
    NetConfig cfg;
    if (j.contains("enc")) cfg.enc = j.at("enc").get<std::vector<int>>();
    if (j.contains("dec")) cfg.dec = j.at("dec").get<std::vector<int>>();
    cfg.leaky_slope = j.value("leaky_slope", cfg.leaky_slope);
    cfg.validate();
    return cfg;
}

namespace detail {

inline Tensor4 layer_weights_tensor(const ConvLayer& l) {
    Tensor4 t;
    t.shape = {l.out_c, l.in_c, 3, 3};
    t.data = l.w;
    return t;
}

inline Tensor4 layer_bias_tensor(const ConvLayer& l) {
    Tensor4 t;
    t.shape = {l.out_c, 1, 1, 1};
    t.data = l.b;
    return t;
}

}  // namespace detail

inline void save_checkpoint(const std::filesystem::path& dir, const NetParams& params,
                            long step, const nlohmann::json& extra = {}) {
    std::filesystem::create_directories(dir);
    std::string blob;
    nlohmann::json tensors = nlohmann::json::array();
    auto layers = params.layers();
    for (int li = 0; li < static_cast<int>(layers.size()); ++li) {
        auto add = [&](const std::string& name, const Tensor4& t) {
            std::string rec = tgf1_serialize(t);
            tensors.push_back({{"name", name},
                               {"shape", {t.shape[0], t.shape[1], t.shape[2], t.shape[3]}},
                               {"offset", blob.size()},
                               {"bytes", rec.size()}});
            blob += rec;
        };
        std::string base = NetParams::layer_name(li);
        add(base + ".w", detail::layer_weights_tensor(*layers[li]));
        add(base + ".b", detail::layer_bias_tensor(*layers[li]));
    }
    nlohmann::json manifest = {{"format", "tagtrack-checkpoint-1"},
                               {"step", step},
                               {"net", net_config_to_json(params.cfg)},
                               {"tensors", tensors}};
    if (!extra.is_null() && !extra.empty()) manifest["config"] = extra;
    atomic_write(dir / "params.tgf", blob);
    atomic_write(dir / "manifest.json", manifest.dump(2) + "\n");
}

struct Checkpoint {
    NetParams params;
    long step = 0;
    nlohmann::json config;  // caller-provided extras; empty when absent
};

inline Checkpoint load_checkpoint(const std::filesystem::path& dir) {
    std::ifstream mf(dir / "manifest.json");
    require(mf.good(), "checkpoint: cannot open " + (dir / "manifest.json").string());
    nlohmann::json manifest = nlohmann::json::parse(mf, nullptr, true);
    require(manifest.value("format", "") == "tagtrack-checkpoint-1",
            "checkpoint: unrecognized manifest format");

    std::ifstream pf(dir / "params.tgf", std::ios::binary);
    require(pf.good(), "checkpoint: cannot open " + (dir / "params.tgf").string());
    std::stringstream ss;
    ss << pf.rdbuf();
    std::string blob = ss.str();

    Checkpoint out;
    out.step = manifest.at("step").get<long>();
    out.params = make_net(net_config_from_json(manifest.at("net")), 0);
    if (manifest.contains("config")) out.config = manifest.at("config");

    auto layers = out.params.layers();
    const auto& tensors = manifest.at("tensors");
    require(tensors.size() == layers.size() * 2, "checkpoint: tensor count mismatch");
    for (const auto& entry : tensors) {
        std::string name = entry.at("name").get<std::string>();
        size_t offset = entry.at("offset").get<size_t>();
        size_t bytes = entry.at("bytes").get<size_t>();
        require(offset + bytes <= blob.size(), "checkpoint: tensor record out of range");
        Tensor4 t = tgf1_parse(blob.substr(offset, bytes), "checkpoint tensor " + name);

        auto dot = name.rfind('.');
        require(dot != std::string::npos, "checkpoint: bad tensor name " + name);
        std::string base = name.substr(0, dot), kind = name.substr(dot + 1);
        ConvLayer* layer = nullptr;
        for (int li = 0; li < static_cast<int>(layers.size()); ++li)
            if (base == NetParams::layer_name(li)) layer = layers[li];
        require(layer != nullptr, "checkpoint: unknown tensor name " + name);
        std::vector<double>& dst = (kind == "w") ? layer->w : layer->b;
        require(kind == "w" || kind == "b", "checkpoint: bad tensor name " + name);
        require(t.data.size() == dst.size(), "checkpoint: tensor shape mismatch for " + name);
        if (kind == "w")
            require(t.shape[0] == layer->out_c && t.shape[1] == layer->in_c &&
                        t.shape[2] == 3 && t.shape[3] == 3,
                    "checkpoint: tensor shape mismatch for " + name);
        dst = t.data;
    }
    return out;
}

}  // namespace tagtrack
