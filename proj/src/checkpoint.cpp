#include "sietrack/checkpoint.hpp"

#include <cstring>
#include <fstream>

#include <json.hpp>

#include "sietrack/errors.hpp"
#include "sietrack/serialize.hpp"

namespace sietrack {

using nlohmann::json;

void to_json(json& j, const ModelConfig& cfg) {
    j = json{{"template_input", cfg.template_input},
             {"detection_input", cfg.detection_input},
             {"wz", cfg.wz},
             {"wx", cfg.wx},
             {"channels", cfg.channels},
             {"se_reduction", cfg.se_reduction},
             {"backbone", to_string(cfg.backbone)}};
}

void from_json(const json& j, ModelConfig& cfg) {
    j.at("template_input").get_to(cfg.template_input);
    j.at("detection_input").get_to(cfg.detection_input);
    j.at("wz").get_to(cfg.wz);
    j.at("wx").get_to(cfg.wx);
    j.at("channels").get_to(cfg.channels);
    j.at("se_reduction").get_to(cfg.se_reduction);
    cfg.backbone = backbone_from_string(j.at("backbone").get<std::string>());
}

std::string canonical_config_string(const ModelConfig& cfg) {
    json j = cfg;
    return j.dump();  // nlohmann objects serialize with sorted keys
}

std::string config_hash(const ModelConfig& cfg) {
    const std::string s = canonical_config_string(cfg);
    uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char ch : s) {
        h ^= ch;
        h *= 0x100000001b3ull;
    }
    char buf[19];
    std::snprintf(buf, sizeof(buf), "0x%016llx", static_cast<unsigned long long>(h));
    return buf;
}

namespace {

constexpr char kMagic[8] = {'S', 'I', 'E', 'T', 'C', 'K', 'P', '1'};

json shapes_json(const std::vector<ParamArray>& arrays) {
    json out = json::array();
    for (const auto& a : arrays) out.push_back(json{{"name", a.name}, {"shape", a.shape}});
    return out;
}

void write_arrays(std::ofstream& f, const std::vector<ParamArray>& arrays) {
    for (const auto& a : arrays) {
        f.write(reinterpret_cast<const char*>(a.v.data()),
                static_cast<std::streamsize>(a.v.size() * sizeof(double)));
    }
}

std::vector<ParamArray> read_arrays(std::ifstream& f, const json& shapes,
                                    const std::filesystem::path& path) {
    std::vector<ParamArray> out;
    for (const auto& entry : shapes) {
        ParamArray a;
        a.name = entry.at("name").get<std::string>();
        a.shape = entry.at("shape").get<std::vector<int>>();
        int64_t sz = 1;
        for (int d : a.shape) sz *= d;
        a.v.resize(static_cast<size_t>(sz));
        f.read(reinterpret_cast<char*>(a.v.data()),
               static_cast<std::streamsize>(a.v.size() * sizeof(double)));
        if (!f) {
            throw CheckpointError(path.string() + ": truncated while reading array " + a.name);
        }
        out.push_back(std::move(a));
    }
    return out;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
    json header{{"format_version", 1},
                {"config", ckpt.config},
                {"config_hash", config_hash(ckpt.config)},
                {"params", shapes_json(ckpt.weights.params)},
                {"buffers", shapes_json(ckpt.weights.buffers)},
                {"epoch", ckpt.epoch},
                {"train_seed", ckpt.train_seed}};
    if (ckpt.optimizer) {
        header["optimizer"] = json{{"kind", ckpt.optimizer->kind},
                                   {"step", ckpt.optimizer->step},
                                   {"arrays", shapes_json(ckpt.optimizer->arrays)}};
    }
    const std::string hs = header.dump();
    std::ofstream f(path, std::ios::binary);
    if (!f) throw CheckpointError("cannot open " + path.string() + " for writing");
    f.write(kMagic, sizeof(kMagic));
    const uint64_t len = hs.size();
    f.write(reinterpret_cast<const char*>(&len), sizeof(len));
    f.write(hs.data(), static_cast<std::streamsize>(hs.size()));
    write_arrays(f, ckpt.weights.params);
    write_arrays(f, ckpt.weights.buffers);
    if (ckpt.optimizer) write_arrays(f, ckpt.optimizer->arrays);
    if (!f) throw CheckpointError("write failed for " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw CheckpointError("cannot open " + path.string());
    char magic[8];
    f.read(magic, sizeof(magic));
    if (!f || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
        throw CheckpointError(path.string() + ": not a checkpoint file (bad magic)");
    }
    uint64_t len = 0;
    f.read(reinterpret_cast<char*>(&len), sizeof(len));
    if (!f || len == 0 || len > (1ull << 30)) {
        throw CheckpointError(path.string() + ": corrupt header length");
    }
    std::string hs(len, '\0');
    f.read(hs.data(), static_cast<std::streamsize>(len));
    if (!f) throw CheckpointError(path.string() + ": truncated header");
    json header;
    try {
        header = json::parse(hs);
    } catch (const json::exception& e) {
        throw CheckpointError(path.string() + ": header is not valid JSON: " + e.what());
    }
    if (header.at("format_version").get<int>() != 1) {
        throw CheckpointError(path.string() + ": unsupported format version " +
                              header.at("format_version").dump());
    }
    Checkpoint ckpt;
    header.at("config").get_to(ckpt.config);
    const std::string stored_hash = header.at("config_hash").get<std::string>();
    const std::string computed = config_hash(ckpt.config);
    if (stored_hash != computed) {
        throw CheckpointError(path.string() + ": config hash mismatch, stored " + stored_hash +
                              " but the stored config hashes to " + computed);
    }
    ckpt.weights.params = read_arrays(f, header.at("params"), path);
    ckpt.weights.buffers = read_arrays(f, header.at("buffers"), path);
    ckpt.epoch = header.value("epoch", 0);
    ckpt.train_seed = header.value("train_seed", uint64_t{0});
    if (header.contains("optimizer")) {
        OptimizerState opt;
        opt.kind = header["optimizer"].at("kind").get<std::string>();
        opt.step = header["optimizer"].at("step").get<int64_t>();
        opt.arrays = read_arrays(f, header["optimizer"].at("arrays"), path);
        ckpt.optimizer = std::move(opt);
    }
    // verify the layout matches what the config implies
    const auto expected = parameter_layout(ckpt.config);
    if (expected.size() != ckpt.weights.params.size()) {
        throw CheckpointError(path.string() + ": parameter list does not match config (expected " +
                              std::to_string(expected.size()) + " arrays, found " +
                              std::to_string(ckpt.weights.params.size()) + ")");
    }
    for (size_t i = 0; i < expected.size(); ++i) {
        if (expected[i].name != ckpt.weights.params[i].name ||
            expected[i].shape != ckpt.weights.params[i].shape) {
            throw CheckpointError(path.string() + ": parameter " + std::to_string(i) +
                                  " mismatch: expected " + expected[i].name + ", found " +
                                  ckpt.weights.params[i].name);
        }
    }
    return ckpt;
}

void serialize_weights(const std::filesystem::path& path, const ModelWeights& w,
                       const ModelConfig& cfg) {
    Checkpoint ckpt;
    ckpt.config = cfg;
    ckpt.weights = w;
    save_checkpoint(path, ckpt);
}

std::pair<ModelWeights, ModelConfig> deserialize_weights(const std::filesystem::path& path) {
    Checkpoint ckpt = load_checkpoint(path);
    return {std::move(ckpt.weights), ckpt.config};
}

}  // namespace sietrack
