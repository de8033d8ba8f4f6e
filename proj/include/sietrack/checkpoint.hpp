#pragma once

#include <filesystem>
#include <optional>
#include <string>

#include "sietrack/model.hpp"

namespace sietrack {

// Optimizer state stored alongside the weights so a training run can resume
// bit-exactly. Empty for plain SGD.
struct OptimizerState {
    std::string kind = "sgd";
    int64_t step = 0;
    std::vector<ParamArray> arrays;
};

struct Checkpoint {
    ModelConfig config;
    ModelWeights weights;
    std::optional<OptimizerState> optimizer;
    int epoch = 0;
    uint64_t train_seed = 0;
};

// Hex FNV-1a hash of the canonical config serialization; stored in the
// checkpoint header and compared on load.
std::string config_hash(const ModelConfig& cfg);

// Container layout (little-endian): 8-byte magic "SIETCKP1", u64 JSON header
// length, the JSON header (format version, config, config hash, named array
// shapes), then each array's float64 data in declaration order (params,
// buffers, optimizer arrays).
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);

// Throws CheckpointError on a bad magic, truncated file, or a config hash
// that does not match the stored config.
Checkpoint load_checkpoint(const std::filesystem::path& path);

// Convenience helpers for the weight-only case.
void serialize_weights(const std::filesystem::path& path, const ModelWeights& w,
                       const ModelConfig& cfg);
std::pair<ModelWeights, ModelConfig> deserialize_weights(const std::filesystem::path& path);

}  // namespace sietrack
