#include "sietrack/serialize.hpp"

namespace sietrack {

using nlohmann::json;

// ModelConfig conversions live in checkpoint.cpp next to the hash.

void to_json(json& j, const TrainConfig& cfg) {
    j = json{{"learning_rate", cfg.learning_rate},
             {"batch_size", cfg.batch_size},
             {"epochs", cfg.epochs},
             {"sigma", cfg.sigma},
             {"samples_per_epoch", cfg.samples_per_epoch},
             {"seed", cfg.seed},
             {"checkpoint_dir", cfg.checkpoint_dir.string()},
             {"optimizer", to_string(cfg.optimizer)},
             {"momentum", cfg.momentum},
             {"deterministic", cfg.deterministic}};
}

void from_json(const json& j, TrainConfig& cfg) {
    cfg.learning_rate = j.value("learning_rate", cfg.learning_rate);
    cfg.batch_size = j.value("batch_size", cfg.batch_size);
    cfg.epochs = j.value("epochs", cfg.epochs);
    cfg.sigma = j.value("sigma", cfg.sigma);
    cfg.samples_per_epoch = j.value("samples_per_epoch", cfg.samples_per_epoch);
    cfg.seed = j.value("seed", cfg.seed);
    if (j.contains("checkpoint_dir")) {
        cfg.checkpoint_dir = j.at("checkpoint_dir").get<std::string>();
    }
    if (j.contains("optimizer")) {
        cfg.optimizer = optimizer_from_string(j.at("optimizer").get<std::string>());
    }
    cfg.momentum = j.value("momentum", cfg.momentum);
    cfg.deterministic = j.value("deterministic", cfg.deterministic);
}

void to_json(json& j, const SynthConfig& cfg) {
    j = json{{"frame_w", cfg.frame_w},
             {"frame_h", cfg.frame_h},
             {"min_object", cfg.min_object},
             {"max_object", cfg.max_object},
             {"min_speed", cfg.min_speed},
             {"max_speed", cfg.max_speed},
             {"color", {cfg.color[0], cfg.color[1], cfg.color[2]}},
             {"noise_sigma", cfg.noise_sigma},
             {"background_level", cfg.background_level},
             {"background_sigma", cfg.background_sigma},
             {"length", cfg.length},
             {"seed", cfg.seed}};
}

void from_json(const json& j, SynthConfig& cfg) {
    cfg.frame_w = j.value("frame_w", cfg.frame_w);
    cfg.frame_h = j.value("frame_h", cfg.frame_h);
    cfg.min_object = j.value("min_object", cfg.min_object);
    cfg.max_object = j.value("max_object", cfg.max_object);
    cfg.min_speed = j.value("min_speed", cfg.min_speed);
    cfg.max_speed = j.value("max_speed", cfg.max_speed);
    if (j.contains("color")) {
        const auto c = j.at("color").get<std::vector<double>>();
        for (size_t i = 0; i < 3 && i < c.size(); ++i) cfg.color[i] = c[i];
    }
    cfg.noise_sigma = j.value("noise_sigma", cfg.noise_sigma);
    cfg.background_level = j.value("background_level", cfg.background_level);
    cfg.background_sigma = j.value("background_sigma", cfg.background_sigma);
    cfg.length = j.value("length", cfg.length);
    cfg.seed = j.value("seed", cfg.seed);
}

}  // namespace sietrack
