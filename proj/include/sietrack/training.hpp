#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "sietrack/checkpoint.hpp"
#include "sietrack/data.hpp"
#include "sietrack/model.hpp"

namespace sietrack {

enum class Optimizer { sgd, momentum, adam };

Optimizer optimizer_from_string(const std::string& s);
std::string to_string(Optimizer o);

struct TrainConfig {
    double learning_rate = 1e-3;
    int batch_size = 80;
    int epochs = 5;
    double sigma = 1.0;           // Smooth L1 sigma
    int samples_per_epoch = 5000; // pairs regenerated each epoch
    uint64_t seed = 1;
    std::filesystem::path checkpoint_dir;  // empty: keep everything in memory
    Optimizer optimizer = Optimizer::sgd;
    double momentum = 0.9;  // used by Optimizer::momentum
    // The reference implementation is always single-threaded and
    // deterministic; the flag is part of the config surface so run configs
    // stay explicit about it.
    bool deterministic = true;

    void validate() const;
};

struct TrainHistory {
    std::vector<double> step_loss;
    std::vector<double> epoch_mean_loss;
    std::vector<double> epoch_seconds;
};

// 0.5*sigma^2*x^2 for |x| <= 1/sigma^2, |x| - 1/(2 sigma^2) beyond;
// continuous at the branch point. Throws std::invalid_argument for
// sigma <= 0.
double smooth_l1(double x, double sigma);

// Derivative wrt x: sigma^2 x on the quadratic branch, sign(x) beyond.
double smooth_l1_grad(double x, double sigma);

// Sum over the four offsets of smooth_l1(target_i - pred_i, sigma).
double offsets_loss(const RelativeOffsets& pred, const RelativeOffsets& target, double sigma);

struct TrainResult {
    ModelWeights weights;
    TrainHistory history;
};

// Offline training on GOT-style sequences: epochs x (samples_per_epoch /
// batch_size) mini-batch steps on freshly sampled pairs, checkpointing each
// epoch when checkpoint_dir is set. Deterministic in the seed. Pass a
// checkpoint to resume from its epoch with bit-identical results.
TrainResult train(const ModelConfig& model_cfg, const TrainConfig& cfg,
                  const std::vector<SequenceRecord>& dataset, const Checkpoint* resume = nullptr);

// Training restricted to a fixed pair set (overfit runs and tests); performs
// `steps` optimizer steps of batches drawn round-robin from `pairs`.
TrainResult train_on_pairs(const ModelConfig& model_cfg, const TrainConfig& cfg,
                           const std::vector<PatchPair>& pairs, int steps,
                           ModelWeights* initial = nullptr);

// Mean of offsets_loss over a pair set, inference-mode forward.
double mean_pair_loss(const ModelConfig& model_cfg, const ModelWeights& w,
                      const std::vector<PatchPair>& pairs, double sigma);

void write_history_csv(const std::filesystem::path& path, const TrainHistory& history);

struct GradientCheckGroup {
    std::string name;
    // relative error of the group's gradient vector:
    // ||analytic - numeric||_2 / max(1e-6, ||analytic||_2, ||numeric||_2)
    double rel_err = 0.0;
    double max_abs_err = 0.0;       // worst single element
    double max_elem_rel_err = 0.0;  // worst single element, relative
    double grad_norm = 0.0;
    int64_t kink_skipped = 0;  // elements whose FD window straddles a breakpoint
};

struct GradientCheckReport {
    std::vector<GradientCheckGroup> groups;
    double max_rel_err = 0.0;  // max of the per-group vector errors
    int64_t kink_skipped = 0;
    int64_t checked = 0;
};

// Central finite differences (default step 1e-4) against the analytic
// gradient of the pair loss, parameter by parameter, for freshly
// initialized weights. The per-group error compares whole gradient vectors;
// single elements whose finite-difference window straddles a ReLU or
// max-pool breakpoint are reported through max_elem_rel_err but do not
// dominate the group metric.
GradientCheckReport gradient_check(const ModelConfig& model_cfg, const PatchPair& sample,
                                   double fd_step = 1e-4, double sigma = 1.0,
                                   uint64_t weight_seed = 17);

}  // namespace sietrack
