#pragma once

#include <filesystem>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "sietrack/data.hpp"
#include "sietrack/geometry.hpp"
#include "sietrack/model.hpp"

namespace sietrack {

struct Curve {
    std::vector<double> thresholds;
    std::vector<double> values;
};

struct OnePassResult {
    Curve success;    // 101 IoU thresholds on [0, 1]; fraction with IoU > tau
    double auc = 0.0; // mean of the success values
    Curve precision;  // 51 center-error thresholds 0..50 px; fraction <= rho
    double precision_at_20 = 0.0;
};

// One-pass (no reinitialization) curves from per-frame outputs vs ground
// truth. Throws StructuralError on a length mismatch.
OnePassResult evaluate_one_pass(const std::vector<BoundingBox>& outputs,
                                const std::vector<BoundingBox>& groundtruth);

// Minimal tracker interface the reset protocol drives; lets tests script
// arbitrary behaviors.
class SequenceTracker {
public:
    virtual ~SequenceTracker() = default;
    virtual void init(const Image& frame, const BoundingBox& box) = 0;
    virtual BoundingBox step(const Image& frame) = 0;
};

using TrackerFactory = std::function<std::unique_ptr<SequenceTracker>()>;

// Adapter running the real model through the SequenceTracker interface.
TrackerFactory model_tracker_factory(std::shared_ptr<const ModelWeights> weights, ModelConfig cfg,
                                     double delta);

struct ResetResult {
    double mean_iou = 0.0;  // over evaluated frames (failures and skip window excluded)
    int failures = 0;       // frames with IoU == 0
    int evaluated_frames = 0;
};

// Reset protocol: a failure is a frame with IoU == 0 against ground truth;
// the tracker re-initializes from ground truth reset_skip frames later, and
// the failure frame plus the skip window are excluded from the mean.
ResetResult evaluate_with_reset(const TrackerFactory& factory, const SequenceRecord& seq,
                                int reset_skip = 5);

struct FpsReport {
    double fps = 0.0;  // median over reps
    std::vector<double> per_rep;
    int timed_frames = 0;
    std::string hardware;
};

// Frames are preloaded before timing; init and the first `warmup` updates
// are excluded; single-threaded. fps = timed frames / wall-clock, median
// over reps.
FpsReport benchmark_fps(const TrackerFactory& factory, const SequenceRecord& seq, int warmup,
                        int reps);
FpsReport benchmark_fps(const ModelWeights& weights, const ModelConfig& cfg,
                        const SequenceRecord& seq, int warmup, int reps, double delta = 0.5);

struct ModelSizeReport {
    int64_t parameters = 0;
    int64_t checkpoint_bytes = 0;
};

// Parameter count plus the serialized checkpoint size measured on disk.
ModelSizeReport report_model_size(const ModelWeights& weights, const ModelConfig& cfg);

std::string hardware_descriptor();

void write_curve_csv(const std::filesystem::path& path, const Curve& curve);

// Line plot of one or more curves rendered to a PNG.
struct PlotSeries {
    std::string label;
    const Curve* curve;
};
void render_curve_plot(const std::filesystem::path& path, const std::string& title,
                       const std::string& x_label, const std::vector<PlotSeries>& series);

}  // namespace sietrack
