#include "sietrack/evaluation.hpp"

#include <unistd.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "sietrack/checkpoint.hpp"
#include "sietrack/errors.hpp"
#include "sietrack/tracking.hpp"

namespace sietrack {

OnePassResult evaluate_one_pass(const std::vector<BoundingBox>& outputs,
                                const std::vector<BoundingBox>& groundtruth) {
    if (outputs.size() != groundtruth.size()) {
        throw StructuralError("evaluate_one_pass: " + std::to_string(outputs.size()) +
                              " outputs vs " + std::to_string(groundtruth.size()) +
                              " ground-truth boxes");
    }
    if (outputs.empty()) {
        throw StructuralError("evaluate_one_pass: empty input");
    }
    const size_t n = outputs.size();
    std::vector<double> ious(n), dists(n);
    for (size_t i = 0; i < n; ++i) {
        ious[i] = iou(outputs[i], groundtruth[i]);
        const double dx = outputs[i].center_x() - groundtruth[i].center_x();
        const double dy = outputs[i].center_y() - groundtruth[i].center_y();
        dists[i] = std::sqrt(dx * dx + dy * dy);
    }

    OnePassResult result;
    for (int t = 0; t <= 100; ++t) {
        const double tau = t / 100.0;
        int hits = 0;
        for (double v : ious) hits += v > tau ? 1 : 0;  // strict inequality
        result.success.thresholds.push_back(tau);
        result.success.values.push_back(static_cast<double>(hits) / n);
        result.auc += static_cast<double>(hits) / n;
    }
    result.auc /= 101.0;
    for (int r = 0; r <= 50; ++r) {
        int hits = 0;
        for (double d : dists) hits += d <= r ? 1 : 0;
        result.precision.thresholds.push_back(r);
        result.precision.values.push_back(static_cast<double>(hits) / n);
        if (r == 20) result.precision_at_20 = static_cast<double>(hits) / n;
    }
    return result;
}

namespace {

class ModelSequenceTracker : public SequenceTracker {
public:
    ModelSequenceTracker(std::shared_ptr<const ModelWeights> weights, ModelConfig cfg,
                         double delta)
        : tracker_(std::move(weights), std::move(cfg), delta) {}

    void init(const Image& frame, const BoundingBox& box) override { tracker_.init(frame, box); }
    BoundingBox step(const Image& frame) override { return tracker_.update(frame); }

private:
    Tracker tracker_;
};

}  // namespace

TrackerFactory model_tracker_factory(std::shared_ptr<const ModelWeights> weights, ModelConfig cfg,
                                     double delta) {
    return [weights, cfg, delta]() {
        return std::make_unique<ModelSequenceTracker>(weights, cfg, delta);
    };
}

ResetResult evaluate_with_reset(const TrackerFactory& factory, const SequenceRecord& seq,
                                int reset_skip) {
    if (reset_skip < 1) throw std::invalid_argument("evaluate_with_reset: reset_skip must be >= 1");
    ResetResult result;
    double sum = 0.0;
    const int n = seq.size();
    int start = 0;
    while (start < n - 1) {
        auto tracker = factory();
        tracker->init(seq.frame(start), seq.annotations[static_cast<size_t>(start)]);
        int failed_at = -1;
        for (int t = start + 1; t < n; ++t) {
            BoundingBox box;
            try {
                box = tracker->step(seq.frame(t));
            } catch (const LostTargetError&) {
                box = BoundingBox{};  // counts as IoU 0
            } catch (const TrackingFailureError&) {
                box = BoundingBox{};
            }
            const double v = iou(box, seq.annotations[static_cast<size_t>(t)]);
            if (v == 0.0) {
                ++result.failures;
                failed_at = t;
                break;
            }
            sum += v;
            ++result.evaluated_frames;
        }
        if (failed_at < 0) break;
        start = failed_at + reset_skip;  // the skip window is excluded
    }
    result.mean_iou = result.evaluated_frames > 0 ? sum / result.evaluated_frames : 0.0;
    return result;
}

std::string hardware_descriptor() {
    std::ifstream f("/proc/cpuinfo");
    std::string line;
    while (std::getline(f, line)) {
        if (line.rfind("model name", 0) == 0) {
            const auto colon = line.find(':');
            if (colon != std::string::npos) {
                std::string name = line.substr(colon + 1);
                const auto b = name.find_first_not_of(' ');
                return (b == std::string::npos ? name : name.substr(b)) + " (1 thread)";
            }
        }
    }
    return "unknown CPU (1 thread)";
}

FpsReport benchmark_fps(const TrackerFactory& factory, const SequenceRecord& seq, int warmup,
                        int reps) {
    const int n = seq.size();
    if (n - 1 - warmup < 1) {
        throw std::invalid_argument("benchmark_fps: sequence too short for warmup " +
                                    std::to_string(warmup));
    }
    if (reps < 1) throw std::invalid_argument("benchmark_fps: reps must be >= 1");

    // preload so decoding never lands inside the timed window
    std::vector<Image> frames;
    frames.reserve(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) frames.push_back(seq.frame(i));

    FpsReport report;
    report.timed_frames = n - 1 - warmup;
    report.hardware = hardware_descriptor();
    for (int rep = 0; rep < reps; ++rep) {
        auto tracker = factory();
        tracker->init(frames[0], seq.annotations.front());
        for (int t = 1; t <= warmup; ++t) tracker->step(frames[static_cast<size_t>(t)]);
        const auto t0 = std::chrono::steady_clock::now();
        for (int t = warmup + 1; t < n; ++t) tracker->step(frames[static_cast<size_t>(t)]);
        const double secs =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        report.per_rep.push_back(report.timed_frames / std::max(secs, 1e-12));
    }
    std::vector<double> sorted = report.per_rep;
    std::sort(sorted.begin(), sorted.end());
    const size_t mid = sorted.size() / 2;
    report.fps = sorted.size() % 2 == 1 ? sorted[mid] : 0.5 * (sorted[mid - 1] + sorted[mid]);
    return report;
}

FpsReport benchmark_fps(const ModelWeights& weights, const ModelConfig& cfg,
                        const SequenceRecord& seq, int warmup, int reps, double delta) {
    auto shared = std::make_shared<const ModelWeights>(weights);
    return benchmark_fps(model_tracker_factory(shared, cfg, delta), seq, warmup, reps);
}

ModelSizeReport report_model_size(const ModelWeights& weights, const ModelConfig& cfg) {
    ModelSizeReport report;
    report.parameters = parameter_count(cfg);
    const auto tmp = std::filesystem::temp_directory_path() /
                     ("sietrack-size-" + std::to_string(::getpid()) + ".ckpt");
    serialize_weights(tmp, weights, cfg);
    report.checkpoint_bytes = static_cast<int64_t>(std::filesystem::file_size(tmp));
    std::filesystem::remove(tmp);
    return report;
}

void write_curve_csv(const std::filesystem::path& path, const Curve& curve) {
    std::ofstream f(path);
    if (!f) throw std::runtime_error("cannot write " + path.string());
    f << "threshold,value\n";
    for (size_t i = 0; i < curve.thresholds.size(); ++i) {
        f << curve.thresholds[i] << ',' << curve.values[i] << '\n';
    }
}

}  // namespace sietrack
