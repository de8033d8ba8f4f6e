#pragma once

#include <filesystem>
#include <memory>
#include <vector>

#include "sietrack/data.hpp"
#include "sietrack/geometry.hpp"
#include "sietrack/model.hpp"

namespace sietrack {

struct TrackerState {
    Ltwh target;                    // [left*, top*, width*, height*] in frame px
    FeatureMap template_features;   // wz x wz x c, fixed for the whole track
    double delta = 0.5;             // search margin
    int frame_index = 0;
};

// Search area around the previous box: each side extended by delta times the
// box extent, clamped to the frame. Throws LostTargetError when the previous
// box no longer intersects the frame.
BoundingBox search_region(const TrackerState& state, const PatchSize& frame_size);

// Single-target tracker over immutable weights. init crops the first-frame
// box, computes the template features once and keeps them; update crops the
// search region, runs the detection branch against the cached template,
// decodes against the crop's true size and translates back to frame
// coordinates.
class Tracker {
public:
    Tracker(std::shared_ptr<const ModelWeights> weights, ModelConfig cfg, double delta = 0.5);

    // Throws std::invalid_argument for a degenerate box or one that misses
    // the frame entirely.
    void init(const Image& frame, const BoundingBox& box);

    // Returns the target box in frame coordinates and advances the state.
    // Throws LostTargetError / TrackingFailureError; the state keeps the
    // last good box in both cases.
    BoundingBox update(const Image& frame);

    const TrackerState& state() const { return state_; }
    bool initialized() const { return initialized_; }

private:
    std::shared_ptr<const ModelWeights> weights_;
    ModelConfig cfg_;
    double delta_;
    TrackerState state_;
    bool initialized_ = false;
};

struct TrackedFrame {
    int frame_index = 0;
    BoundingBox box;
    bool ok = true;
};

// Tracks a whole sequence from its first-frame annotation: one box per
// frame, frame 0 reporting the init box. A mid-sequence failure is recorded
// with ok=false (box = last good box) and tracking continues without
// re-initialization.
std::vector<TrackedFrame> track_sequence(const SequenceRecord& seq, const ModelWeights& weights,
                                         const ModelConfig& cfg, double delta = 0.5);

// CSV rows: frame_idx,x1,y1,x2,y2,status with status ok|failed.
void write_track_csv(const std::filesystem::path& path, const std::vector<TrackedFrame>& track);
std::vector<TrackedFrame> read_track_csv(const std::filesystem::path& path);

// Writes each frame with the output box drawn, for visual inspection.
void dump_annotated_frames(const SequenceRecord& seq, const std::vector<TrackedFrame>& track,
                           const std::filesystem::path& dir);

}  // namespace sietrack
