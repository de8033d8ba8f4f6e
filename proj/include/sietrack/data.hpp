#pragma once

#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "sietrack/geometry.hpp"
#include "sietrack/rng.hpp"
#include "sietrack/tensor.hpp"

namespace sietrack {

// Reference to one frame: either an image file on disk (decoded on demand)
// or an in-memory tensor (synthetic sequences, fixtures).
struct FrameRef {
    std::filesystem::path path;
    std::shared_ptr<const Image> mem;

    Image load() const;

    static FrameRef from_path(std::filesystem::path p) { return FrameRef{std::move(p), nullptr}; }
    static FrameRef from_image(Image img) {
        return FrameRef{{}, std::make_shared<const Image>(std::move(img))};
    }
};

// One annotated sequence: frames, per-frame target boxes (corner form) and
// per-frame visibility flags, all the same length.
struct SequenceRecord {
    std::string name;
    std::vector<FrameRef> frames;
    std::vector<BoundingBox> annotations;
    std::vector<bool> visibility;

    int size() const { return static_cast<int>(frames.size()); }
    Image frame(int i) const { return frames[static_cast<size_t>(i)].load(); }
    PatchSize frame_size(int i) const;
};

// One training sample: the exact-bbox template crop, the randomized
// detection crop, the encoded label, and where it came from.
struct PatchPair {
    Image template_patch;   // template_size x template_size x 3
    Image detection_patch;  // detection_size x detection_size x 3
    RelativeOffsets label;

    std::string sequence;
    int template_frame = 0;
    int detection_frame = 0;
    BoundingBox crop_region;  // detection crop in frame coordinates
};

// Loads a GOT-style directory tree: <root>/<sequence>/{frame images...},
// groundtruth.txt with one "x,y,w,h" line per frame, optional absence.label
// with one 0/1 line per frame (1 = target absent). Frames decode lazily.
// Throws ParseError (file+line) on malformed annotations and
// StructuralError on count mismatches or sequences shorter than 2 frames.
std::vector<SequenceRecord> load_got_style(const std::filesystem::path& root);

// Loads a single sequence directory (same layout as one entry above).
SequenceRecord load_sequence_dir(const std::filesystem::path& dir);

// Bilinear crop-resample: maps the region onto an out_w x out_h grid through
// output pixel centers. Throws std::invalid_argument on a non-positive
// region.
Image crop_and_resize(const Image& frame, const BoundingBox& region, int out_w, int out_h);

// Draws one training pair from a sequence: random frame pair with interval
// 1..100 (re-drawn while it overruns the sequence or hits an invisible
// frame), exact-bbox template crop, randomized detection crop whose edges
// are drawn between the target box and one of three margin rules, and the
// encoded label. At most 100 attempts; then UnsampleableSequenceError.
PatchPair sample_pair(const SequenceRecord& seq, Rng& rng, int template_size = 125,
                      int detection_size = 239);

// Margin rules for the detection-crop edges: the full-margin rule, the rule
// with the horizontal margin halved, and the rule with the vertical margin
// halved. Exposed for tests.
struct CropBounds {
    double left_lo, top_lo, right_hi, bottom_hi;
};
CropBounds detection_crop_bounds(const BoundingBox& target, const PatchSize& frame, int rule);

// Synthetic sequence: a solid-color rectangle (plus per-pixel noise) moving
// at constant velocity over a static textured background, reflecting off the
// frame edges. Fully determined by the seed; all pixels lie on the 8-bit
// grid so a PNG export reloads bit-exactly.
struct SynthConfig {
    int frame_w = 320;
    int frame_h = 240;
    int min_object = 24;  // object side range, px
    int max_object = 48;
    double min_speed = 1.0;  // per-axis speed range, px/frame
    double max_speed = 3.0;
    double color[3] = {0.9, 0.75, 0.2};  // object fill, RGB in [0,1]
    double noise_sigma = 0.02;           // object pixel noise
    double background_level = 0.35;      // background base intensity
    double background_sigma = 0.08;      // background texture amplitude
    int length = 60;
    uint64_t seed = 1;
};

SequenceRecord synth_sequence(const SynthConfig& cfg);

// Writes a sequence in the GOT-style layout (PNG frames, groundtruth.txt,
// absence.label only when some frame is invisible).
void export_got_style(const SequenceRecord& seq, const std::filesystem::path& dir);

}  // namespace sietrack
