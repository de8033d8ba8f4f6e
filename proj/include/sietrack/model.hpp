#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sietrack/geometry.hpp"
#include "sietrack/rng.hpp"
#include "sietrack/tensor.hpp"

namespace sietrack {

enum class Backbone {
    compact5,   // default: stage widths {c/8, c/4, c/2, c, c}
    compact5w,  // wider variant: stage widths {c/4, c/2, c, c, c}
};

Backbone backbone_from_string(const std::string& id);
std::string to_string(Backbone b);

// Network hyperparameters. The default values give the canonical geometry:
// a 125x125 template maps to a 7x7xc feature map, a 239x239 detection patch
// to 15x15xc, and their per-channel correlation to 9x9xc.
//
// Backbone stack (applies to both branches, shared parameters; all blocks
// are conv + batch norm + ReLU):
//
//   block | kernel | stride | pad | width (compact5) | followed by
//   ------+--------+--------+-----+------------------+----------------
//     1   |   5    |   2    |  0  |       c/8        | maxpool 2x2/s2
//     2   |   3    |   2    |  1  |       c/4        | maxpool 2x2/s2
//     3   |   3    |   1    |  1  |       c/2        |
//     4   |   3    |   1    |  1  |        c         |
//     5   |   3    |   1    |  1  |        c         |
//
// Spatial sizes: 239 ->(conv1) 118 ->(pool) 59 ->(conv2) 30 ->(pool) 15,
// then unchanged through blocks 3-5; likewise 125 -> 61 -> 30 -> 15 -> 7.
// The desk-scale config (below) feeds 111/47 inputs to get 7/3 outputs from
// the same stack.
struct ModelConfig {
    int template_input = 125;
    int detection_input = 239;
    int wz = 7;
    int wx = 15;
    int channels = 64;      // c; must be divisible by 8 and by se_reduction
    int se_reduction = 4;   // r
    Backbone backbone = Backbone::compact5;

    // Throws std::invalid_argument when the invariants do not hold or the
    // stack does not map the input sizes onto wz/wx exactly.
    void validate() const;

    // Correlation map side length (wx - wz + 1).
    int corr_size() const { return wx - wz + 1; }

    // Small config for finite-difference checks: c=8, wx=7, wz=3.
    static ModelConfig desk_scale();

    bool operator==(const ModelConfig&) const = default;
};

// One named parameter (or state) array with its logical shape.
struct ParamArray {
    std::string name;
    std::vector<int> shape;
    std::vector<double> v;

    int64_t size() const { return static_cast<int64_t>(v.size()); }
};

// All state of one model. `params` are the trainable arrays in a fixed
// declaration order (the deterministic flattening order used by the
// checkpoint format and the optimizers); `buffers` hold the batch-norm
// running statistics.
struct ModelWeights {
    std::vector<ParamArray> params;
    std::vector<ParamArray> buffers;

    ParamArray& param(const std::string& name);
    const ParamArray& param(const std::string& name) const;
    ParamArray& buffer(const std::string& name);
    const ParamArray& buffer(const std::string& name) const;

    int64_t parameter_count() const;
    bool all_finite() const;
};

// Names and shapes of every trainable parameter, in flattening order.
std::vector<ParamArray> parameter_layout(const ModelConfig& cfg);

// Trainable parameter count; a pure function of the config.
int64_t parameter_count(const ModelConfig& cfg);

// Fresh weights: truncated-Gaussian (std 0.01) conv/fc kernels, zero biases,
// batch-norm scale 1 / shift 0, running stats (0, 1). Deterministic in seed.
ModelWeights init_weights(const ModelConfig& cfg, uint64_t seed);

// Backbone features for one image (n == 1, RGB in [0, 1]). The spatial size
// must equal template_input or detection_input; the output is wz x wz x c or
// wx x wx x c accordingly. Batch-norm runs in inference mode. Throws
// ShapeError naming expected vs actual sizes.
FeatureMap extract_features(const Image& image, const ModelWeights& w, const ModelConfig& cfg);

// Squeeze-excitation recalibration: output[i,j,k] = f[i,j,k] * s[k] with
// s = sigmoid(W2 relu(W1 avgpool(f))). Output shape equals input shape.
FeatureMap se_recalibrate(const FeatureMap& f, const ModelWeights& w, const ModelConfig& cfg);

// The gate vector s for a feature map (c values, each strictly in (0, 1)).
std::vector<double> se_gate(const FeatureMap& f, const ModelWeights& w, const ModelConfig& cfg);

// Applies a caller-supplied gate; the production path is
// se_apply_gate(f, se_gate(f, ...)). Exposed as a hook for tests.
FeatureMap se_apply_gate(const FeatureMap& f, const std::vector<double>& gate);

// Per-channel valid cross-correlation (sliding inner product, no kernel
// flip) of f_x with f_z. Output is (wx-wz+1) x (wx-wz+1) x c. Throws
// ShapeError on channel mismatch or a template larger than the detection map.
FeatureMap channelwise_correlate(const FeatureMap& f_x, const FeatureMap& f_z);

// Regression head: 1x1 convolution collapsing c channels to one m x m map,
// flattened and mapped by one fully-connected layer to [O1..O4].
RelativeOffsets regress(const FeatureMap& corr, const ModelWeights& w, const ModelConfig& cfg);

// Full pipeline: regress(correlate(se(extract(detection)), se(extract(template)))).
RelativeOffsets forward(const Image& template_patch, const Image& detection_patch,
                        const ModelWeights& w, const ModelConfig& cfg);

// Template-branch features ready for correlation (extract + SE), the part a
// tracker caches once per track.
FeatureMap template_features(const Image& template_patch, const ModelWeights& w,
                             const ModelConfig& cfg);

// Detection-branch forward against cached template features.
RelativeOffsets forward_with_template(const FeatureMap& cached_template,
                                      const Image& detection_patch, const ModelWeights& w,
                                      const ModelConfig& cfg);

}  // namespace sietrack
