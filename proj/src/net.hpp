#pragma once

// Internal network assembly shared by the public model operations and the
// training loop: layer specs derived from ModelConfig, the parameter naming
// scheme, and batched forward/backward over (template, detection) pairs.

#include <string>
#include <vector>

#include "net_layers.hpp"
#include "sietrack/model.hpp"

namespace sietrack::net {

inline constexpr int kNumBlocks = 5;

struct LayerSpecs {
    ConvSpec conv[kNumBlocks];
    bool pool_after[kNumBlocks] = {true, true, false, false, false};
    int channels = 0;      // c
    int se_mid = 0;        // c / r
    int corr = 0;          // wx - wz + 1
    int fc_in = 0;         // corr^2

    // Spatial size after the whole stack for a given input side length.
    int output_size(int in) const;
};

LayerSpecs make_specs(const ModelConfig& cfg);

// Gradient accumulator mirroring parameter_layout(cfg).
struct GradSet {
    std::vector<ParamArray> arrays;

    ParamArray& at(const std::string& name);
    void zero();
};

GradSet make_grads(const ModelConfig& cfg);

enum class Phase { eval, train };

// The backbone weights are shared between the branches, but each branch
// keeps its own batch-norm running statistics: template batches (tight
// object crops) and detection batches (mostly context) have very different
// activation statistics, and training normalizes each branch by its own
// batch stats.
enum class Branch { tmpl, det };

const char* branch_suffix(Branch b);

struct BranchCache {
    ConvCache conv[kNumBlocks];
    BnCache bn[kNumBlocks];
    ReluCache relu[kNumBlocks];
    PoolCache pool[kNumBlocks];  // used where pool_after is set
};

// Runs the 5-block backbone. In train phase batch-norm uses batch
// statistics (and, when update_running is set, folds them into the running
// buffers, which mutates `w`). In eval phase `w` is untouched.
Tensor backbone_forward(const Tensor& x, ModelWeights& w, const LayerSpecs& ls, Branch branch,
                        Phase phase, bool update_running, BranchCache* cache);
Tensor backbone_forward_eval(const Tensor& x, const ModelWeights& w, const LayerSpecs& ls,
                             Branch branch);

Tensor backbone_backward(const Tensor& df, const ModelWeights& w, const LayerSpecs& ls,
                         const BranchCache& cache, GradSet& g);

// SE layer bound to the named parameters.
Tensor se_layer_forward(const Tensor& x, const ModelWeights& w, const LayerSpecs& ls,
                        SeCache* cache);
Tensor se_layer_backward(const Tensor& dy, const ModelWeights& w, const LayerSpecs& ls,
                         const SeCache& cache, GradSet& g);

// Regression head: 1x1 conv to a single channel, flatten, dense to 4.
struct HeadCache {
    ConvCache conv;
    DenseCache fc;
};

RowMat head_forward(const Tensor& corr, const ModelWeights& w, const LayerSpecs& ls,
                    HeadCache* cache);
Tensor head_backward(const RowMat& dpred, const ModelWeights& w, const LayerSpecs& ls,
                     const HeadCache& cache, GradSet& g);

struct PairCache {
    BranchCache det, tmpl;
    SeCache se_det, se_tmpl;
    Tensor fx, fz;  // post-SE feature maps
    HeadCache head;
};

// Full pair pipeline; returns the n x 4 predicted offsets.
RowMat pair_forward(const Tensor& tmpl_batch, const Tensor& det_batch, ModelWeights& w,
                    const LayerSpecs& ls, Phase phase, bool update_running, PairCache* cache);

// Backpropagates d(loss)/d(pred) through the whole pair pipeline,
// accumulating into g. Template and detection branches share the backbone
// and SE parameters, so both contribute to the same arrays.
void pair_backward(const RowMat& dpred, const ModelWeights& w, const LayerSpecs& ls,
                   const PairCache& cache, GradSet& g);

}  // namespace sietrack::net
