#pragma once

// Internal layer kernels: batched NHWC forward/backward passes used by the
// public model operations and the training loop. Convolution and dense
// layers run their inner products through Eigen GEMM; everything else is
// explicit loops.

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "sietrack/tensor.hpp"

namespace sietrack::net {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct ConvSpec {
    int k = 3;
    int stride = 1;
    int pad = 0;
    int in_c = 1;
    int out_c = 1;

    int out_size(int in) const { return (in + 2 * pad - k) / stride + 1; }
    int64_t weight_size() const { return static_cast<int64_t>(k) * k * in_c * out_c; }
};

// Kernel layout: w[((ky*k + kx)*in_c + ci)*out_c + co], i.e. a
// (k*k*in_c) x out_c row-major matrix matching the im2col patch layout.
struct ConvCache {
    Tensor x;  // layer input, retained so backward can rebuild patches
};

Tensor conv2d_forward(const Tensor& x, const ConvSpec& s, const std::vector<double>& w,
                      const std::vector<double>& b, ConvCache* cache);

// Returns dx; accumulates into dw/db.
Tensor conv2d_backward(const Tensor& dy, const ConvSpec& s, const std::vector<double>& w,
                       const ConvCache& cache, std::vector<double>& dw, std::vector<double>& db);

struct BnCache {
    Tensor xhat;
    std::vector<double> inv_std;  // per channel
};

inline constexpr double kBnEps = 1e-5;
inline constexpr double kBnMomentum = 0.1;

// Training mode: normalizes with the current batch statistics (over
// n*h*w per channel, biased variance); optionally folds them into the
// running stats with momentum 0.1.
Tensor bn_forward_train(const Tensor& x, const std::vector<double>& gamma,
                        const std::vector<double>& beta, std::vector<double>& running_mean,
                        std::vector<double>& running_var, bool update_running, BnCache* cache);

Tensor bn_forward_eval(const Tensor& x, const std::vector<double>& gamma,
                       const std::vector<double>& beta, const std::vector<double>& running_mean,
                       const std::vector<double>& running_var);

Tensor bn_backward(const Tensor& dy, const std::vector<double>& gamma, const BnCache& cache,
                   std::vector<double>& dgamma, std::vector<double>& dbeta);

struct ReluCache {
    std::vector<char> pos;
};

Tensor relu_forward(const Tensor& x, ReluCache* cache);
Tensor relu_backward(const Tensor& dy, const ReluCache& cache);

// 2x2 max pooling with stride 2, no padding. Ties resolve to the first
// element in scan order so backward routing is deterministic.
struct PoolCache {
    std::vector<int32_t> argmax;  // flat index into the input tensor
    int in_h = 0, in_w = 0;
};

Tensor maxpool2_forward(const Tensor& x, PoolCache* cache);
Tensor maxpool2_backward(const Tensor& dy, const PoolCache& cache, int c);

// Dense weights: w[i*out + o] for an (in x out) matrix; y = x*W + b.
struct DenseCache {
    RowMat x;
};

RowMat dense_forward(const RowMat& x, int in, int out, const std::vector<double>& w,
                     const std::vector<double>& b, DenseCache* cache);
RowMat dense_backward(const RowMat& dy, int in, int out, const std::vector<double>& w,
                      const DenseCache& cache, std::vector<double>& dw, std::vector<double>& db);

// Squeeze-excitation over NHWC: per-sample global average pool, a c -> mid
// -> c bottleneck (ReLU, then sigmoid), per-channel rescale of the input.
struct SeCache {
    Tensor x;
    RowMat z;  // n x c pooled
    RowMat a;  // n x mid, post-ReLU
    RowMat s;  // n x c gate
};

Tensor se_forward(const Tensor& x, int mid, const std::vector<double>& w1,
                  const std::vector<double>& b1, const std::vector<double>& w2,
                  const std::vector<double>& b2, SeCache* cache);

// Gate vectors only (n x c), each entry strictly inside (0, 1).
RowMat se_gate_batch(const Tensor& x, int mid, const std::vector<double>& w1,
                     const std::vector<double>& b1, const std::vector<double>& w2,
                     const std::vector<double>& b2);

Tensor se_backward(const Tensor& dy, int mid, const std::vector<double>& w1,
                   const std::vector<double>& w2, const SeCache& cache, std::vector<double>& dw1,
                   std::vector<double>& db1, std::vector<double>& dw2, std::vector<double>& db2);

// Per-channel valid cross-correlation of each sample's detection map with
// its own template map. fx: (n, hx, wx, c), fz: (n, hz, wz, c); output
// (n, hx-hz+1, wx-wz+1, c).
Tensor correlate_forward(const Tensor& fx, const Tensor& fz);

void correlate_backward(const Tensor& dy, const Tensor& fx, const Tensor& fz, Tensor& dfx,
                        Tensor& dfz);

}  // namespace sietrack::net
