#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace sietrack {

// Dense NHWC array of doubles. n is the batch dimension; single images and
// feature maps use n == 1. Index layout: ((b*h + y)*w + x)*c + k.
class Tensor {
public:
    Tensor() = default;
    Tensor(int h, int w, int c) : Tensor(1, h, w, c) {}
    Tensor(int n, int h, int w, int c)
        : n_(n), h_(h), w_(w), c_(c), v_(static_cast<size_t>(n) * h * w * c, 0.0) {}

    int n() const { return n_; }
    int h() const { return h_; }
    int w() const { return w_; }
    int c() const { return c_; }
    size_t size() const { return v_.size(); }
    bool empty() const { return v_.empty(); }

    double& at(int y, int x, int k) { return v_[idx(0, y, x, k)]; }
    double at(int y, int x, int k) const { return v_[idx(0, y, x, k)]; }
    double& at(int b, int y, int x, int k) { return v_[idx(b, y, x, k)]; }
    double at(int b, int y, int x, int k) const { return v_[idx(b, y, x, k)]; }

    double* data() { return v_.data(); }
    const double* data() const { return v_.data(); }
    std::vector<double>& values() { return v_; }
    const std::vector<double>& values() const { return v_; }

    // Pointer to the start of sample b.
    double* sample(int b) { return v_.data() + static_cast<size_t>(b) * h_ * w_ * c_; }
    const double* sample(int b) const { return v_.data() + static_cast<size_t>(b) * h_ * w_ * c_; }
    size_t sample_size() const { return static_cast<size_t>(h_) * w_ * c_; }

    void fill(double value) { v_.assign(v_.size(), value); }

    bool same_shape(const Tensor& o) const {
        return n_ == o.n_ && h_ == o.h_ && w_ == o.w_ && c_ == o.c_;
    }

    std::string shape_str() const {
        return std::to_string(n_) + "x" + std::to_string(h_) + "x" + std::to_string(w_) + "x" +
               std::to_string(c_);
    }

    bool operator==(const Tensor& o) const {
        return same_shape(o) && v_ == o.v_;
    }

    // Copies sample b into a fresh n == 1 tensor.
    Tensor slice(int b) const {
        Tensor out(1, h_, w_, c_);
        const double* src = sample(b);
        std::copy(src, src + sample_size(), out.data());
        return out;
    }

    bool all_finite() const;

private:
    size_t idx(int b, int y, int x, int k) const {
        return ((static_cast<size_t>(b) * h_ + y) * w_ + x) * c_ + k;
    }

    int n_ = 0, h_ = 0, w_ = 0, c_ = 0;
    std::vector<double> v_;
};

// Feature maps and RGB images share the tensor representation. Images hold
// RGB in [0, 1].
using FeatureMap = Tensor;
using Image = Tensor;

}  // namespace sietrack
