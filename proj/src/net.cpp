#include "net.hpp"

#include <stdexcept>

#include "sietrack/errors.hpp"

namespace sietrack::net {

int LayerSpecs::output_size(int in) const {
    int n = in;
    for (int i = 0; i < kNumBlocks; ++i) {
        n = conv[i].out_size(n);
        if (n <= 0) return -1;
        if (pool_after[i]) {
            n = (n - 2) / 2 + 1;
            if (n <= 0) return -1;
        }
    }
    return n;
}

LayerSpecs make_specs(const ModelConfig& cfg) {
    LayerSpecs ls;
    const int c = cfg.channels;
    int widths[kNumBlocks];
    switch (cfg.backbone) {
        case Backbone::compact5: {
            int tmp[kNumBlocks] = {c / 8, c / 4, c / 2, c, c};
            std::copy(tmp, tmp + kNumBlocks, widths);
            break;
        }
        case Backbone::compact5w: {
            int tmp[kNumBlocks] = {c / 4, c / 2, c, c, c};
            std::copy(tmp, tmp + kNumBlocks, widths);
            break;
        }
    }
    const int kernels[kNumBlocks] = {5, 3, 3, 3, 3};
    const int strides[kNumBlocks] = {2, 2, 1, 1, 1};
    const int pads[kNumBlocks] = {0, 1, 1, 1, 1};
    int in_c = 3;
    for (int i = 0; i < kNumBlocks; ++i) {
        ls.conv[i] = ConvSpec{kernels[i], strides[i], pads[i], in_c, widths[i]};
        in_c = widths[i];
    }
    ls.channels = c;
    ls.se_mid = c / cfg.se_reduction;
    ls.corr = cfg.corr_size();
    ls.fc_in = ls.corr * ls.corr;
    return ls;
}

ParamArray& GradSet::at(const std::string& name) {
    for (auto& a : arrays) {
        if (a.name == name) return a;
    }
    throw std::logic_error("GradSet: unknown parameter " + name);
}

void GradSet::zero() {
    for (auto& a : arrays) std::fill(a.v.begin(), a.v.end(), 0.0);
}

GradSet make_grads(const ModelConfig& cfg) {
    GradSet g;
    g.arrays = parameter_layout(cfg);
    return g;
}

namespace {

const std::string kBlockNames[kNumBlocks] = {"block1", "block2", "block3", "block4", "block5"};

}  // namespace

const char* branch_suffix(Branch b) { return b == Branch::tmpl ? ".tmpl" : ".det"; }

Tensor backbone_forward(const Tensor& x, ModelWeights& w, const LayerSpecs& ls, Branch branch,
                        Phase phase, bool update_running, BranchCache* cache) {
    const std::string suffix = branch_suffix(branch);
    Tensor t = x;
    for (int i = 0; i < kNumBlocks; ++i) {
        const std::string& bn = kBlockNames[i];
        t = conv2d_forward(t, ls.conv[i], w.param(bn + ".conv.w").v, w.param(bn + ".conv.b").v,
                           cache ? &cache->conv[i] : nullptr);
        if (phase == Phase::train) {
            t = bn_forward_train(t, w.param(bn + ".bn.gamma").v, w.param(bn + ".bn.beta").v,
                                 w.buffer(bn + ".bn.running_mean" + suffix).v,
                                 w.buffer(bn + ".bn.running_var" + suffix).v, update_running,
                                 cache ? &cache->bn[i] : nullptr);
        } else {
            t = bn_forward_eval(t, w.param(bn + ".bn.gamma").v, w.param(bn + ".bn.beta").v,
                                w.buffer(bn + ".bn.running_mean" + suffix).v,
                                w.buffer(bn + ".bn.running_var" + suffix).v);
        }
        t = relu_forward(t, cache ? &cache->relu[i] : nullptr);
        if (ls.pool_after[i]) {
            t = maxpool2_forward(t, cache ? &cache->pool[i] : nullptr);
        }
    }
    return t;
}

Tensor backbone_forward_eval(const Tensor& x, const ModelWeights& w, const LayerSpecs& ls,
                             Branch branch) {
    return backbone_forward(x, const_cast<ModelWeights&>(w), ls, branch, Phase::eval, false,
                            nullptr);
}

Tensor backbone_backward(const Tensor& df, const ModelWeights& w, const LayerSpecs& ls,
                         const BranchCache& cache, GradSet& g) {
    Tensor d = df;
    for (int i = kNumBlocks - 1; i >= 0; --i) {
        const std::string& bn = kBlockNames[i];
        if (ls.pool_after[i]) {
            d = maxpool2_backward(d, cache.pool[i], ls.conv[i].out_c);
        }
        d = relu_backward(d, cache.relu[i]);
        d = bn_backward(d, w.param(bn + ".bn.gamma").v, cache.bn[i], g.at(bn + ".bn.gamma").v,
                        g.at(bn + ".bn.beta").v);
        d = conv2d_backward(d, ls.conv[i], w.param(bn + ".conv.w").v, cache.conv[i],
                            g.at(bn + ".conv.w").v, g.at(bn + ".conv.b").v);
    }
    return d;
}

Tensor se_layer_forward(const Tensor& x, const ModelWeights& w, const LayerSpecs& ls,
                        SeCache* cache) {
    return se_forward(x, ls.se_mid, w.param("se.fc1.w").v, w.param("se.fc1.b").v,
                      w.param("se.fc2.w").v, w.param("se.fc2.b").v, cache);
}

Tensor se_layer_backward(const Tensor& dy, const ModelWeights& w, const LayerSpecs& ls,
                         const SeCache& cache, GradSet& g) {
    return se_backward(dy, ls.se_mid, w.param("se.fc1.w").v, w.param("se.fc2.w").v, cache,
                       g.at("se.fc1.w").v, g.at("se.fc1.b").v, g.at("se.fc2.w").v,
                       g.at("se.fc2.b").v);
}

RowMat head_forward(const Tensor& corr, const ModelWeights& w, const LayerSpecs& ls,
                    HeadCache* cache) {
    const ConvSpec spec{1, 1, 0, ls.channels, 1};
    Tensor collapsed = conv2d_forward(corr, spec, w.param("head.conv.w").v,
                                      w.param("head.conv.b").v, cache ? &cache->conv : nullptr);
    // flatten each sample's m x m map into one row
    RowMat flat(collapsed.n(), ls.fc_in);
    for (int bi = 0; bi < collapsed.n(); ++bi) {
        const double* p = collapsed.sample(bi);
        for (int i = 0; i < ls.fc_in; ++i) flat(bi, i) = p[i];
    }
    return dense_forward(flat, ls.fc_in, 4, w.param("head.fc.w").v, w.param("head.fc.b").v,
                         cache ? &cache->fc : nullptr);
}

Tensor head_backward(const RowMat& dpred, const ModelWeights& w, const LayerSpecs& ls,
                     const HeadCache& cache, GradSet& g) {
    RowMat dflat = dense_backward(dpred, ls.fc_in, 4, w.param("head.fc.w").v, cache.fc,
                                  g.at("head.fc.w").v, g.at("head.fc.b").v);
    Tensor dcollapsed(static_cast<int>(dflat.rows()), ls.corr, ls.corr, 1);
    for (int bi = 0; bi < dcollapsed.n(); ++bi) {
        double* p = dcollapsed.sample(bi);
        for (int i = 0; i < ls.fc_in; ++i) p[i] = dflat(bi, i);
    }
    const ConvSpec spec{1, 1, 0, ls.channels, 1};
    return conv2d_backward(dcollapsed, spec, w.param("head.conv.w").v, cache.conv,
                           g.at("head.conv.w").v, g.at("head.conv.b").v);
}

RowMat pair_forward(const Tensor& tmpl_batch, const Tensor& det_batch, ModelWeights& w,
                    const LayerSpecs& ls, Phase phase, bool update_running, PairCache* cache) {
    Tensor fz0 = backbone_forward(tmpl_batch, w, ls, Branch::tmpl, phase, update_running,
                                  cache ? &cache->tmpl : nullptr);
    Tensor fx0 = backbone_forward(det_batch, w, ls, Branch::det, phase, update_running,
                                  cache ? &cache->det : nullptr);
    Tensor fz = se_layer_forward(fz0, w, ls, cache ? &cache->se_tmpl : nullptr);
    Tensor fx = se_layer_forward(fx0, w, ls, cache ? &cache->se_det : nullptr);
    Tensor corr = correlate_forward(fx, fz);
    if (cache) {
        cache->fx = std::move(fx);
        cache->fz = std::move(fz);
        return head_forward(corr, w, ls, &cache->head);
    }
    return head_forward(corr, w, ls, nullptr);
}

void pair_backward(const RowMat& dpred, const ModelWeights& w, const LayerSpecs& ls,
                   const PairCache& cache, GradSet& g) {
    Tensor dcorr = head_backward(dpred, w, ls, cache.head, g);
    Tensor dfx, dfz;
    correlate_backward(dcorr, cache.fx, cache.fz, dfx, dfz);
    Tensor dfx0 = se_layer_backward(dfx, w, ls, cache.se_det, g);
    Tensor dfz0 = se_layer_backward(dfz, w, ls, cache.se_tmpl, g);
    backbone_backward(dfx0, w, ls, cache.det, g);
    backbone_backward(dfz0, w, ls, cache.tmpl, g);
}

}  // namespace sietrack::net
