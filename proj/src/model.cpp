#include "sietrack/model.hpp"

#include <numeric>
#include <stdexcept>

#include "net.hpp"
#include "sietrack/errors.hpp"

namespace sietrack {

Backbone backbone_from_string(const std::string& id) {
    if (id == "compact5") return Backbone::compact5;
    if (id == "compact5w") return Backbone::compact5w;
    throw std::invalid_argument("unknown backbone id: " + id);
}

std::string to_string(Backbone b) {
    switch (b) {
        case Backbone::compact5: return "compact5";
        case Backbone::compact5w: return "compact5w";
    }
    return "compact5";
}

void ModelConfig::validate() const {
    if (wz < 1 || wx <= wz) {
        throw std::invalid_argument("ModelConfig: need wx > wz >= 1, got wx=" +
                                    std::to_string(wx) + " wz=" + std::to_string(wz));
    }
    if (detection_input <= template_input) {
        throw std::invalid_argument("ModelConfig: detection_input must exceed template_input");
    }
    if (channels < 8 || channels % 8 != 0) {
        throw std::invalid_argument("ModelConfig: channels must be a positive multiple of 8");
    }
    if (se_reduction < 1 || channels % se_reduction != 0) {
        throw std::invalid_argument("ModelConfig: channels must be divisible by se_reduction");
    }
    const auto ls = net::make_specs(*this);
    const int got_z = ls.output_size(template_input);
    const int got_x = ls.output_size(detection_input);
    if (got_z != wz || got_x != wx) {
        throw std::invalid_argument(
            "ModelConfig: backbone maps inputs " + std::to_string(template_input) + "/" +
            std::to_string(detection_input) + " to " + std::to_string(got_z) + "/" +
            std::to_string(got_x) + ", expected wz/wx " + std::to_string(wz) + "/" +
            std::to_string(wx));
    }
}

ModelConfig ModelConfig::desk_scale() {
    ModelConfig cfg;
    cfg.template_input = 47;
    cfg.detection_input = 111;
    cfg.wz = 3;
    cfg.wx = 7;
    cfg.channels = 8;
    cfg.se_reduction = 4;
    return cfg;
}

namespace {

ParamArray& find_array(std::vector<ParamArray>& arrays, const std::string& name,
                       const char* kind) {
    for (auto& a : arrays) {
        if (a.name == name) return a;
    }
    throw std::logic_error(std::string("ModelWeights: unknown ") + kind + " " + name);
}

}  // namespace

ParamArray& ModelWeights::param(const std::string& name) {
    return find_array(params, name, "parameter");
}
const ParamArray& ModelWeights::param(const std::string& name) const {
    return const_cast<ModelWeights*>(this)->param(name);
}
ParamArray& ModelWeights::buffer(const std::string& name) {
    return find_array(buffers, name, "buffer");
}
const ParamArray& ModelWeights::buffer(const std::string& name) const {
    return const_cast<ModelWeights*>(this)->buffer(name);
}

int64_t ModelWeights::parameter_count() const {
    int64_t total = 0;
    for (const auto& a : params) total += a.size();
    return total;
}

bool ModelWeights::all_finite() const {
    auto finite = [](const std::vector<ParamArray>& arrays) {
        for (const auto& a : arrays) {
            for (double x : a.v) {
                if (!std::isfinite(x)) return false;
            }
        }
        return true;
    };
    return finite(params) && finite(buffers);
}

std::vector<ParamArray> parameter_layout(const ModelConfig& cfg) {
    const auto ls = net::make_specs(cfg);
    std::vector<ParamArray> out;
    auto add = [&out](const std::string& name, std::vector<int> shape) {
        int64_t sz = 1;
        for (int d : shape) sz *= d;
        out.push_back(ParamArray{name, std::move(shape), std::vector<double>(sz, 0.0)});
    };
    for (int i = 0; i < net::kNumBlocks; ++i) {
        const auto& s = ls.conv[i];
        const std::string block = "block" + std::to_string(i + 1);
        add(block + ".conv.w", {s.k, s.k, s.in_c, s.out_c});
        add(block + ".conv.b", {s.out_c});
        add(block + ".bn.gamma", {s.out_c});
        add(block + ".bn.beta", {s.out_c});
    }
    add("se.fc1.w", {ls.channels, ls.se_mid});
    add("se.fc1.b", {ls.se_mid});
    add("se.fc2.w", {ls.se_mid, ls.channels});
    add("se.fc2.b", {ls.channels});
    add("head.conv.w", {1, 1, ls.channels, 1});
    add("head.conv.b", {1});
    add("head.fc.w", {ls.fc_in, 4});
    add("head.fc.b", {4});
    return out;
}

int64_t parameter_count(const ModelConfig& cfg) {
    const auto layout = parameter_layout(cfg);
    return std::accumulate(layout.begin(), layout.end(), int64_t{0},
                           [](int64_t acc, const ParamArray& a) { return acc + a.size(); });
}

ModelWeights init_weights(const ModelConfig& cfg, uint64_t seed) {
    cfg.validate();
    ModelWeights w;
    w.params = parameter_layout(cfg);
    Rng rng(seed);
    for (auto& a : w.params) {
        if (a.name.ends_with(".w")) {
            for (double& v : a.v) v = rng.truncated_normal(0.0, 0.01);
        } else if (a.name.ends_with(".gamma")) {
            std::fill(a.v.begin(), a.v.end(), 1.0);
        } else {
            std::fill(a.v.begin(), a.v.end(), 0.0);  // biases and beta
        }
    }
    const auto ls = net::make_specs(cfg);
    // one running-stat set per branch (shared trainable parameters)
    for (int i = 0; i < net::kNumBlocks; ++i) {
        const std::string block = "block" + std::to_string(i + 1);
        const int c = ls.conv[i].out_c;
        for (const char* suffix : {".tmpl", ".det"}) {
            w.buffers.push_back(ParamArray{block + ".bn.running_mean" + std::string(suffix),
                                           {c}, std::vector<double>(c, 0.0)});
            w.buffers.push_back(ParamArray{block + ".bn.running_var" + std::string(suffix),
                                           {c}, std::vector<double>(c, 1.0)});
        }
    }
    return w;
}

namespace {

void check_branch_input(const Image& image, const ModelConfig& cfg) {
    if (image.n() != 1 || image.c() != 3) {
        throw ShapeError("extract_features: expected a single RGB image (1xHxWx3), got " +
                         image.shape_str());
    }
    const bool is_template =
        image.h() == cfg.template_input && image.w() == cfg.template_input;
    const bool is_detection =
        image.h() == cfg.detection_input && image.w() == cfg.detection_input;
    if (!is_template && !is_detection) {
        throw ShapeError("extract_features: input " + image.shape_str() + " matches neither the " +
                         std::to_string(cfg.template_input) + "x" +
                         std::to_string(cfg.template_input) + " template size nor the " +
                         std::to_string(cfg.detection_input) + "x" +
                         std::to_string(cfg.detection_input) + " detection size");
    }
}

}  // namespace

FeatureMap extract_features(const Image& image, const ModelWeights& w, const ModelConfig& cfg) {
    check_branch_input(image, cfg);
    const net::Branch branch =
        image.h() == cfg.template_input ? net::Branch::tmpl : net::Branch::det;
    return net::backbone_forward_eval(image, w, net::make_specs(cfg), branch);
}

FeatureMap se_recalibrate(const FeatureMap& f, const ModelWeights& w, const ModelConfig& cfg) {
    if (f.c() != cfg.channels) {
        throw ShapeError("se_recalibrate: expected " + std::to_string(cfg.channels) +
                         " channels, got " + f.shape_str());
    }
    return net::se_forward(f, net::make_specs(cfg).se_mid, w.param("se.fc1.w").v,
                           w.param("se.fc1.b").v, w.param("se.fc2.w").v, w.param("se.fc2.b").v,
                           nullptr);
}

std::vector<double> se_gate(const FeatureMap& f, const ModelWeights& w, const ModelConfig& cfg) {
    if (f.c() != cfg.channels) {
        throw ShapeError("se_gate: expected " + std::to_string(cfg.channels) + " channels, got " +
                         f.shape_str());
    }
    const auto gate = net::se_gate_batch(f, net::make_specs(cfg).se_mid, w.param("se.fc1.w").v,
                                         w.param("se.fc1.b").v, w.param("se.fc2.w").v,
                                         w.param("se.fc2.b").v);
    return std::vector<double>(gate.data(), gate.data() + gate.cols());
}

FeatureMap se_apply_gate(const FeatureMap& f, const std::vector<double>& gate) {
    if (static_cast<int>(gate.size()) != f.c()) {
        throw ShapeError("se_apply_gate: gate has " + std::to_string(gate.size()) +
                         " entries for " + std::to_string(f.c()) + " channels");
    }
    FeatureMap out(f.n(), f.h(), f.w(), f.c());
    const double* src = f.data();
    double* dst = out.data();
    const size_t count = f.size() / f.c();
    for (size_t i = 0; i < count; ++i, src += f.c(), dst += f.c()) {
        for (int k = 0; k < f.c(); ++k) dst[k] = src[k] * gate[static_cast<size_t>(k)];
    }
    return out;
}

FeatureMap channelwise_correlate(const FeatureMap& f_x, const FeatureMap& f_z) {
    return net::correlate_forward(f_x, f_z);
}

RelativeOffsets regress(const FeatureMap& corr, const ModelWeights& w, const ModelConfig& cfg) {
    const auto ls = net::make_specs(cfg);
    if (corr.n() != 1 || corr.h() != ls.corr || corr.w() != ls.corr || corr.c() != ls.channels) {
        throw ShapeError("regress: expected 1x" + std::to_string(ls.corr) + "x" +
                         std::to_string(ls.corr) + "x" + std::to_string(ls.channels) + ", got " +
                         corr.shape_str());
    }
    const net::RowMat pred = net::head_forward(corr, w, ls, nullptr);
    RelativeOffsets o;
    for (int i = 0; i < 4; ++i) o[i] = pred(0, i);
    return o;
}

FeatureMap template_features(const Image& template_patch, const ModelWeights& w,
                             const ModelConfig& cfg) {
    return se_recalibrate(extract_features(template_patch, w, cfg), w, cfg);
}

RelativeOffsets forward_with_template(const FeatureMap& cached_template,
                                      const Image& detection_patch, const ModelWeights& w,
                                      const ModelConfig& cfg) {
    FeatureMap fx = se_recalibrate(extract_features(detection_patch, w, cfg), w, cfg);
    return regress(channelwise_correlate(fx, cached_template), w, cfg);
}

RelativeOffsets forward(const Image& template_patch, const Image& detection_patch,
                        const ModelWeights& w, const ModelConfig& cfg) {
    return forward_with_template(template_features(template_patch, w, cfg), detection_patch, w,
                                 cfg);
}

}  // namespace sietrack
