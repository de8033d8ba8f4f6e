#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "sietrack/errors.hpp"
#include "sietrack/model.hpp"
#include "sietrack/rng.hpp"

using namespace sietrack;

namespace {

Tensor random_tensor(int n, int h, int w, int c, Rng& rng, double lo = -1.0, double hi = 1.0) {
    Tensor t(n, h, w, c);
    for (double& v : t.values()) v = rng.uniform(lo, hi);
    return t;
}

}  // namespace

TEST_CASE("default config maps 125/239 inputs to 7/15 feature maps") {
    ModelConfig cfg;
    cfg.validate();
    const ModelWeights w = init_weights(cfg, 1);
    Rng rng(5);

    const Image tmpl = random_tensor(1, 125, 125, 3, rng, 0.0, 1.0);
    const FeatureMap fz = extract_features(tmpl, w, cfg);
    CHECK(fz.h() == 7);
    CHECK(fz.w() == 7);
    CHECK(fz.c() == 64);

    const Image det = random_tensor(1, 239, 239, 3, rng, 0.0, 1.0);
    const FeatureMap fx = extract_features(det, w, cfg);
    CHECK(fx.h() == 15);
    CHECK(fx.w() == 15);
    CHECK(fx.c() == 64);

    const FeatureMap corr = channelwise_correlate(se_recalibrate(fx, w, cfg),
                                                  se_recalibrate(fz, w, cfg));
    CHECK(corr.h() == 9);
    CHECK(corr.w() == 9);
    CHECK(corr.c() == 64);

    const RelativeOffsets o = regress(corr, w, cfg);
    for (int i = 0; i < 4; ++i) CHECK(std::isfinite(o[i]));
}

TEST_CASE("extract_features rejects wrong spatial sizes") {
    ModelConfig cfg;
    const ModelWeights w = init_weights(cfg, 1);
    Rng rng(6);
    const Image bad = random_tensor(1, 100, 100, 3, rng);
    CHECK_THROWS_AS(extract_features(bad, w, cfg), ShapeError);
    try {
        extract_features(bad, w, cfg);
    } catch (const ShapeError& e) {
        const std::string msg = e.what();
        CHECK(msg.find("100") != std::string::npos);  // actual
        CHECK(msg.find("125") != std::string::npos);  // expected template size
        CHECK(msg.find("239") != std::string::npos);  // expected detection size
    }
}

TEST_CASE("all-zero image maps to all-zero features with fresh weights") {
    // biases start at zero and eval-mode batch norm has zero running mean,
    // so the zero image stays zero through every conv/BN/ReLU block
    ModelConfig cfg = ModelConfig::desk_scale();
    const ModelWeights w = init_weights(cfg, 3);
    Image zero(1, cfg.template_input, cfg.template_input, 3);
    const FeatureMap f = extract_features(zero, w, cfg);
    for (double v : f.values()) CHECK(v == 0.0);
}

TEST_CASE("desk-scale config maps 47/111 inputs to 3/7") {
    ModelConfig cfg = ModelConfig::desk_scale();
    cfg.validate();
    const ModelWeights w = init_weights(cfg, 2);
    Rng rng(7);
    CHECK(extract_features(random_tensor(1, 47, 47, 3, rng), w, cfg).h() == 3);
    CHECK(extract_features(random_tensor(1, 111, 111, 3, rng), w, cfg).h() == 7);
}

TEST_CASE("config validation rejects inconsistent settings") {
    ModelConfig cfg;
    cfg.channels = 60;  // not a multiple of 8
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
    cfg = ModelConfig{};
    cfg.wx = 14;  // stack yields 15
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
    cfg = ModelConfig{};
    cfg.se_reduction = 7;
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
    cfg = ModelConfig{};
    cfg.detection_input = 125;
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
}

TEST_CASE("SE keeps shape, zeros stay zero, identity gate is identity") {
    ModelConfig cfg = ModelConfig::desk_scale();
    const ModelWeights w = init_weights(cfg, 11);
    Rng rng(12);

    FeatureMap zero(1, 5, 5, cfg.channels);
    const FeatureMap zs = se_recalibrate(zero, w, cfg);
    CHECK(zs.same_shape(zero));
    for (double v : zs.values()) CHECK(v == 0.0);

    const FeatureMap f = random_tensor(1, 7, 7, cfg.channels, rng);
    const FeatureMap gated = se_apply_gate(f, std::vector<double>(cfg.channels, 1.0));
    CHECK(gated == f);
}

TEST_CASE("SE matches an independent scalar implementation") {
    ModelConfig cfg = ModelConfig::desk_scale();
    ModelWeights w = init_weights(cfg, 21);
    Rng rng(22);
    // make the bottleneck weights large enough to push gates away from 0.5
    for (double& v : w.param("se.fc1.w").v) v = rng.uniform(-1.0, 1.0);
    for (double& v : w.param("se.fc2.w").v) v = rng.uniform(-1.0, 1.0);
    for (double& v : w.param("se.fc1.b").v) v = rng.uniform(-0.5, 0.5);
    for (double& v : w.param("se.fc2.b").v) v = rng.uniform(-0.5, 0.5);

    const int c = cfg.channels;
    const int mid = c / cfg.se_reduction;
    const FeatureMap f = random_tensor(1, 7, 7, c, rng);

    // scalar oracle: average pool, two affine maps, relu, sigmoid
    std::vector<double> z(c, 0.0);
    for (int y = 0; y < 7; ++y)
        for (int x = 0; x < 7; ++x)
            for (int k = 0; k < c; ++k) z[k] += f.at(y, x, k);
    for (int k = 0; k < c; ++k) z[k] /= 49.0;
    const auto& w1 = w.param("se.fc1.w").v;
    const auto& b1 = w.param("se.fc1.b").v;
    const auto& w2 = w.param("se.fc2.w").v;
    const auto& b2 = w.param("se.fc2.b").v;
    std::vector<double> a(mid, 0.0);
    for (int j = 0; j < mid; ++j) {
        double acc = b1[j];
        for (int i = 0; i < c; ++i) acc += z[i] * w1[i * mid + j];
        a[j] = std::max(0.0, acc);
    }
    std::vector<double> gate(c, 0.0);
    for (int k = 0; k < c; ++k) {
        double acc = b2[k];
        for (int j = 0; j < mid; ++j) acc += a[j] * w2[j * c + k];
        gate[k] = 1.0 / (1.0 + std::exp(-acc));
    }

    const auto got_gate = se_gate(f, w, cfg);
    for (int k = 0; k < c; ++k) {
        CHECK(got_gate[static_cast<size_t>(k)] == doctest::Approx(gate[k]).epsilon(1e-12));
        CHECK(gate[k] > 0.0);
        CHECK(gate[k] < 1.0);
    }
    const FeatureMap out = se_recalibrate(f, w, cfg);
    for (int y = 0; y < 7; ++y)
        for (int x = 0; x < 7; ++x)
            for (int k = 0; k < c; ++k)
                CHECK(out.at(y, x, k) ==
                      doctest::Approx(f.at(y, x, k) * gate[k]).epsilon(1e-12));
}

TEST_CASE("SE output/input ratio is constant per channel across positions") {
    ModelConfig cfg = ModelConfig::desk_scale();
    const ModelWeights w = init_weights(cfg, 31);
    Rng rng(32);
    const FeatureMap f = random_tensor(1, 6, 6, cfg.channels, rng, 0.1, 1.0);
    const FeatureMap out = se_recalibrate(f, w, cfg);
    for (int k = 0; k < cfg.channels; ++k) {
        const double ratio = out.at(0, 0, k) / f.at(0, 0, k);
        CHECK(ratio > 0.0);
        CHECK(ratio < 1.0);
        for (int y = 0; y < 6; ++y)
            for (int x = 0; x < 6; ++x)
                CHECK(out.at(y, x, k) / f.at(y, x, k) == doctest::Approx(ratio).epsilon(1e-10));
    }
}

TEST_CASE("correlation with an all-ones 1x1 template is the identity") {
    Rng rng(41);
    const FeatureMap fx = random_tensor(1, 5, 5, 3, rng);
    FeatureMap ones(1, 1, 1, 3);
    ones.fill(1.0);
    const FeatureMap out = channelwise_correlate(fx, ones);
    CHECK(out == fx);
}

TEST_CASE("correlation output size matches the sliding-window formula") {
    Rng rng(43);
    const FeatureMap fx = random_tensor(1, 15, 15, 4, rng);
    const FeatureMap fz = random_tensor(1, 7, 7, 4, rng);
    const FeatureMap out = channelwise_correlate(fx, fz);
    CHECK(out.h() == 9);
    CHECK(out.w() == 9);
    CHECK(out.c() == 4);
}

TEST_CASE("correlation matches the brute-force oracle on random instances") {
    Rng rng(44);
    for (int trial = 0; trial < 50; ++trial) {
        const int c = static_cast<int>(rng.uniform_int(1, 4));
        const int hz = static_cast<int>(rng.uniform_int(1, 3));
        const int wz = static_cast<int>(rng.uniform_int(1, 3));
        const int hx = static_cast<int>(rng.uniform_int(hz, 8));
        const int wx = static_cast<int>(rng.uniform_int(wz, 8));
        const FeatureMap fx = random_tensor(1, hx, wx, c, rng);
        const FeatureMap fz = random_tensor(1, hz, wz, c, rng);
        const FeatureMap got = channelwise_correlate(fx, fz);
        for (int k = 0; k < c; ++k) {
            for (int oy = 0; oy + hz <= hx; ++oy) {
                for (int ox = 0; ox + wz <= wx; ++ox) {
                    double expected = 0.0;
                    for (int ky = 0; ky < hz; ++ky)
                        for (int kx = 0; kx < wz; ++kx)
                            expected += fx.at(oy + ky, ox + kx, k) * fz.at(ky, kx, k);
                    CHECK(got.at(oy, ox, k) ==
                          doctest::Approx(expected).epsilon(1e-10));
                }
            }
        }
    }
}

TEST_CASE("correlation is linear in the detection map") {
    Rng rng(45);
    const FeatureMap fx = random_tensor(1, 6, 6, 2, rng);
    const FeatureMap fz = random_tensor(1, 3, 3, 2, rng);
    FeatureMap fx_scaled = fx;
    const double a = 3.25;
    for (double& v : fx_scaled.values()) v *= a;
    const FeatureMap lhs = channelwise_correlate(fx_scaled, fz);
    const FeatureMap rhs = channelwise_correlate(fx, fz);
    for (size_t i = 0; i < lhs.size(); ++i) {
        CHECK(lhs.values()[i] == doctest::Approx(a * rhs.values()[i]).epsilon(1e-10));
    }
}

TEST_CASE("correlation shape errors") {
    Rng rng(46);
    const FeatureMap fx = random_tensor(1, 4, 4, 2, rng);
    CHECK_THROWS_AS(channelwise_correlate(fx, random_tensor(1, 2, 2, 3, rng)), ShapeError);
    CHECK_THROWS_AS(channelwise_correlate(fx, random_tensor(1, 5, 5, 2, rng)), ShapeError);
}

TEST_CASE("regress matches an independent scalar implementation") {
    ModelConfig cfg = ModelConfig::desk_scale();
    ModelWeights w = init_weights(cfg, 51);
    Rng rng(52);
    for (double& v : w.param("head.conv.w").v) v = rng.uniform(-1.0, 1.0);
    w.param("head.conv.b").v[0] = rng.uniform(-0.5, 0.5);
    for (double& v : w.param("head.fc.w").v) v = rng.uniform(-1.0, 1.0);
    for (double& v : w.param("head.fc.b").v) v = rng.uniform(-0.5, 0.5);

    const int m = cfg.corr_size();
    const FeatureMap corr = random_tensor(1, m, m, cfg.channels, rng);

    // scalar oracle: channel-weighted sum then one affine map
    const auto& cw = w.param("head.conv.w").v;
    const double cb = w.param("head.conv.b").v[0];
    const auto& fw = w.param("head.fc.w").v;
    const auto& fb = w.param("head.fc.b").v;
    std::vector<double> flat(static_cast<size_t>(m) * m, 0.0);
    for (int y = 0; y < m; ++y) {
        for (int x = 0; x < m; ++x) {
            double acc = cb;
            for (int k = 0; k < cfg.channels; ++k) acc += corr.at(y, x, k) * cw[static_cast<size_t>(k)];
            flat[static_cast<size_t>(y) * m + x] = acc;
        }
    }
    double expected[4];
    for (int o = 0; o < 4; ++o) {
        double acc = fb[static_cast<size_t>(o)];
        for (size_t i = 0; i < flat.size(); ++i) acc += flat[i] * fw[i * 4 + static_cast<size_t>(o)];
        expected[o] = acc;
    }

    const RelativeOffsets got = regress(corr, w, cfg);
    for (int o = 0; o < 4; ++o) CHECK(got[o] == doctest::Approx(expected[o]).epsilon(1e-10));
}

TEST_CASE("regress of a zero map with zero head is zero") {
    ModelConfig cfg = ModelConfig::desk_scale();
    ModelWeights w = init_weights(cfg, 53);
    std::fill(w.param("head.fc.w").v.begin(), w.param("head.fc.w").v.end(), 0.0);
    const FeatureMap corr(1, cfg.corr_size(), cfg.corr_size(), cfg.channels);
    const RelativeOffsets o = regress(corr, w, cfg);
    for (int i = 0; i < 4; ++i) CHECK(o[i] == 0.0);
}

TEST_CASE("forward is deterministic and the cached-template path is bit-equal") {
    ModelConfig cfg = ModelConfig::desk_scale();
    const ModelWeights w = init_weights(cfg, 61);
    Rng rng(62);
    const Image tmpl = random_tensor(1, cfg.template_input, cfg.template_input, 3, rng, 0.0, 1.0);
    const Image det = random_tensor(1, cfg.detection_input, cfg.detection_input, 3, rng, 0.0, 1.0);

    const RelativeOffsets a = forward(tmpl, det, w, cfg);
    const RelativeOffsets b = forward(tmpl, det, w, cfg);
    CHECK(a == b);

    const FeatureMap cached = template_features(tmpl, w, cfg);
    const RelativeOffsets c = forward_with_template(cached, det, w, cfg);
    CHECK(a == c);
}

TEST_CASE("mutating backbone weights changes both branches (shared store)") {
    ModelConfig cfg = ModelConfig::desk_scale();
    ModelWeights w = init_weights(cfg, 63);
    Rng rng(64);
    const Image tmpl = random_tensor(1, cfg.template_input, cfg.template_input, 3, rng, 0.0, 1.0);
    const Image det = random_tensor(1, cfg.detection_input, cfg.detection_input, 3, rng, 0.0, 1.0);
    const FeatureMap fz_before = extract_features(tmpl, w, cfg);
    const FeatureMap fx_before = extract_features(det, w, cfg);
    w.param("block1.conv.w").v[0] += 0.5;
    const FeatureMap fz_after = extract_features(tmpl, w, cfg);
    const FeatureMap fx_after = extract_features(det, w, cfg);
    CHECK(!(fz_before == fz_after));
    CHECK(!(fx_before == fx_after));
}

TEST_CASE("parameter_count matches the shape-arithmetic oracle") {
    // hand-tabulated from the architecture table in model.hpp
    {
        ModelConfig cfg;  // c=64, widths {8,16,32,64,64}, fc 81->4
        const int64_t expected = (5 * 5 * 3 * 8 + 8 + 8 + 8) + (3 * 3 * 8 * 16 + 16 + 16 + 16) +
                                 (3 * 3 * 16 * 32 + 32 + 32 + 32) +
                                 (3 * 3 * 32 * 64 + 64 + 64 + 64) +
                                 (3 * 3 * 64 * 64 + 64 + 64 + 64) +
                                 (64 * 16 + 16 + 16 * 64 + 64) + (64 + 1 + 81 * 4 + 4);
        CHECK(parameter_count(cfg) == expected);
        CHECK(parameter_count(cfg) == 64729);
    }
    {
        ModelConfig cfg = ModelConfig::desk_scale();  // c=8, widths {1,2,4,8,8}, fc 25->4
        const int64_t expected = (5 * 5 * 3 * 1 + 1 + 1 + 1) + (3 * 3 * 1 * 2 + 2 + 2 + 2) +
                                 (3 * 3 * 2 * 4 + 4 + 4 + 4) + (3 * 3 * 4 * 8 + 8 + 8 + 8) +
                                 (3 * 3 * 8 * 8 + 8 + 8 + 8) + (8 * 2 + 2 + 2 * 8 + 8) +
                                 (8 + 1 + 25 * 4 + 4);
        CHECK(parameter_count(cfg) == expected);
    }
    ModelConfig cfg;
    CHECK(parameter_count(cfg) == parameter_count(cfg));  // pure function
}

TEST_CASE("doubling c roughly quadruples the deep conv parameter cost") {
    ModelConfig small;
    small.channels = 32;
    small.wz = 7;
    small.wx = 15;
    ModelConfig big;
    big.channels = 64;
    // block5 kernel: 3*3*c*c scales with c^2
    const auto layout_small = parameter_layout(small);
    const auto layout_big = parameter_layout(big);
    int64_t small5 = 0, big5 = 0;
    for (const auto& a : layout_small)
        if (a.name == "block5.conv.w") small5 = a.size();
    for (const auto& a : layout_big)
        if (a.name == "block5.conv.w") big5 = a.size();
    CHECK(big5 == 4 * small5);
}

TEST_CASE("se_recalibrate and regress reject mismatched shapes") {
    ModelConfig cfg = ModelConfig::desk_scale();
    const ModelWeights w = init_weights(cfg, 81);
    Rng rng(82);
    CHECK_THROWS_AS(se_recalibrate(random_tensor(1, 5, 5, cfg.channels + 8, rng), w, cfg),
                    ShapeError);
    CHECK_THROWS_AS(regress(random_tensor(1, 4, 4, cfg.channels, rng), w, cfg), ShapeError);
    CHECK_THROWS_AS(regress(random_tensor(1, cfg.corr_size(), cfg.corr_size(), 16, rng), w, cfg),
                    ShapeError);
}

TEST_CASE("the wide backbone variant keeps the shape contract") {
    ModelConfig cfg;
    cfg.backbone = Backbone::compact5w;
    cfg.validate();  // same spatial arithmetic, wider stages
    CHECK(parameter_count(cfg) > parameter_count(ModelConfig{}));
    const ModelWeights w = init_weights(cfg, 91);
    Rng rng(92);
    const FeatureMap f = extract_features(random_tensor(1, 125, 125, 3, rng, 0.0, 1.0), w, cfg);
    CHECK(f.h() == 7);
    CHECK(f.c() == 64);
    CHECK(backbone_from_string("compact5w") == Backbone::compact5w);
    CHECK_THROWS_AS(backbone_from_string("resnet18"), std::invalid_argument);
}

TEST_CASE("init_weights is deterministic in the seed") {
    ModelConfig cfg = ModelConfig::desk_scale();
    const ModelWeights a = init_weights(cfg, 77);
    const ModelWeights b = init_weights(cfg, 77);
    const ModelWeights c = init_weights(cfg, 78);
    REQUIRE(a.params.size() == b.params.size());
    bool all_equal = true, any_diff_from_c = false;
    for (size_t i = 0; i < a.params.size(); ++i) {
        if (a.params[i].v != b.params[i].v) all_equal = false;
        if (a.params[i].v != c.params[i].v) any_diff_from_c = true;
    }
    CHECK(all_equal);
    CHECK(any_diff_from_c);
    for (double v : a.param("block1.bn.gamma").v) CHECK(v == 1.0);
    for (double v : a.param("block1.conv.b").v) CHECK(v == 0.0);
    // truncated init: nothing outside 2 standard deviations
    for (double v : a.param("block5.conv.w").v) CHECK(std::abs(v) <= 0.02);
}
