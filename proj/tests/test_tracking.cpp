#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "sietrack/errors.hpp"
#include "sietrack/tracking.hpp"

using namespace sietrack;
namespace fs = std::filesystem;

namespace {

std::shared_ptr<const ModelWeights> shared_weights(const ModelConfig& cfg, uint64_t seed) {
    return std::make_shared<const ModelWeights>(init_weights(cfg, seed));
}

// weights whose head always emits exactly the given offsets
std::shared_ptr<const ModelWeights> constant_output_weights(const ModelConfig& cfg,
                                                            const RelativeOffsets& o) {
    ModelWeights w = init_weights(cfg, 1);
    auto& fcw = w.param("head.fc.w").v;
    std::fill(fcw.begin(), fcw.end(), 0.0);
    auto& fcb = w.param("head.fc.b").v;
    for (int i = 0; i < 4; ++i) fcb[static_cast<size_t>(i)] = o[i];
    return std::make_shared<const ModelWeights>(std::move(w));
}

SequenceRecord tiny_sequence(int frames, int h = 120, int w = 160) {
    SynthConfig cfg;
    cfg.frame_w = w;
    cfg.frame_h = h;
    cfg.min_object = 24;
    cfg.max_object = 32;
    cfg.length = frames;
    cfg.seed = 17;
    return synth_sequence(cfg);
}

}  // namespace

TEST_CASE("search_region with delta 0 returns the previous box") {
    TrackerState state;
    state.target = Ltwh{40, 30, 20, 10};
    state.delta = 0.0;
    const BoundingBox r = search_region(state, PatchSize{200, 200});
    CHECK(r == BoundingBox{40, 30, 60, 40});
}

TEST_CASE("search_region with delta 0.5 adds half the box size per side") {
    TrackerState state;
    state.target = Ltwh{100, 100, 40, 40};
    state.delta = 0.5;
    const BoundingBox r = search_region(state, PatchSize{1000, 1000});
    CHECK(r.x1 == doctest::Approx(80.0));
    CHECK(r.y1 == doctest::Approx(80.0));
    CHECK(r.x2 == doctest::Approx(160.0));
    CHECK(r.y2 == doctest::Approx(160.0));
}

TEST_CASE("search_region clamps at the frame corner") {
    TrackerState state;
    state.target = Ltwh{2, 2, 30, 30};
    state.delta = 2.0;
    const BoundingBox r = search_region(state, PatchSize{100, 80});
    CHECK(r.x1 == 0.0);
    CHECK(r.y1 == 0.0);
    CHECK(r.x2 == doctest::Approx(92.0));
    CHECK(r.y2 == doctest::Approx(80.0));
}

TEST_CASE("search_region contains previous-box intersection with the frame") {
    Rng rng(4);
    for (int i = 0; i < 200; ++i) {
        TrackerState state;
        state.target = Ltwh{rng.uniform(-20.0, 180.0), rng.uniform(-20.0, 130.0),
                            rng.uniform(1.0, 60.0), rng.uniform(1.0, 60.0)};
        state.delta = rng.uniform(0.0, 2.0);
        const PatchSize frame{200, 150};
        const BoundingBox prev = ltwh_to_corners(state.target);
        const BoundingBox prev_in = clamp_box(prev, frame);
        if (!(prev_in.area() > 0.0)) continue;
        const BoundingBox region = search_region(state, frame);
        CHECK(region.x1 <= prev_in.x1 + 1e-9);
        CHECK(region.y1 <= prev_in.y1 + 1e-9);
        CHECK(region.x2 >= prev_in.x2 - 1e-9);
        CHECK(region.y2 >= prev_in.y2 - 1e-9);
    }
}

TEST_CASE("search_region reports a lost target outside the frame") {
    TrackerState state;
    state.target = Ltwh{500, 500, 20, 20};
    state.delta = 0.5;
    CHECK_THROWS_AS(search_region(state, PatchSize{100, 100}), LostTargetError);
}

TEST_CASE("init stores the exact given box and caches template features") {
    const ModelConfig cfg = ModelConfig::desk_scale();
    const auto w = shared_weights(cfg, 5);
    const SequenceRecord seq = tiny_sequence(2);
    const BoundingBox box = seq.annotations[0];

    Tracker tracker(w, cfg, 0.5);
    tracker.init(seq.frame(0), box);
    CHECK(tracker.state().target == corners_to_ltwh(box));
    CHECK(tracker.state().frame_index == 0);

    // the cache equals a fresh template-branch forward on the same crop
    const Image frame = seq.frame(0);
    const PatchSize fsz{static_cast<double>(frame.w()), static_cast<double>(frame.h())};
    const Image crop = crop_and_resize(frame, clamp_box(box, fsz), cfg.template_input,
                                       cfg.template_input);
    const FeatureMap fresh = template_features(crop, *w, cfg);
    CHECK(tracker.state().template_features == fresh);

    Tracker second(w, cfg, 0.5);
    second.init(seq.frame(0), box);
    CHECK(second.state().template_features == tracker.state().template_features);
}

TEST_CASE("init rejects degenerate and out-of-frame boxes") {
    const ModelConfig cfg = ModelConfig::desk_scale();
    const auto w = shared_weights(cfg, 6);
    const SequenceRecord seq = tiny_sequence(2);
    Tracker tracker(w, cfg, 0.5);
    CHECK_THROWS_AS(tracker.init(seq.frame(0), BoundingBox{10, 10, 10, 40}),
                    std::invalid_argument);
    CHECK_THROWS_AS(tracker.init(seq.frame(0), BoundingBox{500, 500, 600, 600}),
                    std::invalid_argument);
}

TEST_CASE("whole-patch offsets decode to exactly the search region") {
    const ModelConfig cfg = ModelConfig::desk_scale();
    const auto w = constant_output_weights(cfg, RelativeOffsets{{-0.5, -0.5, 0.5, 0.5}});
    const SequenceRecord seq = tiny_sequence(2);

    Tracker tracker(w, cfg, 0.5);
    tracker.init(seq.frame(0), seq.annotations[0]);
    const BoundingBox expected =
        search_region(tracker.state(),
                      PatchSize{static_cast<double>(seq.frame(1).w()),
                                static_cast<double>(seq.frame(1).h())});
    const BoundingBox got = tracker.update(seq.frame(1));
    CHECK(got.x1 == doctest::Approx(expected.x1).epsilon(1e-9));
    CHECK(got.y1 == doctest::Approx(expected.y1).epsilon(1e-9));
    CHECK(got.x2 == doctest::Approx(expected.x2).epsilon(1e-9));
    CHECK(got.y2 == doctest::Approx(expected.y2).epsilon(1e-9));
    CHECK(tracker.state().frame_index == 1);
}

TEST_CASE("center offsets collapse to the 2x2 px floor") {
    const ModelConfig cfg = ModelConfig::desk_scale();
    const auto w = constant_output_weights(cfg, RelativeOffsets{});  // degenerate center point
    const SequenceRecord seq = tiny_sequence(2);
    Tracker tracker(w, cfg, 0.5);
    tracker.init(seq.frame(0), seq.annotations[0]);
    const BoundingBox got = tracker.update(seq.frame(1));
    CHECK(got.width() == doctest::Approx(2.0));
    CHECK(got.height() == doctest::Approx(2.0));
}

TEST_CASE("update is deterministic from identical state and frame") {
    const ModelConfig cfg = ModelConfig::desk_scale();
    const auto w = shared_weights(cfg, 7);
    const SequenceRecord seq = tiny_sequence(3);

    Tracker a(w, cfg, 0.5);
    a.init(seq.frame(0), seq.annotations[0]);
    Tracker b(w, cfg, 0.5);
    b.init(seq.frame(0), seq.annotations[0]);
    const BoundingBox ba = a.update(seq.frame(1));
    const BoundingBox bb = b.update(seq.frame(1));
    CHECK(ba == bb);
}

TEST_CASE("template features stay bitwise constant across updates") {
    const ModelConfig cfg = ModelConfig::desk_scale();
    const auto w = shared_weights(cfg, 8);
    const SequenceRecord seq = tiny_sequence(6);
    Tracker tracker(w, cfg, 0.5);
    tracker.init(seq.frame(0), seq.annotations[0]);
    const FeatureMap cached = tracker.state().template_features;
    for (int t = 1; t < seq.size(); ++t) {
        tracker.update(seq.frame(t));
        CHECK(tracker.state().template_features == cached);
    }
}

TEST_CASE("track_sequence returns one box per frame, frame 0 is the init box") {
    const ModelConfig cfg = ModelConfig::desk_scale();
    const ModelWeights w = init_weights(cfg, 9);
    const SequenceRecord seq = tiny_sequence(5);
    const auto track = track_sequence(seq, w, cfg, 0.5);
    REQUIRE(track.size() == 5);
    CHECK(track[0].box == seq.annotations[0]);
    CHECK(track[0].ok);
    for (int t = 0; t < 5; ++t) CHECK(track[static_cast<size_t>(t)].frame_index == t);
}

TEST_CASE("track_sequence on a single frame returns just the init box") {
    const ModelConfig cfg = ModelConfig::desk_scale();
    const ModelWeights w = init_weights(cfg, 10);
    SequenceRecord seq = tiny_sequence(3);
    seq.frames.resize(1);
    seq.annotations.resize(1);
    seq.visibility.resize(1);
    const auto track = track_sequence(seq, w, cfg, 0.5);
    REQUIRE(track.size() == 1);
    CHECK(track[0].box == seq.annotations[0]);
}

TEST_CASE("tracking does not mutate the weights") {
    const ModelConfig cfg = ModelConfig::desk_scale();
    const ModelWeights w = init_weights(cfg, 11);
    const ModelWeights snapshot = w;
    const SequenceRecord seq = tiny_sequence(4);
    track_sequence(seq, w, cfg, 0.5);
    REQUIRE(w.params.size() == snapshot.params.size());
    for (size_t i = 0; i < w.params.size(); ++i) CHECK(w.params[i].v == snapshot.params[i].v);
    for (size_t i = 0; i < w.buffers.size(); ++i) CHECK(w.buffers[i].v == snapshot.buffers[i].v);
}

TEST_CASE("track CSV roundtrip and determinism") {
    const ModelConfig cfg = ModelConfig::desk_scale();
    const ModelWeights w = init_weights(cfg, 12);
    const SequenceRecord seq = tiny_sequence(4);
    const auto track = track_sequence(seq, w, cfg, 0.5);
    const auto track2 = track_sequence(seq, w, cfg, 0.5);
    REQUIRE(track.size() == track2.size());
    for (size_t i = 0; i < track.size(); ++i) {
        CHECK(track[i].box == track2[i].box);
        CHECK(track[i].ok == track2[i].ok);
    }

    const fs::path path = fs::temp_directory_path() / "sietrack-track.csv";
    write_track_csv(path, track);
    const auto loaded = read_track_csv(path);
    REQUIRE(loaded.size() == track.size());
    for (size_t i = 0; i < track.size(); ++i) {
        CHECK(loaded[i].frame_index == track[i].frame_index);
        CHECK(loaded[i].box == track[i].box);  // shortest-exact double format
        CHECK(loaded[i].ok == track[i].ok);
    }
}

TEST_CASE("annotated frame dump writes one image per frame") {
    const ModelConfig cfg = ModelConfig::desk_scale();
    const ModelWeights w = init_weights(cfg, 13);
    const SequenceRecord seq = tiny_sequence(3);
    const auto track = track_sequence(seq, w, cfg, 0.5);
    const fs::path dir = fs::temp_directory_path() / "sietrack-dump";
    fs::remove_all(dir);
    dump_annotated_frames(seq, track, dir);
    int count = 0;
    for (const auto& e : fs::directory_iterator(dir)) {
        (void)e;
        ++count;
    }
    CHECK(count == 3);
}
