#include "sietrack/tracking.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>

#include "sietrack/errors.hpp"
#include "sietrack/image_io.hpp"

namespace sietrack {

BoundingBox search_region(const TrackerState& state, const PatchSize& frame_size) {
    const Ltwh& t = state.target;
    const BoundingBox prev = ltwh_to_corners(t);
    if (prev.x2 <= 0.0 || prev.y2 <= 0.0 || prev.x1 >= frame_size.w || prev.y1 >= frame_size.h) {
        throw LostTargetError("previous box (" + std::to_string(prev.x1) + "," +
                              std::to_string(prev.y1) + "," + std::to_string(prev.x2) + "," +
                              std::to_string(prev.y2) + ") is entirely outside the " +
                              std::to_string(frame_size.w) + "x" + std::to_string(frame_size.h) +
                              " frame");
    }
    BoundingBox region;
    region.x1 = std::max(0.0, t.left - t.width * state.delta);
    region.y1 = std::max(0.0, t.top - t.height * state.delta);
    region.x2 = std::min(t.left + t.width * (1.0 + state.delta), frame_size.w);
    region.y2 = std::min(t.top + t.height * (1.0 + state.delta), frame_size.h);
    if (!(region.width() > 0.0) || !(region.height() > 0.0)) {
        throw LostTargetError("search region collapsed to zero area");
    }
    return region;
}

Tracker::Tracker(std::shared_ptr<const ModelWeights> weights, ModelConfig cfg, double delta)
    : weights_(std::move(weights)), cfg_(std::move(cfg)), delta_(delta) {
    cfg_.validate();
    if (delta_ < 0.0) throw std::invalid_argument("Tracker: delta must be >= 0");
}

void Tracker::init(const Image& frame, const BoundingBox& box) {
    if (!(box.area() > 0.0)) {
        throw std::invalid_argument("Tracker::init: box has non-positive area");
    }
    const PatchSize frame_size{static_cast<double>(frame.w()), static_cast<double>(frame.h())};
    const BoundingBox clipped = clamp_box(box, frame_size);
    if (!(clipped.area() > 0.0)) {
        throw std::invalid_argument("Tracker::init: box does not intersect the frame");
    }
    const Image patch =
        crop_and_resize(frame, clipped, cfg_.template_input, cfg_.template_input);
    state_.template_features = template_features(patch, *weights_, cfg_);
    state_.target = corners_to_ltwh(box);
    state_.delta = delta_;
    state_.frame_index = 0;
    initialized_ = true;
}

BoundingBox Tracker::update(const Image& frame) {
    if (!initialized_) throw std::logic_error("Tracker::update before init");
    const PatchSize frame_size{static_cast<double>(frame.w()), static_cast<double>(frame.h())};
    const BoundingBox region = search_region(state_, frame_size);
    const Image patch =
        crop_and_resize(frame, region, cfg_.detection_input, cfg_.detection_input);
    const RelativeOffsets offsets =
        forward_with_template(state_.template_features, patch, *weights_, cfg_);
    for (int i = 0; i < 4; ++i) {
        if (!std::isfinite(offsets[i])) {
            throw TrackingFailureError("non-finite network output at frame " +
                                       std::to_string(state_.frame_index + 1));
        }
    }
    // decode against the crop's true size, then shift by the crop origin
    BoundingBox box =
        decode_offsets(offsets, PatchSize{region.width(), region.height()});
    box.x1 += region.x1;
    box.x2 += region.x1;
    box.y1 += region.y1;
    box.y2 += region.y1;
    box = clamp_box(box, frame_size);
    // floor the box at 2x2 px so the state cannot collapse
    constexpr double kMinSide = 2.0;
    if (box.width() < kMinSide) {
        const double cx = std::clamp(box.center_x(), kMinSide / 2, frame_size.w - kMinSide / 2);
        box.x1 = cx - kMinSide / 2;
        box.x2 = cx + kMinSide / 2;
    }
    if (box.height() < kMinSide) {
        const double cy = std::clamp(box.center_y(), kMinSide / 2, frame_size.h - kMinSide / 2);
        box.y1 = cy - kMinSide / 2;
        box.y2 = cy + kMinSide / 2;
    }
    state_.target = corners_to_ltwh(box);
    ++state_.frame_index;
    return box;
}

std::vector<TrackedFrame> track_sequence(const SequenceRecord& seq, const ModelWeights& weights,
                                         const ModelConfig& cfg, double delta) {
    if (seq.size() < 1) throw std::invalid_argument("track_sequence: empty sequence");
    auto shared = std::make_shared<const ModelWeights>(weights);
    Tracker tracker(shared, cfg, delta);
    tracker.init(seq.frame(0), seq.annotations.front());

    std::vector<TrackedFrame> out;
    out.push_back(TrackedFrame{0, seq.annotations.front(), true});
    BoundingBox last_good = seq.annotations.front();
    for (int t = 1; t < seq.size(); ++t) {
        try {
            last_good = tracker.update(seq.frame(t));
            out.push_back(TrackedFrame{t, last_good, true});
        } catch (const LostTargetError&) {
            out.push_back(TrackedFrame{t, last_good, false});
        } catch (const TrackingFailureError&) {
            out.push_back(TrackedFrame{t, last_good, false});
        }
    }
    return out;
}

void write_track_csv(const std::filesystem::path& path, const std::vector<TrackedFrame>& track) {
    std::ofstream f(path);
    if (!f) throw std::runtime_error("cannot write " + path.string());
    auto fmt = [](double v) {
        char buf[32];
        const auto res = std::to_chars(buf, buf + sizeof(buf), v);
        return std::string(buf, res.ptr);
    };
    for (const auto& t : track) {
        f << t.frame_index << ',' << fmt(t.box.x1) << ',' << fmt(t.box.y1) << ',' << fmt(t.box.x2)
          << ',' << fmt(t.box.y2) << ',' << (t.ok ? "ok" : "failed") << '\n';
    }
}

std::vector<TrackedFrame> read_track_csv(const std::filesystem::path& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("cannot read " + path.string());
    std::vector<TrackedFrame> out;
    std::string line;
    int lineno = 0;
    while (std::getline(f, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r\n") == std::string::npos) continue;
        TrackedFrame t;
        std::array<std::string, 6> fields;
        size_t pos = 0;
        for (int i = 0; i < 6; ++i) {
            size_t comma = line.find(',', pos);
            if (comma == std::string::npos) comma = line.size();
            fields[static_cast<size_t>(i)] = line.substr(pos, comma - pos);
            pos = comma + 1;
        }
        t.frame_index = std::stoi(fields[0]);
        t.box = BoundingBox{std::stod(fields[1]), std::stod(fields[2]), std::stod(fields[3]),
                            std::stod(fields[4])};
        std::string status = fields[5];
        while (!status.empty() && (status.back() == '\r' || status.back() == '\n')) {
            status.pop_back();
        }
        if (status != "ok" && status != "failed") {
            throw ParseError(path.string(), lineno, "bad status '" + status + "'");
        }
        t.ok = status == "ok";
        out.push_back(t);
    }
    return out;
}

void dump_annotated_frames(const SequenceRecord& seq, const std::vector<TrackedFrame>& track,
                           const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    char name[16];
    for (const auto& t : track) {
        Image frame = seq.frame(t.frame_index);
        draw_box(frame, t.box, t.ok ? 0.1 : 0.9, t.ok ? 0.9 : 0.1, 0.1);
        std::snprintf(name, sizeof(name), "%08d.png", t.frame_index + 1);
        save_image(dir / name, frame);
    }
}

}  // namespace sietrack
