#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>

#include "sietrack/data.hpp"
#include "sietrack/errors.hpp"
#include "sietrack/image_io.hpp"

namespace sietrack {

namespace fs = std::filesystem;

namespace {

double quantize(double v) {
    return std::clamp(std::lround(v * 255.0), 0l, 255l) / 255.0;
}

// Shortest exact decimal form, so exported annotations reload bit-exactly.
std::string format_double(double v) {
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

}  // namespace

SequenceRecord synth_sequence(const SynthConfig& cfg) {
    if (cfg.frame_w < 2 || cfg.frame_h < 2 || cfg.length < 1) {
        throw std::invalid_argument("synth_sequence: frame size and length must be positive");
    }
    if (cfg.min_object < 1 || cfg.max_object < cfg.min_object) {
        throw std::invalid_argument("synth_sequence: bad object size range");
    }
    if (cfg.max_object > cfg.frame_w || cfg.max_object > cfg.frame_h) {
        throw std::invalid_argument("synth_sequence: object larger than frame (" +
                                    std::to_string(cfg.max_object) + " vs " +
                                    std::to_string(cfg.frame_w) + "x" +
                                    std::to_string(cfg.frame_h) + ")");
    }
    if (!(cfg.min_speed >= 0.0) || cfg.max_speed < cfg.min_speed) {
        throw std::invalid_argument("synth_sequence: bad speed range");
    }

    Rng rng(cfg.seed);
    const int obj_w = static_cast<int>(rng.uniform_int(cfg.min_object, cfg.max_object));
    const int obj_h = static_cast<int>(rng.uniform_int(cfg.min_object, cfg.max_object));
    double vx = rng.uniform(cfg.min_speed, cfg.max_speed) * (rng.uniform() < 0.5 ? -1.0 : 1.0);
    double vy = rng.uniform(cfg.min_speed, cfg.max_speed) * (rng.uniform() < 0.5 ? -1.0 : 1.0);
    const double max_x = static_cast<double>(cfg.frame_w - obj_w);
    const double max_y = static_cast<double>(cfg.frame_h - obj_h);
    double x = rng.uniform(0.0, max_x);
    double y = rng.uniform(0.0, max_y);

    // static textured background, quantized to the 8-bit grid
    Image background(cfg.frame_h, cfg.frame_w, 3);
    for (int iy = 0; iy < cfg.frame_h; ++iy) {
        for (int ix = 0; ix < cfg.frame_w; ++ix) {
            for (int k = 0; k < 3; ++k) {
                background.at(iy, ix, k) =
                    quantize(cfg.background_level + rng.normal(0.0, cfg.background_sigma));
            }
        }
    }

    SequenceRecord seq;
    seq.name = "synth-" + std::to_string(cfg.seed);
    for (int t = 0; t < cfg.length; ++t) {
        const int rx = static_cast<int>(std::lround(x));
        const int ry = static_cast<int>(std::lround(y));
        Image frame = background;
        for (int iy = ry; iy < ry + obj_h; ++iy) {
            for (int ix = rx; ix < rx + obj_w; ++ix) {
                for (int k = 0; k < 3; ++k) {
                    frame.at(iy, ix, k) =
                        quantize(cfg.color[k] + rng.normal(0.0, cfg.noise_sigma));
                }
            }
        }
        seq.frames.push_back(FrameRef::from_image(std::move(frame)));
        seq.annotations.push_back(BoundingBox{static_cast<double>(rx), static_cast<double>(ry),
                                              static_cast<double>(rx + obj_w),
                                              static_cast<double>(ry + obj_h)});
        seq.visibility.push_back(true);

        x += vx;
        y += vy;
        // reflect off the frame edges
        while (x < 0.0 || x > max_x) {
            if (x < 0.0) x = -x;
            if (x > max_x) x = 2.0 * max_x - x;
            vx = -vx;
            if (max_x == 0.0) { x = 0.0; break; }
        }
        while (y < 0.0 || y > max_y) {
            if (y < 0.0) y = -y;
            if (y > max_y) y = 2.0 * max_y - y;
            vy = -vy;
            if (max_y == 0.0) { y = 0.0; break; }
        }
    }
    return seq;
}

void export_got_style(const SequenceRecord& seq, const fs::path& dir) {
    fs::create_directories(dir);
    char name[16];
    for (int i = 0; i < seq.size(); ++i) {
        std::snprintf(name, sizeof(name), "%08d.png", i + 1);
        save_image(dir / name, seq.frame(i));
    }
    std::ofstream gt(dir / "groundtruth.txt");
    if (!gt) throw std::runtime_error("export_got_style: cannot write groundtruth.txt");
    for (const auto& box : seq.annotations) {
        const Ltwh r = corners_to_ltwh(box);
        gt << format_double(r.left) << ',' << format_double(r.top) << ','
           << format_double(r.width) << ',' << format_double(r.height) << '\n';
    }
    const bool any_absent =
        std::any_of(seq.visibility.begin(), seq.visibility.end(), [](bool v) { return !v; });
    if (any_absent) {
        std::ofstream ab(dir / "absence.label");
        for (bool v : seq.visibility) ab << (v ? 0 : 1) << '\n';
    }
}

}  // namespace sietrack
