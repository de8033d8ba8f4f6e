#include "sietrack/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "sietrack/errors.hpp"
#include "sietrack/image_io.hpp"

namespace sietrack {

namespace fs = std::filesystem;

Image FrameRef::load() const {
    if (mem) return *mem;
    return load_image(path);
}

PatchSize SequenceRecord::frame_size(int i) const {
    const auto& ref = frames[static_cast<size_t>(i)];
    if (ref.mem) {
        return PatchSize{static_cast<double>(ref.mem->w()), static_cast<double>(ref.mem->h())};
    }
    const Image img = ref.load();
    return PatchSize{static_cast<double>(img.w()), static_cast<double>(img.h())};
}

namespace {

const std::set<std::string> kImageExtensions = {".jpg", ".jpeg", ".png", ".bmp"};

std::vector<double> parse_csv_line(const std::string& line, const fs::path& file, int lineno,
                                   size_t expected) {
    std::vector<double> out;
    size_t pos = 0;
    while (pos <= line.size()) {
        size_t comma = line.find(',', pos);
        if (comma == std::string::npos) comma = line.size();
        std::string tok = line.substr(pos, comma - pos);
        // trim
        const auto b = tok.find_first_not_of(" \t\r");
        const auto e = tok.find_last_not_of(" \t\r");
        if (b == std::string::npos) {
            throw ParseError(file.string(), lineno, "empty field");
        }
        tok = tok.substr(b, e - b + 1);
        double v = 0.0;
        const auto res = std::from_chars(tok.data(), tok.data() + tok.size(), v);
        if (res.ec != std::errc{} || res.ptr != tok.data() + tok.size()) {
            throw ParseError(file.string(), lineno, "not a number: '" + tok + "'");
        }
        out.push_back(v);
        if (comma == line.size()) break;
        pos = comma + 1;
    }
    if (out.size() != expected) {
        throw ParseError(file.string(), lineno,
                         "expected " + std::to_string(expected) + " fields, got " +
                             std::to_string(out.size()));
    }
    return out;
}

bool blank(const std::string& line) {
    return line.find_first_not_of(" \t\r\n") == std::string::npos;
}

}  // namespace

SequenceRecord load_sequence_dir(const fs::path& dir) {
    if (!fs::is_directory(dir)) {
        throw StructuralError("not a sequence directory: " + dir.string());
    }
    SequenceRecord seq;
    seq.name = dir.filename().string();
    std::vector<fs::path> frame_paths;
    for (const auto& entry : fs::directory_iterator(dir)) {
        if (!entry.is_regular_file()) continue;
        std::string ext = entry.path().extension().string();
        std::transform(ext.begin(), ext.end(), ext.begin(),
                       [](unsigned char ch) { return static_cast<char>(std::tolower(ch)); });
        if (kImageExtensions.count(ext)) frame_paths.push_back(entry.path());
    }
    std::sort(frame_paths.begin(), frame_paths.end());
    for (auto& p : frame_paths) seq.frames.push_back(FrameRef::from_path(std::move(p)));

    const fs::path gt = dir / "groundtruth.txt";
    std::ifstream f(gt);
    if (!f) throw StructuralError("missing groundtruth.txt in " + dir.string());
    std::string line;
    int lineno = 0;
    while (std::getline(f, line)) {
        ++lineno;
        if (blank(line)) continue;
        const auto v = parse_csv_line(line, gt, lineno, 4);
        seq.annotations.push_back(
            ltwh_to_corners(Ltwh{v[0], v[1], std::max(0.0, v[2]), std::max(0.0, v[3])}));
    }
    if (seq.annotations.size() != seq.frames.size()) {
        throw StructuralError(dir.string() + ": " + std::to_string(seq.frames.size()) +
                              " frames but " + std::to_string(seq.annotations.size()) +
                              " annotation lines");
    }
    if (seq.size() < 2) {
        throw StructuralError(dir.string() + ": sequences need at least 2 frames, found " +
                              std::to_string(seq.size()));
    }

    const fs::path absence = dir / "absence.label";
    if (fs::exists(absence)) {
        std::ifstream af(absence);
        lineno = 0;
        while (std::getline(af, line)) {
            ++lineno;
            if (blank(line)) continue;
            const auto v = parse_csv_line(line, absence, lineno, 1);
            if (v[0] != 0.0 && v[0] != 1.0) {
                throw ParseError(absence.string(), lineno, "absence flag must be 0 or 1");
            }
            seq.visibility.push_back(v[0] == 0.0);
        }
        if (seq.visibility.size() != seq.frames.size()) {
            throw StructuralError(dir.string() + ": absence.label has " +
                                  std::to_string(seq.visibility.size()) + " lines for " +
                                  std::to_string(seq.frames.size()) + " frames");
        }
    } else {
        seq.visibility.assign(seq.frames.size(), true);
    }
    return seq;
}

std::vector<SequenceRecord> load_got_style(const fs::path& root) {
    if (!fs::is_directory(root)) {
        throw StructuralError("dataset root is not a directory: " + root.string());
    }
    std::vector<fs::path> dirs;
    for (const auto& entry : fs::directory_iterator(root)) {
        if (entry.is_directory()) dirs.push_back(entry.path());
    }
    std::sort(dirs.begin(), dirs.end());
    std::vector<SequenceRecord> out;
    out.reserve(dirs.size());
    for (const auto& d : dirs) out.push_back(load_sequence_dir(d));
    return out;
}

Image crop_and_resize(const Image& frame, const BoundingBox& region, int out_w, int out_h) {
    if (!(region.width() > 0.0) || !(region.height() > 0.0)) {
        throw std::invalid_argument("crop_and_resize: region has non-positive area");
    }
    if (out_w < 1 || out_h < 1) {
        throw std::invalid_argument("crop_and_resize: output size must be positive");
    }
    Image out(out_h, out_w, 3);
    const double sx = region.width() / out_w;
    const double sy = region.height() / out_h;
    const int W = frame.w(), H = frame.h();
    for (int oy = 0; oy < out_h; ++oy) {
        // continuous source coordinate of this output pixel center
        const double fy = region.y1 + (oy + 0.5) * sy - 0.5;
        const int y0 = static_cast<int>(std::floor(fy));
        const double wy = fy - y0;
        const int ya = std::clamp(y0, 0, H - 1);
        const int yb = std::clamp(y0 + 1, 0, H - 1);
        for (int ox = 0; ox < out_w; ++ox) {
            const double fx = region.x1 + (ox + 0.5) * sx - 0.5;
            const int x0 = static_cast<int>(std::floor(fx));
            const double wx = fx - x0;
            const int xa = std::clamp(x0, 0, W - 1);
            const int xb = std::clamp(x0 + 1, 0, W - 1);
            for (int k = 0; k < 3; ++k) {
                const double top = (1.0 - wx) * frame.at(ya, xa, k) + wx * frame.at(ya, xb, k);
                const double bot = (1.0 - wx) * frame.at(yb, xa, k) + wx * frame.at(yb, xb, k);
                out.at(oy, ox, k) = (1.0 - wy) * top + wy * bot;
            }
        }
    }
    return out;
}

CropBounds detection_crop_bounds(const BoundingBox& target, const PatchSize& frame, int rule) {
    const double wb = target.width();
    const double hb = target.height();
    double wm = wb, hm = hb;
    if (rule == 1) wm = wb / 2.0;  // halved horizontal margin
    if (rule == 2) hm = hb / 2.0;  // halved vertical margin
    return CropBounds{std::max(0.0, target.x1 - wm), std::max(0.0, target.y1 - hm),
                      std::min(target.x2 + wm, frame.w), std::min(target.y2 + hm, frame.h)};
}

PatchPair sample_pair(const SequenceRecord& seq, Rng& rng, int template_size, int detection_size) {
    const int n = seq.size();
    int visible = 0;
    for (bool v : seq.visibility) visible += v ? 1 : 0;
    if (visible < 2) {
        throw UnsampleableSequenceError(seq.name + ": fewer than 2 visible frames");
    }

    for (int attempt = 0; attempt < 100; ++attempt) {
        const int i = static_cast<int>(rng.uniform_int(0, n - 1));
        const int d = static_cast<int>(rng.uniform_int(1, 100));
        const int j = i + d;
        if (j >= n) continue;  // interval overran the sequence; re-draw
        if (!seq.visibility[static_cast<size_t>(i)] || !seq.visibility[static_cast<size_t>(j)]) {
            continue;
        }

        const Image frame_i = seq.frame(i);
        const PatchSize size_i{static_cast<double>(frame_i.w()), static_cast<double>(frame_i.h())};
        const BoundingBox tbox = clamp_box(seq.annotations[static_cast<size_t>(i)], size_i);
        if (!(tbox.area() > 0.0)) continue;

        const Image frame_j = seq.frame(j);
        const PatchSize size_j{static_cast<double>(frame_j.w()), static_cast<double>(frame_j.h())};
        const BoundingBox dbox = clamp_box(seq.annotations[static_cast<size_t>(j)], size_j);
        if (!(dbox.area() > 0.0)) continue;

        const int rule = static_cast<int>(rng.uniform_int(0, 2));
        const CropBounds cb = detection_crop_bounds(dbox, size_j, rule);
        BoundingBox region;
        region.x1 = rng.uniform(cb.left_lo, dbox.x1);
        region.y1 = rng.uniform(cb.top_lo, dbox.y1);
        region.x2 = rng.uniform(dbox.x2, cb.right_hi);
        region.y2 = rng.uniform(dbox.y2, cb.bottom_hi);
        if (!(region.width() > 0.0) || !(region.height() > 0.0)) continue;

        PatchPair pair;
        pair.template_patch = crop_and_resize(frame_i, tbox, template_size, template_size);
        pair.detection_patch = crop_and_resize(frame_j, region, detection_size, detection_size);
        // target corners in resized-patch pixels
        const double sx = detection_size / region.width();
        const double sy = detection_size / region.height();
        const BoundingBox in_patch{(dbox.x1 - region.x1) * sx, (dbox.y1 - region.y1) * sy,
                                   (dbox.x2 - region.x1) * sx, (dbox.y2 - region.y1) * sy};
        pair.label = encode_offsets(in_patch, PatchSize{static_cast<double>(detection_size),
                                                        static_cast<double>(detection_size)});
        pair.sequence = seq.name;
        pair.template_frame = i;
        pair.detection_frame = j;
        pair.crop_region = region;
        return pair;
    }
    throw UnsampleableSequenceError(seq.name + ": no valid pair in 100 attempts");
}

}  // namespace sietrack
