#include "sietrack/geometry.hpp"

#include <algorithm>
#include <stdexcept>

namespace sietrack {

namespace {

void require_positive(const PatchSize& size, const char* who) {
    if (!(size.w > 0.0) || !(size.h > 0.0)) {
        throw std::invalid_argument(std::string(who) + ": patch size must be strictly positive, got " +
                                    std::to_string(size.w) + "x" + std::to_string(size.h));
    }
}

}  // namespace

RelativeOffsets encode_offsets(const BoundingBox& box, const PatchSize& size) {
    require_positive(size, "encode_offsets");
    RelativeOffsets out;
    out[0] = box.x1 / size.w - 0.5;
    out[1] = box.y1 / size.h - 0.5;
    out[2] = box.x2 / size.w - 0.5;
    out[3] = box.y2 / size.h - 0.5;
    return out;
}

BoundingBox decode_offsets(const RelativeOffsets& o, const PatchSize& size) {
    require_positive(size, "decode_offsets");
    return BoundingBox{o[0] * size.w + size.w / 2.0,
                       o[1] * size.h + size.h / 2.0,
                       o[2] * size.w + size.w / 2.0,
                       o[3] * size.h + size.h / 2.0};
}

double iou(const BoundingBox& a, const BoundingBox& b) {
    const double iw = std::min(a.x2, b.x2) - std::max(a.x1, b.x1);
    const double ih = std::min(a.y2, b.y2) - std::max(a.y1, b.y1);
    if (iw <= 0.0 || ih <= 0.0) return 0.0;
    const double inter = iw * ih;
    const double uni = a.area() + b.area() - inter;
    if (uni <= 0.0) return 0.0;
    return inter / uni;
}

BoundingBox clamp_box(const BoundingBox& box, const PatchSize& frame) {
    require_positive(frame, "clamp_box");
    auto clip = [](double v, double lo, double hi) { return std::min(std::max(v, lo), hi); };
    return BoundingBox{clip(box.x1, 0.0, frame.w), clip(box.y1, 0.0, frame.h),
                       clip(box.x2, 0.0, frame.w), clip(box.y2, 0.0, frame.h)};
}

Ltwh corners_to_ltwh(const BoundingBox& box) {
    return Ltwh{box.x1, box.y1, box.x2 - box.x1, box.y2 - box.y1};
}

BoundingBox ltwh_to_corners(const Ltwh& r) {
    if (r.width < 0.0 || r.height < 0.0) {
        throw std::invalid_argument("ltwh_to_corners: negative width or height (" +
                                    std::to_string(r.width) + "x" + std::to_string(r.height) + ")");
    }
    return BoundingBox{r.left, r.top, r.left + r.width, r.top + r.height};
}

}  // namespace sietrack
