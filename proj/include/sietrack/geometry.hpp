#pragma once

#include <array>
#include <cstddef>

namespace sietrack {

// Continuous pixel coordinates with the origin at the top-left image corner;
// pixel (row i, col j) spans [j, j+1) x [i, i+1).

// Axis-aligned box in corner form. x1/y1 is the top-left corner, x2/y2 the
// bottom-right one. Valid boxes satisfy x1 <= x2 and y1 <= y2; zero-area
// boxes are legal values (they score IoU 0 against everything).
struct BoundingBox {
    double x1 = 0.0;
    double y1 = 0.0;
    double x2 = 0.0;
    double y2 = 0.0;

    double width() const { return x2 - x1; }
    double height() const { return y2 - y1; }
    double area() const { return width() * height(); }
    double center_x() const { return 0.5 * (x1 + x2); }
    double center_y() const { return 0.5 * (y1 + y2); }

    bool operator==(const BoundingBox&) const = default;
};

// Width/height of a patch or frame in pixels.
struct PatchSize {
    double w = 0.0;
    double h = 0.0;

    bool operator==(const PatchSize&) const = default;
};

// Box in (left, top, width, height) form, the tracker's state layout.
struct Ltwh {
    double left = 0.0;
    double top = 0.0;
    double width = 0.0;
    double height = 0.0;

    bool operator==(const Ltwh&) const = default;
};

// [O1, O2, O3, O4]: target corners as fractions of patch width/height
// measured from the patch center. A target fully inside the patch encodes
// with every component in [-0.5, +0.5].
struct RelativeOffsets {
    std::array<double, 4> o{0.0, 0.0, 0.0, 0.0};

    double operator[](int i) const { return o[static_cast<size_t>(i)]; }
    double& operator[](int i) { return o[static_cast<size_t>(i)]; }

    bool operator==(const RelativeOffsets&) const = default;
};

// O_i = corner / patch_extent - 1/2. Throws std::invalid_argument on a
// non-positive patch size.
RelativeOffsets encode_offsets(const BoundingBox& box, const PatchSize& size);

// Exact inverse of encode_offsets: corner = O_i * extent + extent / 2.
BoundingBox decode_offsets(const RelativeOffsets& o, const PatchSize& size);

// Intersection area over union area, in [0, 1]. Degenerate (zero-area)
// boxes yield 0 against any box, including themselves.
double iou(const BoundingBox& a, const BoundingBox& b);

// Clips every coordinate into [0, w] x [0, h]. Preserves corner ordering;
// idempotent. Throws std::invalid_argument on a non-positive frame.
BoundingBox clamp_box(const BoundingBox& box, const PatchSize& frame);

Ltwh corners_to_ltwh(const BoundingBox& box);

// Throws std::invalid_argument on negative width or height.
BoundingBox ltwh_to_corners(const Ltwh& r);

}  // namespace sietrack
