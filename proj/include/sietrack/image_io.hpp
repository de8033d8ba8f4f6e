#pragma once

#include <filesystem>

#include "sietrack/geometry.hpp"
#include "sietrack/tensor.hpp"

namespace sietrack {

// Decodes an image file (jpg/png/bmp/...) into an RGB tensor with values
// k/255 for 8-bit channel value k. Throws std::runtime_error when the file
// is missing or undecodable.
Image load_image(const std::filesystem::path& path);

// Quantizes to 8-bit (round, clamp) and encodes by file extension. PNG is
// lossless, so save followed by load reproduces any image whose values
// already lie on the k/255 grid bit-exactly.
void save_image(const std::filesystem::path& path, const Image& image);

// Draws a 2px box outline in-place (RGB color), clipped to the image.
void draw_box(Image& image, const BoundingBox& box, double r, double g, double b);

}  // namespace sietrack
