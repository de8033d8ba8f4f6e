#include "sietrack/image_io.hpp"

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace sietrack {

Image load_image(const std::filesystem::path& path) {
    cv::Mat bgr = cv::imread(path.string(), cv::IMREAD_COLOR);
    if (bgr.empty()) {
        throw std::runtime_error("load_image: cannot read " + path.string());
    }
    Image out(bgr.rows, bgr.cols, 3);
    for (int y = 0; y < bgr.rows; ++y) {
        const uint8_t* row = bgr.ptr<uint8_t>(y);
        for (int x = 0; x < bgr.cols; ++x) {
            out.at(y, x, 0) = row[3 * x + 2] / 255.0;
            out.at(y, x, 1) = row[3 * x + 1] / 255.0;
            out.at(y, x, 2) = row[3 * x + 0] / 255.0;
        }
    }
    return out;
}

void save_image(const std::filesystem::path& path, const Image& image) {
    if (image.n() != 1 || image.c() != 3) {
        throw std::invalid_argument("save_image: expected 1xHxWx3, got " + image.shape_str());
    }
    cv::Mat bgr(image.h(), image.w(), CV_8UC3);
    auto q = [](double v) {
        return static_cast<uint8_t>(std::clamp(std::lround(v * 255.0), 0l, 255l));
    };
    for (int y = 0; y < image.h(); ++y) {
        uint8_t* row = bgr.ptr<uint8_t>(y);
        for (int x = 0; x < image.w(); ++x) {
            row[3 * x + 2] = q(image.at(y, x, 0));
            row[3 * x + 1] = q(image.at(y, x, 1));
            row[3 * x + 0] = q(image.at(y, x, 2));
        }
    }
    if (!cv::imwrite(path.string(), bgr)) {
        throw std::runtime_error("save_image: cannot write " + path.string());
    }
}

void draw_box(Image& image, const BoundingBox& box, double r, double g, double b) {
    const int x1 = std::max(0, static_cast<int>(std::floor(box.x1)));
    const int y1 = std::max(0, static_cast<int>(std::floor(box.y1)));
    const int x2 = std::min(image.w() - 1, static_cast<int>(std::ceil(box.x2)) - 1);
    const int y2 = std::min(image.h() - 1, static_cast<int>(std::ceil(box.y2)) - 1);
    if (x2 < x1 || y2 < y1) return;
    auto paint = [&](int y, int x) {
        image.at(y, x, 0) = r;
        image.at(y, x, 1) = g;
        image.at(y, x, 2) = b;
    };
    for (int t = 0; t < 2; ++t) {
        const int yt = std::min(y1 + t, image.h() - 1);
        const int yb = std::max(y2 - t, 0);
        for (int x = x1; x <= x2; ++x) {
            paint(yt, x);
            paint(yb, x);
        }
        const int xl = std::min(x1 + t, image.w() - 1);
        const int xr = std::max(x2 - t, 0);
        for (int y = y1; y <= y2; ++y) {
            paint(y, xl);
            paint(y, xr);
        }
    }
}

}  // namespace sietrack
