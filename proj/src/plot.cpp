#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include <algorithm>
#include <stdexcept>

#include "sietrack/evaluation.hpp"

namespace sietrack {

namespace {

const cv::Scalar kSeriesColors[] = {
    {180, 60, 20}, {30, 120, 200}, {40, 160, 60}, {150, 60, 160}, {20, 20, 20},
};

}  // namespace

void render_curve_plot(const std::filesystem::path& path, const std::string& title,
                       const std::string& x_label, const std::vector<PlotSeries>& series) {
    if (series.empty()) throw std::invalid_argument("render_curve_plot: no series");
    const int W = 640, H = 480;
    const int ml = 60, mr = 20, mt = 40, mb = 50;  // margins
    cv::Mat canvas(H, W, CV_8UC3, cv::Scalar(255, 255, 255));

    double x_min = 1e300, x_max = -1e300;
    for (const auto& s : series) {
        for (double t : s.curve->thresholds) {
            x_min = std::min(x_min, t);
            x_max = std::max(x_max, t);
        }
    }
    if (!(x_max > x_min)) x_max = x_min + 1.0;
    const double y_min = 0.0, y_max = 1.0;

    auto px = [&](double x) {
        return ml + static_cast<int>((x - x_min) / (x_max - x_min) * (W - ml - mr));
    };
    auto py = [&](double y) {
        return H - mb - static_cast<int>((y - y_min) / (y_max - y_min) * (H - mt - mb));
    };

    // frame, gridlines, tick labels
    cv::rectangle(canvas, {ml, mt}, {W - mr, H - mb}, cv::Scalar(0, 0, 0), 1);
    for (int i = 0; i <= 5; ++i) {
        const double fy = y_min + (y_max - y_min) * i / 5.0;
        cv::line(canvas, {ml, py(fy)}, {W - mr, py(fy)}, cv::Scalar(225, 225, 225), 1);
        char buf[16];
        std::snprintf(buf, sizeof(buf), "%.1f", fy);
        cv::putText(canvas, buf, {8, py(fy) + 4}, cv::FONT_HERSHEY_SIMPLEX, 0.45,
                    cv::Scalar(0, 0, 0), 1, cv::LINE_AA);
        const double fx = x_min + (x_max - x_min) * i / 5.0;
        std::snprintf(buf, sizeof(buf), "%g", fx);
        cv::putText(canvas, buf, {px(fx) - 10, H - mb + 20}, cv::FONT_HERSHEY_SIMPLEX, 0.45,
                    cv::Scalar(0, 0, 0), 1, cv::LINE_AA);
    }
    cv::putText(canvas, title, {ml, mt - 12}, cv::FONT_HERSHEY_SIMPLEX, 0.6, cv::Scalar(0, 0, 0),
                1, cv::LINE_AA);
    cv::putText(canvas, x_label, {W / 2 - 40, H - 12}, cv::FONT_HERSHEY_SIMPLEX, 0.5,
                cv::Scalar(0, 0, 0), 1, cv::LINE_AA);

    for (size_t si = 0; si < series.size(); ++si) {
        const Curve& c = *series[si].curve;
        const cv::Scalar color = kSeriesColors[si % std::size(kSeriesColors)];
        for (size_t i = 1; i < c.thresholds.size(); ++i) {
            cv::line(canvas, {px(c.thresholds[i - 1]), py(c.values[i - 1])},
                     {px(c.thresholds[i]), py(c.values[i])}, color, 2, cv::LINE_AA);
        }
        cv::putText(canvas, series[si].label, {W - mr - 150, mt + 20 + 18 * static_cast<int>(si)},
                    cv::FONT_HERSHEY_SIMPLEX, 0.45, color, 1, cv::LINE_AA);
    }

    if (!cv::imwrite(path.string(), canvas)) {
        throw std::runtime_error("render_curve_plot: cannot write " + path.string());
    }
}

}  // namespace sietrack
