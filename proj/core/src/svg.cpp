#include "rangan/svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "rangan/errors.hpp"

namespace rangan {
namespace {

constexpr double kWidth = 960.0, kHeight = 320.0;
constexpr double kLeft = 56.0, kRight = 16.0, kTop = 16.0, kBottom = 36.0;

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.3f", v);
    return buf;
}

}  // namespace

std::string render_score_svg(std::span<const double> scores,
                             std::span<const std::uint8_t> labels, double threshold) {
    if (scores.empty()) throw ContractError("render_score_svg: empty score trace");
    if (labels.size() != scores.size())
        throw ContractError("render_score_svg: labels length differs from scores");

    double lo = scores[0], hi = scores[0];
    for (double s : scores) {
        lo = std::min(lo, s);
        hi = std::max(hi, s);
    }
    lo = std::min(lo, threshold);
    hi = std::max(hi, threshold);
    if (hi == lo) hi = lo + 1.0;
    const double pad = 0.05 * (hi - lo);
    lo -= pad;
    hi += pad;

    const double plot_w = kWidth - kLeft - kRight;
    const double plot_h = kHeight - kTop - kBottom;
    const double n = static_cast<double>(scores.size());
    auto sx = [&](double i) { return kLeft + (n > 1 ? i / (n - 1.0) : 0.5) * plot_w; };
    auto sy = [&](double v) { return kTop + (1.0 - (v - lo) / (hi - lo)) * plot_h; };

    std::ostringstream out;
    out << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
        << "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"" << kWidth
        << "\" height=\"" << kHeight << "\" viewBox=\"0 0 " << kWidth << " " << kHeight
        << "\">\n"
        << "  <rect x=\"0\" y=\"0\" width=\"" << kWidth << "\" height=\"" << kHeight
        << "\" fill=\"white\"/>\n";

    // shaded anomalous runs
    std::size_t i = 0;
    while (i < labels.size()) {
        if (!labels[i]) {
            ++i;
            continue;
        }
        std::size_t j = i;
        while (j + 1 < labels.size() && labels[j + 1]) ++j;
        const double x0 = sx(static_cast<double>(i));
        const double x1 = sx(static_cast<double>(j));
        out << "  <rect x=\"" << fmt(x0) << "\" y=\"" << fmt(kTop) << "\" width=\""
            << fmt(std::max(1.0, x1 - x0)) << "\" height=\"" << fmt(plot_h)
            << "\" fill=\"#fdd\" stroke=\"none\"/>\n";
        i = j + 1;
    }

    // axes
    out << "  <line x1=\"" << fmt(kLeft) << "\" y1=\"" << fmt(kTop) << "\" x2=\"" << fmt(kLeft)
        << "\" y2=\"" << fmt(kTop + plot_h) << "\" stroke=\"#444\" stroke-width=\"1\"/>\n"
        << "  <line x1=\"" << fmt(kLeft) << "\" y1=\"" << fmt(kTop + plot_h) << "\" x2=\""
        << fmt(kLeft + plot_w) << "\" y2=\"" << fmt(kTop + plot_h)
        << "\" stroke=\"#444\" stroke-width=\"1\"/>\n";

    // threshold
    out << "  <line x1=\"" << fmt(kLeft) << "\" y1=\"" << fmt(sy(threshold)) << "\" x2=\""
        << fmt(kLeft + plot_w) << "\" y2=\"" << fmt(sy(threshold))
        << "\" stroke=\"#c33\" stroke-width=\"1\" stroke-dasharray=\"6,4\"/>\n";

    // the score trace
    out << "  <polyline fill=\"none\" stroke=\"#1f77b4\" stroke-width=\"1.2\" points=\"";
    for (std::size_t p = 0; p < scores.size(); ++p) {
        if (p) out << " ";
        out << fmt(sx(static_cast<double>(p))) << "," << fmt(sy(scores[p]));
    }
    out << "\"/>\n";

    out << "  <text x=\"" << fmt(kLeft) << "\" y=\"" << fmt(kHeight - 12.0)
        << "\" font-family=\"sans-serif\" font-size=\"12\" fill=\"#444\">window index</text>\n"
        << "  <text x=\"8\" y=\"" << fmt(kTop + 12.0)
        << "\" font-family=\"sans-serif\" font-size=\"12\" fill=\"#444\">score</text>\n"
        << "</svg>\n";
    return out.str();
}

}  // namespace rangan
