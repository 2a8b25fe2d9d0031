#include "rewts/svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

namespace rewts::svg {
namespace {

const char* const kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"};

std::string escape(const std::string& s) {
    std::string out;
    for (const char ch : s) {
        switch (ch) {
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '&': out += "&amp;"; break;
            case '"': out += "&quot;"; break;
            default: out += ch;
        }
    }
    return out;
}

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4g", v);
    return buf;
}

std::string coord(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    return buf;
}

}  // namespace

std::string line_chart(const std::vector<Series>& series, const ChartOptions& opt) {
    const double left = 70, right = 150, top = 40, bottom = 50;
    const double pw = opt.width - left - right, ph = opt.height - top - bottom;
    auto usable = [&](double x, double y) { return std::isfinite(x) && std::isfinite(y) && (!opt.log_y || y > 0); };
    auto ty = [&](double y) { return opt.log_y ? std::log10(y) : y; };

    double x0 = std::numeric_limits<double>::infinity(), x1 = -x0, y0 = x0, y1 = -x0;
    for (const auto& s : series)
        for (std::size_t i = 0; i < std::min(s.x.size(), s.y.size()); ++i)
            if (usable(s.x[i], s.y[i])) {
                x0 = std::min(x0, s.x[i]);
                x1 = std::max(x1, s.x[i]);
                y0 = std::min(y0, ty(s.y[i]));
                y1 = std::max(y1, ty(s.y[i]));
            }
    if (!std::isfinite(x0)) x0 = 0, x1 = 1, y0 = 0, y1 = 1;
    if (x1 == x0) x1 = x0 + 1;
    if (y1 == y0) y1 = y0 + 1;
    auto px = [&](double x) { return left + (x - x0) / (x1 - x0) * pw; };
    auto py = [&](double y) { return top + ph - (ty(y) - y0) / (y1 - y0) * ph; };

    std::ostringstream o;
    o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << opt.width << "\" height=\"" << opt.height
      << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
    o << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    o << "<text x=\"" << opt.width / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">" << escape(opt.title)
      << "</text>\n";
    o << "<rect x=\"" << left << "\" y=\"" << top << "\" width=\"" << pw << "\" height=\"" << ph
      << "\" fill=\"none\" stroke=\"#444\"/>\n";
    for (int k = 0; k <= 4; ++k) {
        const double fx = x0 + (x1 - x0) * k / 4.0;
        const double fy = y0 + (y1 - y0) * k / 4.0;
        const double gx = left + pw * k / 4.0, gy = top + ph - ph * k / 4.0;
        o << "<text x=\"" << coord(gx) << "\" y=\"" << coord(top + ph + 16) << "\" text-anchor=\"middle\">" << fmt(fx)
          << "</text>\n";
        o << "<text x=\"" << coord(left - 6) << "\" y=\"" << coord(gy + 4) << "\" text-anchor=\"end\">"
          << fmt(opt.log_y ? std::pow(10.0, fy) : fy) << "</text>\n";
        o << "<line x1=\"" << coord(left) << "\" x2=\"" << coord(left + pw) << "\" y1=\"" << coord(gy) << "\" y2=\""
          << coord(gy) << "\" stroke=\"#ddd\"/>\n";
    }
    o << "<text x=\"" << coord(left + pw / 2) << "\" y=\"" << opt.height - 10 << "\" text-anchor=\"middle\">"
      << escape(opt.x_label) << "</text>\n";
    o << "<text transform=\"translate(16," << coord(top + ph / 2) << ") rotate(-90)\" text-anchor=\"middle\">"
      << escape(opt.y_label) << "</text>\n";

    for (std::size_t k = 0; k < series.size(); ++k) {
        const auto& s = series[k];
        const char* colour = kPalette[k % std::size(kPalette)];
        o << "<polyline fill=\"none\" stroke=\"" << colour << "\" stroke-width=\"1.5\" points=\"";
        bool first = true;
        for (std::size_t i = 0; i < std::min(s.x.size(), s.y.size()); ++i) {
            if (!usable(s.x[i], s.y[i])) continue;
            o << (first ? "" : " ") << coord(px(s.x[i])) << ',' << coord(py(s.y[i]));
            first = false;
        }
        o << "\"/>\n";
        const double ly = top + 14 + 18.0 * static_cast<double>(k);
        o << "<line x1=\"" << coord(left + pw + 12) << "\" x2=\"" << coord(left + pw + 32) << "\" y1=\"" << coord(ly)
          << "\" y2=\"" << coord(ly) << "\" stroke=\"" << colour << "\" stroke-width=\"2\"/>\n";
        o << "<text x=\"" << coord(left + pw + 38) << "\" y=\"" << coord(ly + 4) << "\">" << escape(s.name)
          << "</text>\n";
    }
    o << "</svg>\n";
    return o.str();
}

}  // namespace rewts::svg
