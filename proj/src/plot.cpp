#include "scn/plot.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "scn/csv.hpp"
#include "scn/types.hpp"

namespace scn {

namespace {

const char* const kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2"};

std::string escape(const std::string& s)
{
    std::string out;
    for (char c : s) {
        switch (c) {
        case '&': out += "&amp;"; break;
        case '<': out += "&lt;"; break;
        case '>': out += "&gt;"; break;
        case '"': out += "&quot;"; break;
        default: out += c;
        }
    }
    return out;
}

std::string num(double x)
{
    std::ostringstream os;
    os.setf(std::ios::fixed);
    os.precision(2);
    os << x;
    return os.str();
}

}  // namespace

std::string render_svg(const std::vector<Band>& bands, const PlotOptions& opt)
{
    double xmin = std::numeric_limits<double>::infinity(), xmax = -xmin;
    double ymin = xmin, ymax = -xmin;
    for (const auto& b : bands) {
        if (b.x.size() != b.mean.size() || b.x.size() != b.std.size())
            throw ConfigError("plot: band '" + b.label + "' has mismatched lengths");
        for (std::size_t i = 0; i < b.x.size(); ++i) {
            xmin = std::min(xmin, b.x[i]);
            xmax = std::max(xmax, b.x[i]);
            ymin = std::min(ymin, b.mean[i] - b.std[i]);
            ymax = std::max(ymax, b.mean[i] + b.std[i]);
        }
    }
    if (!std::isfinite(xmin)) {
        xmin = 0.0;
        xmax = 1.0;
        ymin = 0.0;
        ymax = 1.0;
    }
    if (xmax == xmin)
        xmax = xmin + 1.0;
    if (ymax == ymin) {
        ymin -= 1.0;
        ymax += 1.0;
    }

    const double left = 70, right = 150, top = 40, bottom = 50;
    const double pw = opt.width - left - right;
    const double ph = opt.height - top - bottom;
    const auto px = [&](double x) { return left + (x - xmin) / (xmax - xmin) * pw; };
    const auto py = [&](double y) { return top + (ymax - y) / (ymax - ymin) * ph; };

    std::ostringstream os;
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << opt.width << "\" height=\"" << opt.height
       << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
    os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    os << "<text x=\"" << num(opt.width / 2.0) << "\" y=\"20\" text-anchor=\"middle\" font-size=\"14\">"
       << escape(opt.title) << "</text>\n";
    os << "<rect x=\"" << num(left) << "\" y=\"" << num(top) << "\" width=\"" << num(pw) << "\" height=\""
       << num(ph) << "\" fill=\"none\" stroke=\"black\"/>\n";
    for (int i = 0; i <= 4; ++i) {
        const double xv = xmin + (xmax - xmin) * i / 4.0;
        const double yv = ymin + (ymax - ymin) * i / 4.0;
        os << "<text x=\"" << num(px(xv)) << "\" y=\"" << num(top + ph + 16) << "\" text-anchor=\"middle\">"
           << format_double(std::round(xv * 1000.0) / 1000.0) << "</text>\n";
        os << "<text x=\"" << num(left - 6) << "\" y=\"" << num(py(yv) + 4) << "\" text-anchor=\"end\">"
           << format_double(std::round(yv * 1000.0) / 1000.0) << "</text>\n";
    }
    os << "<text x=\"" << num(left + pw / 2) << "\" y=\"" << num(opt.height - 10.0)
       << "\" text-anchor=\"middle\">" << escape(opt.x_label) << "</text>\n";
    os << "<text transform=\"translate(16," << num(top + ph / 2) << ") rotate(-90)\" text-anchor=\"middle\">"
       << escape(opt.y_label) << "</text>\n";

    for (std::size_t k = 0; k < bands.size(); ++k) {
        const Band& b = bands[k];
        const char* color = kPalette[k % std::size(kPalette)];
        if (b.x.empty())
            continue;
        os << "<polygon fill=\"" << color << "\" fill-opacity=\"0.2\" stroke=\"none\" points=\"";
        for (std::size_t i = 0; i < b.x.size(); ++i)
            os << num(px(b.x[i])) << ',' << num(py(b.mean[i] + b.std[i])) << ' ';
        for (std::size_t i = b.x.size(); i-- > 0;)
            os << num(px(b.x[i])) << ',' << num(py(b.mean[i] - b.std[i])) << ' ';
        os << "\"/>\n";
        os << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"2\" points=\"";
        for (std::size_t i = 0; i < b.x.size(); ++i)
            os << (i ? " " : "") << num(px(b.x[i])) << ',' << num(py(b.mean[i]));
        os << "\"/>\n";
        const double ly = top + 14.0 + 18.0 * static_cast<double>(k);
        os << "<line x1=\"" << num(left + pw + 10) << "\" y1=\"" << num(ly) << "\" x2=\"" << num(left + pw + 30)
           << "\" y2=\"" << num(ly) << "\" stroke=\"" << color << "\" stroke-width=\"2\"/>\n";
        os << "<text x=\"" << num(left + pw + 34) << "\" y=\"" << num(ly + 4) << "\">" << escape(b.label)
           << "</text>\n";
    }
    os << "</svg>\n";
    return os.str();
}

}  // namespace scn
