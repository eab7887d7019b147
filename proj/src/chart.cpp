#include "mgsim/chart.hpp"

#include "mgsim/errors.hpp"
#include "mgsim/io.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>

namespace mgsim {

namespace {

constexpr std::array<const char*, 8> kPalette{"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e",
                                              "#9467bd", "#8c564b", "#e377c2", "#17becf"};

std::string escape(const std::string& s) {
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

std::string num(double v, int digits = 2) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.*f", digits, v);
    return buf;
}

std::string tick_label(double v) {
    if (std::abs(v) < 1e-12) {
        v = 0.0;
    }
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return buf;
}

// "Nice" tick step covering [lo, hi] with about `target` intervals.
double tick_step(double lo, double hi, int target) {
    const double raw = (hi - lo) / target;
    const double mag = std::pow(10.0, std::floor(std::log10(raw)));
    const double f = raw / mag;
    const double nice = f < 1.5 ? 1.0 : f < 3.0 ? 2.0 : f < 7.0 ? 5.0 : 10.0;
    return nice * mag;
}

struct Axis {
    double lo;
    double hi;
    double step;
};

Axis make_axis(double lo, double hi) {
    if (hi - lo < 1e-12 * std::max(1.0, std::abs(hi))) {
        const double pad = std::max(1e-9, std::abs(hi) * 0.05 + (hi == 0.0 ? 1.0 : 0.0));
        lo -= pad;
        hi += pad;
    }
    const double step = tick_step(lo, hi, 5);
    return {std::floor(lo / step) * step, std::ceil(hi / step) * step, step};
}

}  // namespace

std::string chart_svg(const std::vector<Trace>& traces, const ChartStyle& style) {
    if (traces.empty()) {
        throw ConfigError("chart needs at least one trace");
    }
    double xmin = INFINITY, xmax = -INFINITY, ymin = INFINITY, ymax = -INFINITY;
    for (const Trace& t : traces) {
        if (t.x.empty() || t.x.size() != t.y.size()) {
            throw ConfigError("trace '" + t.name + "' has mismatched or empty data");
        }
        for (std::size_t k = 0; k < t.x.size(); ++k) {
            if (!std::isfinite(t.x[k]) || !std::isfinite(t.y[k])) {
                throw ConfigError("trace '" + t.name + "' contains non-finite data");
            }
            xmin = std::min(xmin, t.x[k]);
            xmax = std::max(xmax, t.x[k]);
            ymin = std::min(ymin, t.y[k]);
            ymax = std::max(ymax, t.y[k]);
        }
    }
    for (double m : style.y_markers) {
        if (std::isfinite(m)) {
            ymin = std::min(ymin, m);
            ymax = std::max(ymax, m);
        }
    }
    const Axis ax = make_axis(xmin, xmax);
    const Axis ay = make_axis(ymin, ymax);

    const double w = style.width, h = style.height;
    const double left = 80, right = 170, top = style.title.empty() ? 20 : 40, bottom = 60;
    const double pw = w - left - right, ph = h - top - bottom;
    auto sx = [&](double x) { return left + (x - ax.lo) / (ax.hi - ax.lo) * pw; };
    auto sy = [&](double y) { return top + (1.0 - (y - ay.lo) / (ay.hi - ay.lo)) * ph; };

    std::string s;
    s += "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
    s += "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"" + num(w, 0) + "\" height=\"" +
         num(h, 0) + "\" viewBox=\"0 0 " + num(w, 0) + " " + num(h, 0) + "\">\n";
    s += "<rect x=\"0\" y=\"0\" width=\"" + num(w, 0) + "\" height=\"" + num(h, 0) + "\" fill=\"white\"/>\n";
    if (!style.title.empty()) {
        s += "<text x=\"" + num(left + pw / 2) + "\" y=\"24\" text-anchor=\"middle\" font-family=\"sans-serif\" "
             "font-size=\"16\">" + escape(style.title) + "</text>\n";
    }

    s += "<g stroke=\"#dddddd\" stroke-width=\"1\">\n";
    const int nx = static_cast<int>(std::lround((ax.hi - ax.lo) / ax.step));
    const int ny = static_cast<int>(std::lround((ay.hi - ay.lo) / ay.step));
    for (int k = 0; k <= nx; ++k) {
        const double x = sx(ax.lo + k * ax.step);
        s += "<line x1=\"" + num(x) + "\" y1=\"" + num(top) + "\" x2=\"" + num(x) + "\" y2=\"" + num(top + ph) + "\"/>\n";
    }
    for (int k = 0; k <= ny; ++k) {
        const double y = sy(ay.lo + k * ay.step);
        s += "<line x1=\"" + num(left) + "\" y1=\"" + num(y) + "\" x2=\"" + num(left + pw) + "\" y2=\"" + num(y) + "\"/>\n";
    }
    s += "</g>\n";

    s += "<g font-family=\"sans-serif\" font-size=\"12\" fill=\"black\">\n";
    for (int k = 0; k <= nx; ++k) {
        s += "<text x=\"" + num(sx(ax.lo + k * ax.step)) + "\" y=\"" + num(top + ph + 18) +
             "\" text-anchor=\"middle\">" + tick_label(ax.lo + k * ax.step) + "</text>\n";
    }
    for (int k = 0; k <= ny; ++k) {
        s += "<text x=\"" + num(left - 8) + "\" y=\"" + num(sy(ay.lo + k * ay.step) + 4) +
             "\" text-anchor=\"end\">" + tick_label(ay.lo + k * ay.step) + "</text>\n";
    }
    s += "<text class=\"axis-label\" x=\"" + num(left + pw / 2) + "\" y=\"" + num(h - 14) +
         "\" text-anchor=\"middle\" font-size=\"14\">" + escape(style.x_label) + "</text>\n";
    s += "<text class=\"axis-label\" x=\"18\" y=\"" + num(top + ph / 2) + "\" text-anchor=\"middle\" font-size=\"14\" "
         "transform=\"rotate(-90 18 " + num(top + ph / 2) + ")\">" + escape(style.y_label) + "</text>\n";
    s += "</g>\n";

    s += "<rect x=\"" + num(left) + "\" y=\"" + num(top) + "\" width=\"" + num(pw) + "\" height=\"" + num(ph) +
         "\" fill=\"none\" stroke=\"black\" stroke-width=\"1\"/>\n";

    for (double m : style.y_markers) {
        if (std::isfinite(m)) {
            s += "<line x1=\"" + num(left) + "\" y1=\"" + num(sy(m)) + "\" x2=\"" + num(left + pw) + "\" y2=\"" +
                 num(sy(m)) + "\" stroke=\"#777777\" stroke-dasharray=\"6 4\" stroke-width=\"1\"/>\n";
        }
    }

    for (std::size_t i = 0; i < traces.size(); ++i) {
        const Trace& t = traces[i];
        s += "<polyline fill=\"none\" stroke=\"" + std::string(kPalette[i % kPalette.size()]) +
             "\" stroke-width=\"1.5\" points=\"";
        for (std::size_t k = 0; k < t.x.size(); ++k) {
            s += (k ? " " : "") + num(sx(t.x[k])) + "," + num(sy(t.y[k]));
        }
        s += "\"/>\n";
    }

    s += "<g font-family=\"sans-serif\" font-size=\"12\">\n";
    for (std::size_t i = 0; i < traces.size(); ++i) {
        const double y = top + 10 + 20.0 * static_cast<double>(i);
        s += "<line x1=\"" + num(left + pw + 12) + "\" y1=\"" + num(y) + "\" x2=\"" + num(left + pw + 36) + "\" y2=\"" +
             num(y) + "\" stroke=\"" + kPalette[i % kPalette.size()] + "\" stroke-width=\"2\"/>\n";
        s += "<text x=\"" + num(left + pw + 42) + "\" y=\"" + num(y + 4) + "\">" + escape(traces[i].name) + "</text>\n";
    }
    s += "</g>\n</svg>\n";
    return s;
}

void render_chart(const std::vector<Trace>& traces, const ChartStyle& style, const std::filesystem::path& path) {
    write_file(path, chart_svg(traces, style));
}

}  // namespace mgsim
