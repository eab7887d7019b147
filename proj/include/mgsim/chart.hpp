#pragma once

// Deterministic SVG line charts.

#include <filesystem>
#include <string>
#include <vector>

namespace mgsim {

struct Trace {
    std::string name;
    std::vector<double> x;
    std::vector<double> y;
};

struct ChartStyle {
    std::string title;
    std::string x_label = "x";
    std::string y_label = "y";
    int width = 800;
    int height = 480;
    /// Horizontal reference lines, e.g. a 3% limit.
    std::vector<double> y_markers;
};

/// Builds the SVG document. Throws ConfigError for an empty trace list, a
/// trace whose x and y differ in length or are empty, or non-finite data.
[[nodiscard]] std::string chart_svg(const std::vector<Trace>& traces, const ChartStyle& style);

/// chart_svg written atomically to `path`; nothing is written on error.
void render_chart(const std::vector<Trace>& traces, const ChartStyle& style, const std::filesystem::path& path);

}  // namespace mgsim
