#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace polseg {

struct PlotSeries {
    std::string name;
    std::vector<double> x;
    std::vector<double> y;
};

struct LinePlot {
    std::string title;
    std::string x_label;
    std::string y_label;
    std::vector<PlotSeries> series;
    int width = 640;
    int height = 400;
};

/// Renders axes, tick labels, one polyline per series and a legend to an
/// RGB PNG. Text uses a built-in 5x7 bitmap font (upper case, digits and a
/// few symbols).
void write_line_plot(const LinePlot& plot, const std::filesystem::path& path);

}  // namespace polseg
