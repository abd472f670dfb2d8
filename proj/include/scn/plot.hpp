#pragma once

#include <string>
#include <vector>

#include "scn/aggregate.hpp"

namespace scn {

struct PlotOptions {
    std::string title;
    std::string x_label = "timesteps";
    std::string y_label = "episodic reward";
    int width = 640;
    int height = 420;
};

/// SVG line chart: one polyline per band for the mean and a translucent
/// polygon for mean +- std.
std::string render_svg(const std::vector<Band>& bands, const PlotOptions& opt = {});

}  // namespace scn
