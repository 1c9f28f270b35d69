#pragma once

// Minimal self-contained SVG line charts for the report command.

#include <string>
#include <vector>

namespace qdal::svg {

struct Series {
    std::string name;
    std::vector<double> x;
    std::vector<double> y;
};

struct LineChart {
    std::string title;
    std::string x_label;
    std::string y_label;
    std::vector<Series> series;
    int width = 640;
    int height = 400;
};

std::string render(const LineChart& chart);

}  // namespace qdal::svg
