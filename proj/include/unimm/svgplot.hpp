#pragma once

#include <string>
#include <utility>
#include <vector>

namespace unimm {

struct PlotSeries {
  std::string name;
  std::vector<double> x;
  std::vector<double> y;
};

std::string line_chart_svg(const std::vector<PlotSeries>& series,
                           const std::string& title, const std::string& x_label,
                           const std::string& y_label);

std::string bar_chart_svg(const std::vector<std::pair<std::string, double>>& bars,
                          const std::string& title);

}  // namespace unimm
