#include "unimm/svgplot.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>

namespace unimm {

namespace {

constexpr int kWidth = 720;
constexpr int kHeight = 420;
constexpr int kMargin = 60;

const char* kColors[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728",
                         "#9467bd", "#8c564b", "#e377c2", "#7f7f7f"};

std::string fmt(double v) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

std::string svg_header(const std::string& title) {
  std::string s = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" +
                  std::to_string(kWidth) + "\" height=\"" + std::to_string(kHeight) +
                  "\" viewBox=\"0 0 " + std::to_string(kWidth) + " " +
                  std::to_string(kHeight) + "\">\n";
  s += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  s += "<text x=\"" + std::to_string(kWidth / 2) +
       "\" y=\"24\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"16\">" +
       title + "</text>\n";
  return s;
}

}  // namespace

std::string line_chart_svg(const std::vector<PlotSeries>& series,
                           const std::string& title, const std::string& x_label,
                           const std::string& y_label) {
  double xmin = std::numeric_limits<double>::infinity(), xmax = -xmin;
  double ymin = xmin, ymax = -xmin;
  for (const PlotSeries& s : series) {
    for (double v : s.x) { xmin = std::min(xmin, v); xmax = std::max(xmax, v); }
    for (double v : s.y) { ymin = std::min(ymin, v); ymax = std::max(ymax, v); }
  }
  if (!std::isfinite(xmin)) { xmin = 0; xmax = 1; ymin = 0; ymax = 1; }
  if (xmax == xmin) xmax = xmin + 1;
  if (ymax == ymin) ymax = ymin + 1;

  const double px = kWidth - 2 * kMargin;
  const double py = kHeight - 2 * kMargin;
  auto sx = [&](double v) { return kMargin + (v - xmin) / (xmax - xmin) * px; };
  auto sy = [&](double v) { return kHeight - kMargin - (v - ymin) / (ymax - ymin) * py; };

  std::string out = svg_header(title);
  out += "<g stroke=\"#444\" stroke-width=\"1\">\n";
  out += "<line x1=\"" + fmt(kMargin) + "\" y1=\"" + fmt(kHeight - kMargin) +
         "\" x2=\"" + fmt(kWidth - kMargin) + "\" y2=\"" + fmt(kHeight - kMargin) + "\"/>\n";
  out += "<line x1=\"" + fmt(kMargin) + "\" y1=\"" + fmt(kMargin) + "\" x2=\"" +
         fmt(kMargin) + "\" y2=\"" + fmt(kHeight - kMargin) + "\"/>\n";
  out += "</g>\n";
  out += "<text x=\"" + fmt(kWidth / 2.0) + "\" y=\"" + fmt(kHeight - 16) +
         "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">" +
         x_label + "</text>\n";
  out += "<text x=\"18\" y=\"" + fmt(kHeight / 2.0) +
         "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\" "
         "transform=\"rotate(-90 18 " + fmt(kHeight / 2.0) + ")\">" + y_label + "</text>\n";
  // Axis range labels.
  out += "<text x=\"" + fmt(kMargin) + "\" y=\"" + fmt(kHeight - kMargin + 16) +
         "\" font-family=\"sans-serif\" font-size=\"10\">" + fmt(xmin) + "</text>\n";
  out += "<text x=\"" + fmt(kWidth - kMargin) + "\" y=\"" + fmt(kHeight - kMargin + 16) +
         "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"10\">" +
         fmt(xmax) + "</text>\n";
  out += "<text x=\"" + fmt(kMargin - 6) + "\" y=\"" + fmt(kHeight - kMargin) +
         "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"10\">" +
         fmt(ymin) + "</text>\n";
  out += "<text x=\"" + fmt(kMargin - 6) + "\" y=\"" + fmt(kMargin + 4) +
         "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"10\">" +
         fmt(ymax) + "</text>\n";

  for (size_t i = 0; i < series.size(); ++i) {
    const PlotSeries& s = series[i];
    const char* color = kColors[i % std::size(kColors)];
    std::string pts;
    for (size_t j = 0; j < s.x.size() && j < s.y.size(); ++j) {
      pts += fmt(sx(s.x[j])) + "," + fmt(sy(s.y[j])) + " ";
    }
    out += "<polyline fill=\"none\" stroke=\"" + std::string(color) +
           "\" stroke-width=\"1.5\" points=\"" + pts + "\"/>\n";
    out += "<text x=\"" + fmt(kWidth - kMargin + 4) + "\" y=\"" +
           fmt(kMargin + 14.0 * i) + "\" font-family=\"sans-serif\" font-size=\"10\" fill=\"" +
           color + "\">" + s.name + "</text>\n";
  }
  out += "</svg>\n";
  return out;
}

std::string bar_chart_svg(const std::vector<std::pair<std::string, double>>& bars,
                          const std::string& title) {
  double vmax = 0.0;
  for (const auto& [name, v] : bars) vmax = std::max(vmax, v);
  if (vmax <= 0.0) vmax = 1.0;
  const double px = kWidth - 2 * kMargin;
  const double py = kHeight - 2 * kMargin;
  const double slot = bars.empty() ? px : px / bars.size();

  std::string out = svg_header(title);
  out += "<line x1=\"" + fmt(kMargin) + "\" y1=\"" + fmt(kHeight - kMargin) +
         "\" x2=\"" + fmt(kWidth - kMargin) + "\" y2=\"" + fmt(kHeight - kMargin) +
         "\" stroke=\"#444\"/>\n";
  for (size_t i = 0; i < bars.size(); ++i) {
    const double h = bars[i].second / vmax * py;
    const double x = kMargin + slot * i + slot * 0.15;
    out += "<rect x=\"" + fmt(x) + "\" y=\"" + fmt(kHeight - kMargin - h) +
           "\" width=\"" + fmt(slot * 0.7) + "\" height=\"" + fmt(h) +
           "\" fill=\"#1f77b4\"/>\n";
    out += "<text x=\"" + fmt(x + slot * 0.35) + "\" y=\"" +
           fmt(kHeight - kMargin - h - 4) +
           "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"10\">" +
           fmt(bars[i].second) + "</text>\n";
    out += "<text x=\"" + fmt(x + slot * 0.35) + "\" y=\"" + fmt(kHeight - kMargin + 14) +
           "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"9\" "
           "transform=\"rotate(30 " + fmt(x + slot * 0.35) + " " +
           fmt(kHeight - kMargin + 14) + ")\">" + bars[i].first + "</text>\n";
  }
  out += "</svg>\n";
  return out;
}

}  // namespace unimm
