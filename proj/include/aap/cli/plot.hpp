#pragma once

#include <algorithm>
#include <fstream>

#include "aap/eval/metrics.hpp"

namespace aap::cli {

// Minimal SVG line chart: success rate against one drift axis, one line per
// summary, shaded +-1 std band. No plotting dependency is worth pulling in
// for a fixed two-axis chart.
struct PlotSeries {
  std::string label;
  std::vector<double> x, mean, stddev;
};

inline std::string svg_chart(const std::string& title, const std::string& x_label,
                             const std::vector<PlotSeries>& series) {
  if (series.empty()) throw std::invalid_argument("svg_chart: no series");
  const double W = 720, H = 420, ml = 64, mr = 24, mt = 40, mb = 56;
  const double pw = W - ml - mr, ph = H - mt - mb;
  double xmin = 1e300, xmax = -1e300;
  for (const auto& s : series)
    for (double x : s.x) {
      xmin = std::min(xmin, x);
      xmax = std::max(xmax, x);
    }
  if (xmin == xmax) {
    xmin -= 1.0;
    xmax += 1.0;
  }
  auto px = [&](double x) { return ml + (x - xmin) / (xmax - xmin) * pw; };
  auto py = [&](double y) { return mt + (1.0 - std::clamp(y, 0.0, 1.0)) * ph; };
  static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"};

  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H
     << "\" viewBox=\"0 0 " << W << " " << H << "\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  os << "<text x=\"" << W / 2 << "\" y=\"22\" text-anchor=\"middle\" font-family=\"sans-serif\" "
        "font-size=\"15\">" << title << "</text>\n";
  // axes and gridlines
  for (int i = 0; i <= 5; ++i) {
    const double y = py(i / 5.0);
    os << "<line x1=\"" << ml << "\" y1=\"" << y << "\" x2=\"" << W - mr << "\" y2=\"" << y
       << "\" stroke=\"#dddddd\"/>\n";
    os << "<text x=\"" << ml - 8 << "\" y=\"" << y + 4
       << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">" << i / 5.0
       << "</text>\n";
  }
  // x ticks exactly at the drift grid values
  std::vector<double> ticks = series[0].x;
  std::sort(ticks.begin(), ticks.end());
  ticks.erase(std::unique(ticks.begin(), ticks.end()), ticks.end());
  for (double t : ticks) {
    os << "<line x1=\"" << px(t) << "\" y1=\"" << mt << "\" x2=\"" << px(t) << "\" y2=\""
       << H - mb << "\" stroke=\"#eeeeee\"/>\n";
    os << "<text x=\"" << px(t) << "\" y=\"" << H - mb + 16
       << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\">" << t
       << "</text>\n";
  }
  os << "<text x=\"" << W / 2 << "\" y=\"" << H - 14
     << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">" << x_label
     << "</text>\n";
  os << "<text x=\"16\" y=\"" << mt + ph / 2
     << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\" "
        "transform=\"rotate(-90 16 " << mt + ph / 2 << ")\">success rate</text>\n";

  for (size_t si = 0; si < series.size(); ++si) {
    const PlotSeries& s = series[si];
    const char* color = colors[si % 6];
    // order points by x
    std::vector<size_t> idx(s.x.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(), [&](size_t a, size_t b) { return s.x[a] < s.x[b]; });
    // std band
    os << "<polygon fill=\"" << color << "\" fill-opacity=\"0.15\" stroke=\"none\" points=\"";
    for (size_t k : idx) os << px(s.x[k]) << "," << py(s.mean[k] + s.stddev[k]) << " ";
    for (auto it = idx.rbegin(); it != idx.rend(); ++it)
      os << px(s.x[*it]) << "," << py(s.mean[*it] - s.stddev[*it]) << " ";
    os << "\"/>\n";
    os << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"2\" points=\"";
    for (size_t k : idx) os << px(s.x[k]) << "," << py(s.mean[k]) << " ";
    os << "\"/>\n";
    for (size_t k : idx)
      os << "<circle cx=\"" << px(s.x[k]) << "\" cy=\"" << py(s.mean[k]) << "\" r=\"3\" fill=\""
         << color << "\"/>\n";
    os << "<rect x=\"" << ml + 10 << "\" y=\"" << mt + 10 + 18 * si
       << "\" width=\"12\" height=\"3\" fill=\"" << color << "\"/>\n";
    os << "<text x=\"" << ml + 28 << "\" y=\"" << mt + 16 + 18 * si
       << "\" font-family=\"sans-serif\" font-size=\"12\">" << s.label << "</text>\n";
  }
  os << "</svg>\n";
  return os.str();
}

}  // namespace aap::cli
