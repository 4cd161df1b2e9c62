#include "pb/plot.hpp"

#include "pb/errors.hpp"

#include <algorithm>
#include <array>
#include <cstdio>

namespace pb {

namespace {

constexpr std::array<const char *, 8> kPalette = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e",
                                                  "#9467bd", "#8c564b", "#e377c2", "#17becf"};

std::string escape(const std::string &s) {
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

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.3f", v);
  return buf;
}

} // namespace

PlotArea plot_area(const PlotOptions &opts) {
  return PlotArea{70.0, 30.0, opts.width - 150.0, opts.height - 50.0};
}

std::string render_svg(std::span<const PlotSeries> series, const PlotOptions &opts) {
  if (series.empty()) {
    throw Error("nothing to plot");
  }
  if (opts.width < 240 || opts.height < 120) {
    throw RangeError("plot must be at least 240x120");
  }
  std::vector<DistanceProfile> profiles;
  for (const auto &s : series) {
    s.profile.validate();
    profiles.push_back(opts.normalize ? normalize_profile(s.profile) : s.profile);
  }
  double y_min = 0.0, y_max = 1.0;
  if (!opts.normalize) {
    y_max = 0.0;
    for (const auto &p : profiles) {
      y_min = std::min(y_min, *std::min_element(p.values.begin(), p.values.end()));
      y_max = std::max(y_max, *std::max_element(p.values.begin(), p.values.end()));
    }
    if (y_max <= y_min) y_max = y_min + 1.0;
  }
  const PlotArea a = plot_area(opts);
  auto px = [&](double t) { return a.left + t * (a.right - a.left); };
  auto py = [&](double v) { return a.bottom - (v - y_min) / (y_max - y_min) * (a.bottom - a.top); };

  std::string svg;
  svg += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + std::to_string(opts.width) + "\" height=\"" +
         std::to_string(opts.height) + "\" viewBox=\"0 0 " + std::to_string(opts.width) + " " +
         std::to_string(opts.height) + "\">\n";
  svg += "<rect x=\"0\" y=\"0\" width=\"" + std::to_string(opts.width) + "\" height=\"" +
         std::to_string(opts.height) + "\" fill=\"white\"/>\n";
  if (!opts.title.empty()) {
    svg += "<text x=\"" + num((a.left + a.right) / 2) + "\" y=\"18\" text-anchor=\"middle\" font-size=\"14\">" +
           escape(opts.title) + "</text>\n";
  }
  // Axes and ticks.
  svg += "<line class=\"axis\" x1=\"" + num(a.left) + "\" y1=\"" + num(a.bottom) + "\" x2=\"" + num(a.right) +
         "\" y2=\"" + num(a.bottom) + "\" stroke=\"black\"/>\n";
  svg += "<line class=\"axis\" x1=\"" + num(a.left) + "\" y1=\"" + num(a.top) + "\" x2=\"" + num(a.left) +
         "\" y2=\"" + num(a.bottom) + "\" stroke=\"black\"/>\n";
  for (int i = 0; i <= 4; ++i) {
    const double t = i / 4.0;
    const double v = y_min + t * (y_max - y_min);
    svg += "<text x=\"" + num(px(t)) + "\" y=\"" + num(a.bottom + 16) + "\" text-anchor=\"middle\" font-size=\"11\">" +
           num(t) + "</text>\n";
    svg += "<text x=\"" + num(a.left - 6) + "\" y=\"" + num(py(v) + 4) + "\" text-anchor=\"end\" font-size=\"11\">" +
           num(v) + "</text>\n";
  }
  svg += "<text class=\"xlabel\" x=\"" + num((a.left + a.right) / 2) + "\" y=\"" + num(opts.height - 10.0) +
         "\" text-anchor=\"middle\" font-size=\"12\">" + escape(opts.x_label) + "</text>\n";
  svg += "<text class=\"ylabel\" x=\"16\" y=\"" + num((a.top + a.bottom) / 2) +
         "\" text-anchor=\"middle\" font-size=\"12\" transform=\"rotate(-90 16 " + num((a.top + a.bottom) / 2) +
         ")\">" + escape(opts.y_label) + "</text>\n";

  for (std::size_t s = 0; s < profiles.size(); ++s) {
    const auto &p = profiles[s];
    const char *color = kPalette[s % kPalette.size()];
    std::string points;
    for (std::size_t i = 0; i < p.size(); ++i) {
      if (i) points += ' ';
      points += num(px(p.axis[i])) + "," + num(py(p.values[i]));
    }
    if (p.size() == 1) {
      points += " " + num(px(1.0)) + "," + num(py(p.values[0]));
    }
    svg += "<polyline class=\"series\" data-label=\"" + escape(series[s].label) + "\" fill=\"none\" stroke=\"" +
           color + "\" stroke-width=\"1.5\" points=\"" + points + "\"/>\n";
    const double ly = a.top + 14.0 * static_cast<double>(s);
    svg += "<rect x=\"" + num(a.right + 12) + "\" y=\"" + num(ly) + "\" width=\"12\" height=\"3\" fill=\"" + color +
           "\"/>\n";
    svg += "<text x=\"" + num(a.right + 28) + "\" y=\"" + num(ly + 5) + "\" font-size=\"11\">" +
           escape(series[s].label) + "</text>\n";
  }
  svg += "</svg>\n";
  return svg;
}

} // namespace pb
