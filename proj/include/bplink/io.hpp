#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "bplink/config.hpp"
#include "bplink/errors.hpp"

namespace bplink {

inline std::string csv_number(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

// CSV artifact with the resolved config embedded as '# '-prefixed header
// lines, so every output file re-parses to the exact run that produced it.
inline std::string render_csv(const RunConfig& resolved, const std::string& column_header,
                              const std::vector<std::string>& rows) {
  std::string out;
  std::istringstream cfg(to_text(resolved));
  std::string line;
  while (std::getline(cfg, line)) out += "# " + line + "\n";
  out += column_header + "\n";
  for (const auto& r : rows) out += r + "\n";
  return out;
}

// Re-parses the '# ' header of an emitted CSV back into a RunConfig.
inline RunConfig parse_csv_header(const std::string& csv_text) {
  std::istringstream in(csv_text);
  std::string line, cfg_text;
  while (std::getline(in, line)) {
    if (line.rfind("# ", 0) != 0) break;
    cfg_text += line.substr(2) + "\n";
  }
  return parse_config(cfg_text);
}

inline void write_file(const std::string& path, const std::string& content) {
  std::filesystem::path p(path);
  if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary);
  if (!out) throw ValidationError("cannot open output file '" + path + "'");
  out << content;
}

// ---------------------------------------------------------------------------
// Minimal SVG line/scatter rendering of a CSV series. Pure presentation; no
// analysis happens here.

struct SvgSeries {
  std::string label;
  std::vector<double> x;
  std::vector<double> y;
};

inline std::string render_svg_lines(const std::vector<SvgSeries>& series, const std::string& x_label,
                                    const std::string& y_label, bool scatter = false) {
  const double width = 860, height = 480, ml = 64, mr = 16, mt = 16, mb = 44;
  double xmin = 0, xmax = 1, ymin = 0, ymax = 1;
  bool first = true;
  for (const auto& s : series)
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) continue;
      if (first) {
        xmin = xmax = s.x[i];
        ymin = ymax = s.y[i];
        first = false;
      }
      xmin = std::min(xmin, s.x[i]);
      xmax = std::max(xmax, s.x[i]);
      ymin = std::min(ymin, s.y[i]);
      ymax = std::max(ymax, s.y[i]);
    }
  if (xmax == xmin) xmax = xmin + 1;
  if (ymax == ymin) ymax = ymin + 1;
  ymin = std::min(ymin, 0.0);
  auto px = [&](double x) { return ml + (x - xmin) / (xmax - xmin) * (width - ml - mr); };
  auto py = [&](double y) { return height - mb - (y - ymin) / (ymax - ymin) * (height - mt - mb); };

  static const char* palette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e",
                                  "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};
  std::string svg = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + csv_number(width) +
                    "\" height=\"" + csv_number(height) + "\">\n";
  svg += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  // axes
  svg += "<line x1=\"" + csv_number(ml) + "\" y1=\"" + csv_number(height - mb) + "\" x2=\"" +
         csv_number(width - mr) + "\" y2=\"" + csv_number(height - mb) +
         "\" stroke=\"black\"/>\n";
  svg += "<line x1=\"" + csv_number(ml) + "\" y1=\"" + csv_number(mt) + "\" x2=\"" +
         csv_number(ml) + "\" y2=\"" + csv_number(height - mb) + "\" stroke=\"black\"/>\n";
  for (int t = 0; t <= 5; ++t) {
    double fx = xmin + (xmax - xmin) * t / 5.0;
    double fy = ymin + (ymax - ymin) * t / 5.0;
    svg += "<text x=\"" + csv_number(px(fx)) + "\" y=\"" + csv_number(height - mb + 18) +
           "\" font-size=\"11\" text-anchor=\"middle\">" + csv_number(fx) + "</text>\n";
    svg += "<text x=\"" + csv_number(ml - 6) + "\" y=\"" + csv_number(py(fy) + 4) +
           "\" font-size=\"11\" text-anchor=\"end\">" + csv_number(fy) + "</text>\n";
  }
  svg += "<text x=\"" + csv_number((ml + width - mr) / 2) + "\" y=\"" +
         csv_number(height - 8) + "\" font-size=\"13\" text-anchor=\"middle\">" + x_label +
         "</text>\n";
  svg += "<text x=\"14\" y=\"" + csv_number((mt + height - mb) / 2) +
         "\" font-size=\"13\" text-anchor=\"middle\" transform=\"rotate(-90 14 " +
         csv_number((mt + height - mb) / 2) + ")\">" + y_label + "</text>\n";
  int color = 0;
  double legend_y = mt + 12;
  for (const auto& s : series) {
    const char* stroke = palette[color % 10];
    ++color;
    if (scatter) {
      for (std::size_t i = 0; i < s.x.size(); ++i)
        svg += "<circle cx=\"" + csv_number(px(s.x[i])) + "\" cy=\"" + csv_number(py(s.y[i])) +
               "\" r=\"2.5\" fill=\"" + stroke + "\"/>\n";
    } else {
      std::string pts;
      for (std::size_t i = 0; i < s.x.size(); ++i)
        pts += csv_number(px(s.x[i])) + "," + csv_number(py(s.y[i])) + " ";
      svg += "<polyline fill=\"none\" stroke=\"" + std::string(stroke) +
             "\" stroke-width=\"1.2\" points=\"" + pts + "\"/>\n";
    }
    if (!s.label.empty() && series.size() > 1 && color <= 10) {
      svg += "<text x=\"" + csv_number(width - mr - 150) + "\" y=\"" + csv_number(legend_y) +
             "\" font-size=\"11\" fill=\"" + stroke + "\">" + s.label + "</text>\n";
      legend_y += 14;
    }
  }
  svg += "</svg>\n";
  return svg;
}

}  // namespace bplink
