// Copyright (c) 2026, The dlens Authors
// SPDX-License-Identifier: Apache-2.0

#include "dlens/figures.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <map>
#include <vector>

#include "dlens/error.hpp"

namespace dlens {
namespace {

using L = FigureLayout;

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string escape_xml(std::string_view s) {
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

double scale(double v, double lo, double hi, double from, double to) {
  return from + (v - lo) / (hi - lo) * (to - from);
}

class Svg {
 public:
  Svg() {
    out_ = "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" +
           fmt(L::kWidth) + "\" height=\"" + fmt(L::kHeight) + "\" viewBox=\"0 0 " + fmt(L::kWidth) + " " +
           fmt(L::kHeight) + "\" font-family=\"sans-serif\" font-size=\"11\">\n";
    out_ += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  }
  void line(double x1, double y1, double x2, double y2, std::string_view stroke = "#444") {
    out_ += "<line x1=\"" + fmt(x1) + "\" y1=\"" + fmt(y1) + "\" x2=\"" + fmt(x2) + "\" y2=\"" + fmt(y2) +
            "\" stroke=\"" + std::string(stroke) + "\"/>\n";
  }
  void text(double x, double y, std::string_view s, std::string_view anchor = "middle") {
    out_ += "<text x=\"" + fmt(x) + "\" y=\"" + fmt(y) + "\" text-anchor=\"" + std::string(anchor) + "\">" +
            escape_xml(s) + "</text>\n";
  }
  void raw(const std::string& s) { out_ += s; }
  std::string finish() { return out_ + "</svg>\n"; }

 private:
  std::string out_;
};

void axes(Svg& svg, double lo, double hi) {
  svg.line(L::kLeft, L::kBottom, L::kRight, L::kBottom);
  svg.line(L::kLeft, L::kTop, L::kLeft, L::kBottom);
  for (int i = 0; i <= 4; ++i) {
    const double v = lo + (hi - lo) * i / 4.0;
    const double y = scale(v, lo, hi, L::kBottom, L::kTop);
    svg.line(L::kLeft - 4, y, L::kLeft, y);
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3g", v);
    svg.text(L::kLeft - 6, y + 4, buf, "end");
  }
}

const char* kPalette[] = {"#1b6ca8", "#d1495b", "#edae49", "#66a182", "#8e6c8a", "#555555"};

std::string render_rates(const CsvTable& t) {
  const std::size_t cond = t.column("condition");
  const char* series[] = {"rate_x", "rate_y", "rate_z", "rate_other"};
  for (const char* s : series) t.column(s);

  Svg svg;
  axes(svg, 0.0, 1.0);
  const double group = (L::kRight - L::kLeft) / static_cast<double>(t.rows.size());
  const double bar = group * 0.8 / 4.0;
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const double gx = L::kLeft + group * static_cast<double>(r) + group * 0.1;
    for (int s = 0; s < 4; ++s) {
      const double v = std::clamp(t.number(r, series[s]), 0.0, 1.0);
      const double y = scale(v, 0.0, 1.0, L::kBottom, L::kTop);
      svg.raw("<rect data-row=\"" + escape_xml(t.rows[r][cond]) + "\" data-series=\"" + series[s] + "\" x=\"" +
              fmt(gx + bar * s) + "\" y=\"" + fmt(y) + "\" width=\"" + fmt(bar) + "\" height=\"" +
              fmt(L::kBottom - y) + "\" fill=\"" + kPalette[s] + "\"/>\n");
    }
    svg.text(gx + group * 0.4, L::kBottom + 16, t.rows[r][cond]);
  }
  for (int s = 0; s < 4; ++s) {
    svg.raw("<rect x=\"" + fmt(L::kLeft + 110.0 * s) + "\" y=\"370.00\" width=\"10.00\" height=\"10.00\" fill=\"" +
            kPalette[s] + "\"/>\n");
    svg.text(L::kLeft + 110.0 * s + 14, 379, series[s], "start");
  }
  return svg.finish();
}

std::string render_layers(const CsvTable& t) {
  const std::size_t src = t.column("patch_source");
  const std::size_t suf = t.column("suffix");
  t.column("layer");
  t.column("mean_rel_diff");

  std::map<std::string, std::vector<std::pair<double, double>>> series;
  double xlo = 0, xhi = 0, ylo = 0, yhi = 0;
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const double x = t.number(r, "layer");
    const double y = t.number(r, "mean_rel_diff");
    if (r == 0) xlo = xhi = x;
    xlo = std::min(xlo, x);
    xhi = std::max(xhi, x);
    ylo = std::min(ylo, y);
    yhi = std::max(yhi, y);
    series[t.rows[r][src] + "/" + t.rows[r][suf]].emplace_back(x, y);
  }
  if (xhi == xlo) xhi = xlo + 1.0;
  if (yhi == ylo) yhi = ylo + 1.0;

  Svg svg;
  axes(svg, ylo, yhi);
  const double zero = scale(0.0, ylo, yhi, L::kBottom, L::kTop);
  svg.line(L::kLeft, zero, L::kRight, zero, "#bbb");
  svg.text((L::kLeft + L::kRight) / 2, L::kBottom + 30, "layer");
  int k = 0;
  for (auto& [name, pts] : series) {
    std::sort(pts.begin(), pts.end());
    std::string points;
    for (const auto& [x, y] : pts) {
      if (!points.empty()) points += ' ';
      points += fmt(scale(x, xlo, xhi, L::kLeft, L::kRight)) + "," + fmt(scale(y, ylo, yhi, L::kBottom, L::kTop));
    }
    const char* color = kPalette[k % 6];
    svg.raw("<polyline data-series=\"" + escape_xml(name) + "\" fill=\"none\" stroke=\"" + color +
            "\" stroke-width=\"2\" points=\"" + points + "\"/>\n");
    svg.text(L::kLeft + 110.0 * k + 14, 379, name, "start");
    svg.line(L::kLeft + 110.0 * k, 375, L::kLeft + 110.0 * k + 10, 375, color);
    ++k;
  }
  return svg.finish();
}

std::string render_grid(const CsvTable& t) {
  const std::size_t cond = t.column("condition");
  const std::size_t slot = t.column("slot");
  t.column("mean_mass");

  std::vector<std::string> conditions, slots;
  std::map<std::pair<std::string, std::string>, double> cells;
  double hi = 0.0;
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const auto& c = t.rows[r][cond];
    const auto& s = t.rows[r][slot];
    if (std::find(conditions.begin(), conditions.end(), c) == conditions.end()) conditions.push_back(c);
    if (std::find(slots.begin(), slots.end(), s) == slots.end()) slots.push_back(s);
    const double v = t.number(r, "mean_mass");
    cells[{c, s}] = v;
    hi = std::max(hi, v);
  }
  if (hi <= 0.0) hi = 1.0;

  Svg svg;
  const double w = (L::kRight - L::kLeft) / static_cast<double>(slots.size());
  const double h = (L::kBottom - L::kTop) / static_cast<double>(conditions.size());
  for (std::size_t i = 0; i < conditions.size(); ++i) {
    svg.text(L::kLeft - 6, L::kTop + h * (i + 0.5) + 4, conditions[i], "end");
    for (std::size_t j = 0; j < slots.size(); ++j) {
      const auto it = cells.find({conditions[i], slots[j]});
      const double v = it == cells.end() ? 0.0 : it->second;
      const int shade = static_cast<int>(255.0 - 215.0 * std::clamp(v / hi, 0.0, 1.0));
      char color[16];
      std::snprintf(color, sizeof color, "#%02x%02xff", shade, shade);
      svg.raw("<rect data-row=\"" + escape_xml(conditions[i]) + "\" data-series=\"" + escape_xml(slots[j]) +
              "\" x=\"" + fmt(L::kLeft + w * j) + "\" y=\"" + fmt(L::kTop + h * i) + "\" width=\"" + fmt(w) +
              "\" height=\"" + fmt(h) + "\" fill=\"" + color + "\" stroke=\"white\"/>\n");
      char label[32];
      std::snprintf(label, sizeof label, "%.3f", v);
      svg.text(L::kLeft + w * (j + 0.5), L::kTop + h * (i + 0.5) + 4, label);
    }
  }
  for (std::size_t j = 0; j < slots.size(); ++j) svg.text(L::kLeft + w * (j + 0.5), L::kBottom + 16, slots[j]);
  return svg.finish();
}

}  // namespace

std::string_view to_string(FigureKind kind) {
  switch (kind) {
    case FigureKind::kRatesBar: return "rates-bar";
    case FigureKind::kLayerLines: return "layer-lines";
    case FigureKind::kAttentionGrid: return "attention-grid";
  }
  return "rates-bar";
}

std::optional<FigureKind> figure_kind_from_string(std::string_view s) {
  for (FigureKind k : {FigureKind::kRatesBar, FigureKind::kLayerLines, FigureKind::kAttentionGrid}) {
    if (to_string(k) == s) return k;
  }
  return std::nullopt;
}

std::string render_figure(const CsvTable& table, FigureKind kind) {
  if (table.header.empty() || table.rows.empty()) {
    throw InvalidArgument("cannot draw " + std::string(to_string(kind)) + " from an empty CSV");
  }
  switch (kind) {
    case FigureKind::kRatesBar: return render_rates(table);
    case FigureKind::kLayerLines: return render_layers(table);
    case FigureKind::kAttentionGrid: return render_grid(table);
  }
  throw InvalidArgument("unknown figure kind");
}

void emit_figure(const std::filesystem::path& csv_in, FigureKind kind, const std::filesystem::path& svg_out) {
  const std::string svg = render_figure(read_csv(csv_in), kind);
  std::ofstream out(svg_out, std::ios::binary);
  if (!out) throw LoadError("cannot write " + svg_out.string());
  out << svg;
}

}  // namespace dlens
