// Copyright (c) 2026, The dlens Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>

#include "dlens/csv.hpp"

namespace dlens {

enum class FigureKind {
  kRatesBar,       // columns: condition, rate_x, rate_y, rate_z, rate_other
  kLayerLines,     // columns: layer, patch_source, suffix, mean_rel_diff
  kAttentionGrid,  // columns: condition, slot, mean_mass
};

std::string_view to_string(FigureKind kind);
std::optional<FigureKind> figure_kind_from_string(std::string_view s);

/// Plot geometry shared by all figures. Values map linearly onto the plot
/// rectangle: x = plot_left + (v - lo) / (hi - lo) * plot_width, and
/// y = plot_bottom - (v - lo) / (hi - lo) * plot_height.
struct FigureLayout {
  static constexpr double kWidth = 640.0;
  static constexpr double kHeight = 400.0;
  static constexpr double kLeft = 70.0;
  static constexpr double kRight = 620.0;
  static constexpr double kTop = 30.0;
  static constexpr double kBottom = 340.0;
};

/// SVG text for a table. Layer-lines scales x over [min layer, max layer]
/// and y over [min(0, min value), max(0, max value)]; degenerate ranges are
/// widened by one unit above. Rates use y in [0, 1]. Throws InvalidArgument
/// naming a missing column or when the table has no rows.
std::string render_figure(const CsvTable& table, FigureKind kind);

/// Reads `csv_in` and writes the SVG to `svg_out`. Nothing is written when
/// rendering fails.
void emit_figure(const std::filesystem::path& csv_in, FigureKind kind, const std::filesystem::path& svg_out);

}  // namespace dlens
