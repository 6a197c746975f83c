#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "motionseg/evalstats.hpp"
#include "motionseg/maskmetrics.hpp"
#include "motionseg/pipeline.hpp"
#include "motionseg/types.hpp"

namespace mseg {

struct Series {
  std::string name;
  std::vector<double> values;  // x is the 1-based index (epoch)
};

// Simple self-contained SVG line chart; one polyline per series, legend in
// the top-right corner.
void write_curve_svg(const std::filesystem::path& path, const std::string& title,
                     const std::vector<Series>& series);

// Bar chart of a 10-bin tool-IoU histogram (mass per bin).
void write_histogram_svg(const std::filesystem::path& path,
                         const std::string& title, const ToolHistogram& hist);

// selected-fraction / effective-IoU curves per window from a selection sweep.
void write_sweep_svg(const std::filesystem::path& path, const std::string& title,
                     const std::vector<SweepRow>& rows);

// Grayscale heatmap of a local-IoU map (8-bit PNG).
void write_heatmap_png(const std::filesystem::path& path, const LocalIoUMap& map);

// Frame with the mask tinted red on top (RGB PNG); frame may be gray or RGB.
void write_overlay_png(const std::filesystem::path& path, const Image& frame,
                       const BinaryMask& mask);

// Convenience: loss and IoU curves for every stage present in the history.
void write_history_plots(const std::filesystem::path& dir,
                         const std::vector<EpochStats>& history);

}  // namespace mseg
