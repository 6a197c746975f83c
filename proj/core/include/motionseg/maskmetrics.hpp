#pragma once

#include <vector>

#include "motionseg/types.hpp"

namespace mseg {

// Per-pixel region-agreement score. Values are constant inside each
// window-sized tile; tiles are laid out with stride equal to the window size,
// partial tiles at the right/bottom edges cover their actual extent.
struct LocalIoUMap {
  Image values;   // scalars in [0,1]
  int win_w = 0;
  int win_h = 0;
};

// Binarized local-IoU map: 1 exactly where the map value >= threshold.
struct SelectionMask {
  BinaryMask values;
  double threshold = 0.0;
};

// 8-connectivity component labeling. Labels are 1..count, assigned in
// row-major order of each component's first pixel; 0 is background.
struct LabeledMask {
  int width = 0;
  int height = 0;
  std::vector<int> labels;
  int count = 0;

  int at(int x, int y) const { return labels[static_cast<size_t>(y) * width + x]; }
};

// IoU with the both-empty := 1 convention (the only one consistent with the
// pixel-accuracy identity of the 1x1-window local IoU).
double iou(const BinaryMask& a, const BinaryMask& b);

double pixel_accuracy(const BinaryMask& a, const BinaryMask& b);

LocalIoUMap local_iou(const BinaryMask& a, const BinaryMask& b, int w, int h);

// Threshold in [0,1]; ties map to foreground/selected.
BinaryMask binarize(const ProbMask& m, double eps);
SelectionMask binarize(const LocalIoUMap& m, double eps);

// IoU restricted to selected pixels. Errors on an all-zero selection.
double effective_iou(const BinaryMask& gt, const BinaryMask& pseudo,
                     const SelectionMask& sel);

LabeledMask connected_components(const BinaryMask& m);

// For each gt component: crop both masks to its bounding box and take the IoU
// of the crops. Ordered by component id; empty gt yields an empty list.
std::vector<double> per_tool_ious(const BinaryMask& gt, const BinaryMask& noisy);

}  // namespace mseg
