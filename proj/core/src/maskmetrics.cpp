#include "motionseg/maskmetrics.hpp"

#include <algorithm>
#include <array>
#include <deque>

namespace mseg {

namespace {

double iou_region(const BinaryMask& a, const BinaryMask& b, int x0, int y0,
                  int x1, int y1) {
  size_t inter = 0, uni = 0;
  for (int y = y0; y < y1; ++y)
    for (int x = x0; x < x1; ++x) {
      const bool pa = a.at(x, y), pb = b.at(x, y);
      inter += pa && pb;
      uni += pa || pb;
    }
  return uni == 0 ? 1.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

}  // namespace

double iou(const BinaryMask& a, const BinaryMask& b) {
  require_same_shape(a, b, "iou");
  return iou_region(a, b, 0, 0, a.width, a.height);
}

double pixel_accuracy(const BinaryMask& a, const BinaryMask& b) {
  require_same_shape(a, b, "pixel_accuracy");
  size_t agree = 0;
  for (size_t i = 0; i < a.data.size(); ++i)
    agree += (a.data[i] != 0) == (b.data[i] != 0);
  return static_cast<double>(agree) / static_cast<double>(a.pixels());
}

LocalIoUMap local_iou(const BinaryMask& a, const BinaryMask& b, int w, int h) {
  require_same_shape(a, b, "local_iou");
  if (w < 1 || h < 1)
    throw ParamError("local_iou: window must be positive");
  LocalIoUMap out;
  out.win_w = w;
  out.win_h = h;
  out.values = Image(a.width, a.height);
  for (int ty = 0; ty < a.height; ty += h)
    for (int tx = 0; tx < a.width; tx += w) {
      const int x1 = std::min(tx + w, a.width);
      const int y1 = std::min(ty + h, a.height);
      const double v = iou_region(a, b, tx, ty, x1, y1);
      for (int y = ty; y < y1; ++y)
        for (int x = tx; x < x1; ++x) out.values.at(x, y) = v;
    }
  return out;
}

namespace {

BinaryMask threshold_image(const Image& m, double eps) {
  if (eps < 0.0 || eps > 1.0)
    throw ParamError("binarize: threshold must be in [0,1]");
  BinaryMask out(m.width, m.height);
  for (size_t i = 0; i < out.data.size(); ++i)
    out.data[i] = m.data[i] >= eps ? 1 : 0;
  return out;
}

}  // namespace

BinaryMask binarize(const ProbMask& m, double eps) {
  return threshold_image(m, eps);
}

SelectionMask binarize(const LocalIoUMap& m, double eps) {
  return {threshold_image(m.values, eps), eps};
}

double effective_iou(const BinaryMask& gt, const BinaryMask& pseudo,
                     const SelectionMask& sel) {
  require_same_shape(gt, pseudo, "effective_iou");
  require_same_shape(gt, sel.values, "effective_iou");
  size_t inter = 0, uni = 0, selected = 0;
  for (size_t i = 0; i < gt.data.size(); ++i) {
    if (!sel.values.data[i]) continue;
    ++selected;
    const bool pg = gt.data[i] != 0, pp = pseudo.data[i] != 0;
    inter += pg && pp;
    uni += pg || pp;
  }
  if (selected == 0)
    throw EmptySelectionError("effective_iou: selection is all-zero");
  return uni == 0 ? 1.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

LabeledMask connected_components(const BinaryMask& m) {
  LabeledMask out;
  out.width = m.width;
  out.height = m.height;
  out.labels.assign(m.pixels(), 0);
  static constexpr std::array<std::array<int, 2>, 8> kNbr{
      {{-1, -1}, {0, -1}, {1, -1}, {-1, 0}, {1, 0}, {-1, 1}, {0, 1}, {1, 1}}};
  std::deque<std::pair<int, int>> queue;
  for (int y = 0; y < m.height; ++y)
    for (int x = 0; x < m.width; ++x) {
      if (!m.at(x, y) || out.labels[m.width * static_cast<size_t>(y) + x])
        continue;
      const int label = ++out.count;
      out.labels[m.width * static_cast<size_t>(y) + x] = label;
      queue.emplace_back(x, y);
      while (!queue.empty()) {
        auto [cx, cy] = queue.front();
        queue.pop_front();
        for (auto [dx, dy] : kNbr) {
          const int nx = cx + dx, ny = cy + dy;
          if (nx < 0 || ny < 0 || nx >= m.width || ny >= m.height) continue;
          auto& l = out.labels[m.width * static_cast<size_t>(ny) + nx];
          if (m.at(nx, ny) && !l) {
            l = label;
            queue.emplace_back(nx, ny);
          }
        }
      }
    }
  return out;
}

std::vector<double> per_tool_ious(const BinaryMask& gt, const BinaryMask& noisy) {
  require_same_shape(gt, noisy, "per_tool_ious");
  const LabeledMask cc = connected_components(gt);
  struct Box {
    int x0, y0, x1, y1;
  };
  std::vector<Box> boxes(cc.count, {gt.width, gt.height, -1, -1});
  for (int y = 0; y < gt.height; ++y)
    for (int x = 0; x < gt.width; ++x) {
      const int l = cc.at(x, y);
      if (!l) continue;
      Box& b = boxes[l - 1];
      b.x0 = std::min(b.x0, x);
      b.y0 = std::min(b.y0, y);
      b.x1 = std::max(b.x1, x);
      b.y1 = std::max(b.y1, y);
    }
  std::vector<double> out;
  out.reserve(boxes.size());
  for (const Box& b : boxes)
    out.push_back(iou_region(gt, noisy, b.x0, b.y0, b.x1 + 1, b.y1 + 1));
  return out;
}

}  // namespace mseg
