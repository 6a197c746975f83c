#include "motionseg/plots.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "motionseg/imageio.hpp"

namespace mseg {

namespace {

constexpr int kW = 640, kH = 400;
constexpr int kMarginL = 56, kMarginR = 16, kMarginT = 36, kMarginB = 40;

const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e",
                          "#9467bd", "#8c564b", "#17becf", "#7f7f7f"};

std::ofstream open_svg(const std::filesystem::path& path,
                       const std::string& title) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kW
      << "\" height=\"" << kH << "\" viewBox=\"0 0 " << kW << ' ' << kH
      << "\">\n"
      << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
      << "<text x=\"" << kW / 2 << "\" y=\"20\" text-anchor=\"middle\" "
         "font-family=\"sans-serif\" font-size=\"14\">"
      << title << "</text>\n";
  return out;
}

void draw_axes(std::ofstream& out, double ymin, double ymax, double xmin,
               double xmax) {
  const int x0 = kMarginL, x1 = kW - kMarginR;
  const int y0 = kH - kMarginB, y1 = kMarginT;
  out << "<line x1=\"" << x0 << "\" y1=\"" << y0 << "\" x2=\"" << x1
      << "\" y2=\"" << y0 << "\" stroke=\"black\"/>\n"
      << "<line x1=\"" << x0 << "\" y1=\"" << y0 << "\" x2=\"" << x0
      << "\" y2=\"" << y1 << "\" stroke=\"black\"/>\n";
  for (int i = 0; i <= 4; ++i) {
    const double fy = ymin + (ymax - ymin) * i / 4.0;
    const double py = y0 - (y0 - y1) * i / 4.0;
    out << "<text x=\"" << x0 - 6 << "\" y=\"" << py + 4
        << "\" text-anchor=\"end\" font-family=\"sans-serif\" "
           "font-size=\"10\">"
        << fy << "</text>\n";
    const double fx = xmin + (xmax - xmin) * i / 4.0;
    const double px = x0 + (x1 - x0) * i / 4.0;
    out << "<text x=\"" << px << "\" y=\"" << y0 + 16
        << "\" text-anchor=\"middle\" font-family=\"sans-serif\" "
           "font-size=\"10\">"
        << fx << "</text>\n";
  }
}

struct Mapper {
  double xmin, xmax, ymin, ymax;
  double px(double x) const {
    const double t = xmax == xmin ? 0.5 : (x - xmin) / (xmax - xmin);
    return kMarginL + t * (kW - kMarginL - kMarginR);
  }
  double py(double y) const {
    const double t = ymax == ymin ? 0.5 : (y - ymin) / (ymax - ymin);
    return (kH - kMarginB) - t * (kH - kMarginB - kMarginT);
  }
};

void draw_polyline(std::ofstream& out, const Mapper& m,
                   const std::vector<double>& xs, const std::vector<double>& ys,
                   const char* color) {
  out << "<polyline fill=\"none\" stroke=\"" << color
      << "\" stroke-width=\"1.5\" points=\"";
  for (size_t i = 0; i < xs.size(); ++i)
    out << m.px(xs[i]) << ',' << m.py(ys[i]) << ' ';
  out << "\"/>\n";
}

void draw_legend(std::ofstream& out, const std::vector<std::string>& names) {
  for (size_t i = 0; i < names.size(); ++i) {
    const int y = kMarginT + 14 * static_cast<int>(i);
    out << "<rect x=\"" << kW - kMarginR - 150 << "\" y=\"" << y
        << "\" width=\"10\" height=\"10\" fill=\""
        << kPalette[i % std::size(kPalette)] << "\"/>\n"
        << "<text x=\"" << kW - kMarginR - 136 << "\" y=\"" << y + 9
        << "\" font-family=\"sans-serif\" font-size=\"11\">" << names[i]
        << "</text>\n";
  }
}

}  // namespace

void write_curve_svg(const std::filesystem::path& path, const std::string& title,
                     const std::vector<Series>& series) {
  if (series.empty()) throw ParamError("write_curve_svg: no series");
  double ymin = INFINITY, ymax = -INFINITY;
  size_t maxn = 0;
  for (const auto& s : series) {
    maxn = std::max(maxn, s.values.size());
    for (double v : s.values) {
      ymin = std::min(ymin, v);
      ymax = std::max(ymax, v);
    }
  }
  if (maxn == 0) throw ParamError("write_curve_svg: empty series");
  if (ymin == ymax) {
    ymin -= 0.5;
    ymax += 0.5;
  }
  auto out = open_svg(path, title);
  draw_axes(out, ymin, ymax, 1, static_cast<double>(maxn));
  const Mapper m{1, static_cast<double>(maxn), ymin, ymax};
  std::vector<std::string> names;
  for (size_t i = 0; i < series.size(); ++i) {
    std::vector<double> xs(series[i].values.size());
    for (size_t j = 0; j < xs.size(); ++j) xs[j] = static_cast<double>(j + 1);
    draw_polyline(out, m, xs, series[i].values,
                  kPalette[i % std::size(kPalette)]);
    names.push_back(series[i].name);
  }
  draw_legend(out, names);
  out << "</svg>\n";
}

void write_histogram_svg(const std::filesystem::path& path,
                         const std::string& title, const ToolHistogram& hist) {
  auto out = open_svg(path, title);
  double ymax = 0.0;
  for (int i = 0; i < 10; ++i) ymax = std::max(ymax, hist.mass(i));
  if (ymax == 0.0) ymax = 1.0;
  draw_axes(out, 0, ymax, 0, 1);
  const Mapper m{0, 1, 0, ymax};
  for (int i = 0; i < 10; ++i) {
    const double x0 = m.px(i / 10.0) + 1, x1 = m.px((i + 1) / 10.0) - 1;
    const double y = m.py(hist.mass(i));
    out << "<rect x=\"" << x0 << "\" y=\"" << y << "\" width=\"" << x1 - x0
        << "\" height=\"" << m.py(0) - y << "\" fill=\"#1f77b4\"/>\n";
  }
  out << "</svg>\n";
}

void write_sweep_svg(const std::filesystem::path& path, const std::string& title,
                     const std::vector<SweepRow>& rows) {
  if (rows.empty()) throw ParamError("write_sweep_svg: no rows");
  std::vector<int> windows;
  for (const auto& r : rows)
    if (std::find(windows.begin(), windows.end(), r.window) == windows.end())
      windows.push_back(r.window);

  auto out = open_svg(path, title);
  draw_axes(out, 0, 1, 0, 1);
  const Mapper m{0, 1, 0, 1};
  std::vector<std::string> names;
  for (size_t wi = 0; wi < windows.size(); ++wi) {
    std::vector<double> xs, frac, eff;
    for (const auto& r : rows) {
      if (r.window != windows[wi]) continue;
      xs.push_back(r.eps);
      frac.push_back(r.selected_fraction);
      eff.push_back(r.effective_iou);
    }
    const char* c = kPalette[wi % std::size(kPalette)];
    draw_polyline(out, m, xs, frac, c);
    // effective IoU dashed in the same color
    out << "<polyline fill=\"none\" stroke=\"" << c
        << "\" stroke-width=\"1.5\" stroke-dasharray=\"4 3\" points=\"";
    for (size_t i = 0; i < xs.size(); ++i)
      out << m.px(xs[i]) << ',' << m.py(eff[i]) << ' ';
    out << "\"/>\n";
    names.push_back("w=" + std::to_string(windows[wi]) + " frac/effIoU");
  }
  draw_legend(out, names);
  out << "</svg>\n";
}

void write_heatmap_png(const std::filesystem::path& path,
                       const LocalIoUMap& map) {
  write_png(path, map.values);
}

void write_overlay_png(const std::filesystem::path& path, const Image& frame,
                       const BinaryMask& mask) {
  if (frame.width != mask.width || frame.height != mask.height)
    throw ShapeError("write_overlay_png: frame/mask resolution mismatch");
  Image out(frame.width, frame.height, 3);
  for (int y = 0; y < frame.height; ++y) {
    for (int x = 0; x < frame.width; ++x) {
      const double r = frame.at(x, y, 0);
      const double g = frame.channels == 3 ? frame.at(x, y, 1) : r;
      const double b = frame.channels == 3 ? frame.at(x, y, 2) : r;
      if (mask.at(x, y)) {
        out.at(x, y, 0) = 0.5 * r + 0.5;
        out.at(x, y, 1) = 0.5 * g;
        out.at(x, y, 2) = 0.5 * b;
      } else {
        out.at(x, y, 0) = r;
        out.at(x, y, 1) = g;
        out.at(x, y, 2) = b;
      }
    }
  }
  write_png(path, out);
}

void write_history_plots(const std::filesystem::path& dir,
                         const std::vector<EpochStats>& history) {
  std::filesystem::create_directories(dir);
  const auto collect = [&](const std::string& stage, auto field) {
    std::vector<double> v;
    for (const auto& r : history)
      if (r.stage == stage) v.push_back(field(r));
    return v;
  };

  std::vector<Series> losses;
  if (auto v = collect("teacher", [](const EpochStats& r) { return r.loss_d; });
      !v.empty())
    losses.push_back({"disc", v});
  if (auto v = collect("teacher", [](const EpochStats& r) { return r.loss_g; });
      !v.empty())
    losses.push_back({"gen", v});
  if (auto v =
          collect("teacher", [](const EpochStats& r) { return r.loss_cycle; });
      !v.empty())
    losses.push_back({"cycle", v});
  if (auto v = collect("proxy", [](const EpochStats& r) { return r.loss_proxy; });
      !v.empty())
    losses.push_back({"proxy", v});
  if (auto v =
          collect("student", [](const EpochStats& r) { return r.loss_student; });
      !v.empty())
    losses.push_back({"student", v});
  if (!losses.empty()) write_curve_svg(dir / "losses.svg", "training losses", losses);

  std::vector<Series> ious;
  if (auto v =
          collect("teacher", [](const EpochStats& r) { return r.teacher_iou; });
      !v.empty() && v.front() >= 0)
    ious.push_back({"teacher", v});
  if (auto v = collect("proxy", [](const EpochStats& r) { return r.proxy_iou; });
      !v.empty() && v.front() >= 0)
    ious.push_back({"proxy", v});
  if (auto v =
          collect("student", [](const EpochStats& r) { return r.student_iou; });
      !v.empty() && v.front() >= 0)
    ious.push_back({"student", v});
  if (!ious.empty()) write_curve_svg(dir / "iou.svg", "IoU vs ground truth", ious);
}

}  // namespace mseg
