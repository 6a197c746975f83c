#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace mseg {

// Error categories. Every failure surfaced by the library derives from Error,
// so callers can map them to exit codes uniformly.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct ShapeError : Error { using Error::Error; };
struct ParamError : Error { using Error::Error; };
struct ConfigError : Error { using Error::Error; };
struct IoError : Error { using Error::Error; };
struct IngestError : Error { using Error::Error; };
struct CalibrationError : Error { using Error::Error; };
struct TrainingError : Error { using Error::Error; };
struct EvalError : Error { using Error::Error; };
struct EmptySelectionError : Error { using Error::Error; };

// Single- or multi-channel intensity image, values nominally in [0,1].
// Planar layout: plane(c) is height*width doubles, row-major.
struct Image {
  int width = 0;
  int height = 0;
  int channels = 1;
  std::vector<double> data;

  Image() = default;
  Image(int w, int h, int c = 1, double fill = 0.0)
      : width(w), height(h), channels(c),
        data(static_cast<size_t>(w) * h * c, fill) {}

  double& at(int x, int y, int c = 0) {
    return data[(static_cast<size_t>(c) * height + y) * width + x];
  }
  double at(int x, int y, int c = 0) const {
    return data[(static_cast<size_t>(c) * height + y) * width + x];
  }
  size_t pixels() const { return static_cast<size_t>(width) * height; }
  bool same_shape(const Image& o) const {
    return width == o.width && height == o.height && channels == o.channels;
  }
};

// Per-pixel foreground probability in (0,1).
using ProbMask = Image;

// Hard {0,1} mask.
struct BinaryMask {
  int width = 0;
  int height = 0;
  std::vector<uint8_t> data;

  BinaryMask() = default;
  BinaryMask(int w, int h, uint8_t fill = 0)
      : width(w), height(h), data(static_cast<size_t>(w) * h, fill) {}

  uint8_t& at(int x, int y) { return data[static_cast<size_t>(y) * width + x]; }
  uint8_t at(int x, int y) const {
    return data[static_cast<size_t>(y) * width + x];
  }
  size_t pixels() const { return data.size(); }
  size_t count() const {
    size_t n = 0;
    for (uint8_t p : data) n += (p != 0);
    return n;
  }
  bool same_shape(const BinaryMask& o) const {
    return width == o.width && height == o.height;
  }
  bool operator==(const BinaryMask& o) const = default;
};

// Per-pixel 2-vector displacement (u,v) in pixels/frame.
struct FlowField {
  int width = 0;
  int height = 0;
  std::vector<double> u;  // horizontal displacement, row-major
  std::vector<double> v;  // vertical displacement, row-major

  FlowField() = default;
  FlowField(int w, int h)
      : width(w), height(h), u(static_cast<size_t>(w) * h, 0.0),
        v(static_cast<size_t>(w) * h, 0.0) {}

  size_t idx(int x, int y) const { return static_cast<size_t>(y) * width + x; }
  size_t pixels() const { return u.size(); }
  bool same_shape(const FlowField& o) const {
    return width == o.width && height == o.height;
  }
};

inline void require_same_shape(const BinaryMask& a, const BinaryMask& b,
                               const std::string& what) {
  if (!a.same_shape(b))
    throw ShapeError(what + ": mask resolutions differ (" +
                     std::to_string(a.width) + "x" + std::to_string(a.height) +
                     " vs " + std::to_string(b.width) + "x" +
                     std::to_string(b.height) + ")");
}

}  // namespace mseg
