#include "motionseg/augment.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace mseg {

AugmentDraw draw_augment(const AugmentSpec& spec, RandomStream& rng, int width,
                         int height) {
  spec.validate();
  AugmentDraw d;
  d.flip_lr = rng.bernoulli(spec.p_flip_lr);
  d.flip_ud = rng.bernoulli(spec.p_flip_ud);
  const double fx = rng.uniform(spec.min_crop_fraction, 1.0);
  const double fy = rng.uniform(spec.min_crop_fraction, 1.0);
  d.crop_w = fx * width;
  d.crop_h = fy * height;
  d.crop_x0 = rng.uniform(0.0, width - d.crop_w);
  d.crop_y0 = rng.uniform(0.0, height - d.crop_h);
  return d;
}

namespace {

// Maps an output pixel center back into the crop rectangle, honoring flips.
struct SourceMap {
  const AugmentDraw& d;
  int width, height;

  double sx(int x) const {
    const int xx = d.flip_lr ? width - 1 - x : x;
    return d.crop_x0 + (xx + 0.5) * d.crop_w / width - 0.5;
  }
  double sy(int y) const {
    const int yy = d.flip_ud ? height - 1 - y : y;
    return d.crop_y0 + (yy + 0.5) * d.crop_h / height - 0.5;
  }
};

}  // namespace

Image augm_spatial(const Image& img, const AugmentDraw& draw) {
  Image out(img.width, img.height, img.channels);
  const SourceMap map{draw, img.width, img.height};
  for (int y = 0; y < img.height; ++y) {
    const double fy = std::clamp(map.sy(y), 0.0, img.height - 1.0);
    const int y0 = static_cast<int>(fy);
    const int y1 = std::min(y0 + 1, img.height - 1);
    const double wy = fy - y0;
    for (int x = 0; x < img.width; ++x) {
      const double fx = std::clamp(map.sx(x), 0.0, img.width - 1.0);
      const int x0 = static_cast<int>(fx);
      const int x1 = std::min(x0 + 1, img.width - 1);
      const double wx = fx - x0;
      for (int c = 0; c < img.channels; ++c) {
        const double top = (1 - wx) * img.at(x0, y0, c) + wx * img.at(x1, y0, c);
        const double bot = (1 - wx) * img.at(x0, y1, c) + wx * img.at(x1, y1, c);
        out.at(x, y, c) = (1 - wy) * top + wy * bot;
      }
    }
  }
  return out;
}

BinaryMask augm_spatial(const BinaryMask& mask, const AugmentDraw& draw) {
  BinaryMask out(mask.width, mask.height);
  const SourceMap map{draw, mask.width, mask.height};
  for (int y = 0; y < mask.height; ++y) {
    const int sy = std::clamp(static_cast<int>(std::lround(map.sy(y))), 0,
                              mask.height - 1);
    for (int x = 0; x < mask.width; ++x) {
      const int sx = std::clamp(static_cast<int>(std::lround(map.sx(x))), 0,
                                mask.width - 1);
      out.at(x, y) = mask.at(sx, sy);
    }
  }
  return out;
}

FlowField augm_flow_rotate(const FlowField& flow, double theta) {
  const double c = std::cos(theta), s = std::sin(theta);
  FlowField out(flow.width, flow.height);
  for (size_t i = 0; i < flow.pixels(); ++i) {
    out.u[i] = c * flow.u[i] - s * flow.v[i];
    out.v[i] = s * flow.u[i] + c * flow.v[i];
  }
  return out;
}

double max_flow_norm(const FlowField& flow) {
  double m = 0.0;
  for (size_t i = 0; i < flow.pixels(); ++i)
    m = std::max(m, std::hypot(flow.u[i], flow.v[i]));
  return m;
}

FlowField normalize_flow(const FlowField& flow) {
  const double m = max_flow_norm(flow);
  if (m == 0.0) return flow;
  FlowField out(flow.width, flow.height);
  for (size_t i = 0; i < flow.pixels(); ++i) {
    out.u[i] = flow.u[i] / m;
    out.v[i] = flow.v[i] / m;
  }
  return out;
}

namespace {

void hsv_to_rgb(double h, double s, double v, double& r, double& g, double& b) {
  h = h - std::floor(h);  // wrap to [0,1)
  const double i = std::floor(h * 6.0);
  const double f = h * 6.0 - i;
  const double p = v * (1 - s);
  const double q = v * (1 - f * s);
  const double t = v * (1 - (1 - f) * s);
  switch (static_cast<int>(i) % 6) {
    case 0: r = v; g = t; b = p; break;
    case 1: r = q; g = v; b = p; break;
    case 2: r = p; g = v; b = t; break;
    case 3: r = p; g = q; b = v; break;
    case 4: r = t; g = p; b = v; break;
    default: r = v; g = p; b = q; break;
  }
}

}  // namespace

Image flow_to_color(const FlowField& flow) {
  const double maxn = max_flow_norm(flow);
  Image out(flow.width, flow.height, 3);
  for (int y = 0; y < flow.height; ++y)
    for (int x = 0; x < flow.width; ++x) {
      const size_t i = flow.idx(x, y);
      const double mag = std::hypot(flow.u[i], flow.v[i]);
      const double hue =
          (std::atan2(flow.v[i], flow.u[i]) / (2 * std::numbers::pi)) + 0.5;
      double r = 1, g = 1, b = 1;
      if (maxn > 0.0) hsv_to_rgb(hue, mag / maxn, 1.0, r, g, b);
      out.at(x, y, 0) = r;
      out.at(x, y, 1) = g;
      out.at(x, y, 2) = b;
    }
  return out;
}

}  // namespace mseg
