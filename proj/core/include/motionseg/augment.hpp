#pragma once

#include "motionseg/rng.hpp"
#include "motionseg/types.hpp"

namespace mseg {

struct AugmentSpec {
  double p_flip_lr = 0.5;
  double p_flip_ud = 0.5;
  double min_crop_fraction = 0.875;  // 224/256, applied per side

  void validate() const {
    if (min_crop_fraction <= 0.0 || min_crop_fraction > 1.0)
      throw ParamError("AugmentSpec: min_crop_fraction must be in (0,1]");
    if (p_flip_lr < 0 || p_flip_lr > 1 || p_flip_ud < 0 || p_flip_ud > 1)
      throw ParamError("AugmentSpec: flip probabilities must be in [0,1]");
  }
};

// One concrete realization of the spatial augmentation. A frame pair and its
// mask share a single draw so they receive the identical geometric transform.
struct AugmentDraw {
  bool flip_lr = false;
  bool flip_ud = false;
  double crop_x0 = 0.0;  // crop rectangle in source pixels
  double crop_y0 = 0.0;
  double crop_w = 0.0;
  double crop_h = 0.0;
};

AugmentDraw draw_augment(const AugmentSpec& spec, RandomStream& rng, int width,
                         int height);

// Crop + flip, resampled back to the input resolution.
// Images use bilinear resampling, masks nearest-neighbor (binarity preserved).
Image augm_spatial(const Image& img, const AugmentDraw& draw);
BinaryMask augm_spatial(const BinaryMask& mask, const AugmentDraw& draw);

// Value-space rotation of every (u,v) vector; no spatial resampling.
FlowField augm_flow_rotate(const FlowField& flow, double theta);

// Divides every vector by the maximum per-pixel norm; all-zero fields pass
// through unchanged.
FlowField normalize_flow(const FlowField& flow);

double max_flow_norm(const FlowField& flow);

// Flow colorwheel visualization: angle -> hue, magnitude -> saturation,
// zero flow renders white.
Image flow_to_color(const FlowField& flow);

}  // namespace mseg
