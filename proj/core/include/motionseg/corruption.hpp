#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "motionseg/types.hpp"

namespace mseg {

enum class CorruptionKind { systematic_erosion, erosion_dilation, tool_drop };

std::string to_string(CorruptionKind k);
CorruptionKind corruption_kind_from_string(const std::string& s);

enum class MorphMode { erode, dilate };

struct CorruptionSpec {
  CorruptionKind kind = CorruptionKind::systematic_erosion;
  // Morphology kinds: disc radius in pixels. Fractional radii are realized by
  // per-mask probabilistic mixing of the two adjacent integer radii.
  double radius = 0.0;
  // tool_drop: probability that a gt component is removed entirely.
  double drop_prob = 0.0;
  uint64_t seed = 0;

  void validate() const {
    if (radius < 0) throw ParamError("CorruptionSpec: radius must be >= 0");
    if (drop_prob < 0 || drop_prob > 1)
      throw ParamError("CorruptionSpec: drop_prob must be in [0,1]");
  }
};

struct CorruptionLevel {
  double target_iou = 1.0;
  double achieved_iou = 1.0;
  double tolerance = 0.02;
};

// Morphological erosion/dilation with a disc structuring element
// (offsets with dx^2 + dy^2 <= radius^2). Radius 0 is the identity.
BinaryMask morph(const BinaryMask& m, int radius, MorphMode mode);

std::vector<BinaryMask> corrupt_dataset(const std::vector<BinaryMask>& gts,
                                        const CorruptionSpec& spec);

double dataset_mean_iou(const std::vector<BinaryMask>& gts,
                        const std::vector<BinaryMask>& noisy);

struct CalibrationResult {
  CorruptionSpec spec;
  CorruptionLevel level;
};

// Monotone bisection over the corruption intensity (radius or drop_prob)
// until the realized dataset-mean IoU under `seed` lands within tolerance of
// the target. Throws CalibrationError when the target is unreachable.
CalibrationResult calibrate_corruption(const std::vector<BinaryMask>& gts,
                                       CorruptionKind kind, double target_iou,
                                       uint64_t seed = 0,
                                       double tolerance = 0.02);

}  // namespace mseg
