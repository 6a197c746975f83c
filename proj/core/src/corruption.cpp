#include "motionseg/corruption.hpp"

#include <algorithm>
#include <cmath>

#include "motionseg/maskmetrics.hpp"
#include "motionseg/rng.hpp"

namespace mseg {

std::string to_string(CorruptionKind k) {
  switch (k) {
    case CorruptionKind::systematic_erosion: return "systematic_erosion";
    case CorruptionKind::erosion_dilation: return "erosion_dilation";
    case CorruptionKind::tool_drop: return "tool_drop";
  }
  return "?";
}

CorruptionKind corruption_kind_from_string(const std::string& s) {
  if (s == "systematic_erosion" || s == "erosion") return CorruptionKind::systematic_erosion;
  if (s == "erosion_dilation" || s == "eros-dil") return CorruptionKind::erosion_dilation;
  if (s == "tool_drop" || s == "tool-drop") return CorruptionKind::tool_drop;
  throw ParamError("unknown corruption kind: " + s);
}

BinaryMask morph(const BinaryMask& m, int radius, MorphMode mode) {
  if (radius < 0) throw ParamError("morph: radius must be >= 0");
  if (radius == 0) return m;
  std::vector<std::pair<int, int>> disc;
  for (int dy = -radius; dy <= radius; ++dy)
    for (int dx = -radius; dx <= radius; ++dx)
      if (dx * dx + dy * dy <= radius * radius) disc.emplace_back(dx, dy);

  BinaryMask out(m.width, m.height);
  const bool erode = mode == MorphMode::erode;
  for (int y = 0; y < m.height; ++y)
    for (int x = 0; x < m.width; ++x) {
      bool hit = erode;  // erosion: AND over disc; dilation: OR over disc
      for (auto [dx, dy] : disc) {
        const int nx = x + dx, ny = y + dy;
        // Pixels outside the frame count as background.
        const bool p =
            nx >= 0 && ny >= 0 && nx < m.width && ny < m.height && m.at(nx, ny);
        if (erode ? !p : p) {
          hit = !erode;
          break;
        }
      }
      out.at(x, y) = hit ? 1 : 0;
    }
  return out;
}

namespace {

// Realizes a fractional radius for one mask: floor(r) or floor(r)+1, the
// latter with probability frac(r).
int realized_radius(double radius, RandomStream& rng) {
  const int base = static_cast<int>(std::floor(radius));
  const double frac = radius - base;
  return base + (rng.uniform() < frac ? 1 : 0);
}

BinaryMask drop_tools(const BinaryMask& gt, double drop_prob,
                      RandomStream& rng) {
  const LabeledMask cc = connected_components(gt);
  std::vector<uint8_t> keep(cc.count + 1, 1);
  // One draw per component id; a component stays dropped for all drop_prob
  // values above its draw, keeping the realized IoU monotone during
  // calibration bisection.
  for (int l = 1; l <= cc.count; ++l) keep[l] = rng.uniform() < drop_prob ? 0 : 1;
  BinaryMask out(gt.width, gt.height);
  for (size_t i = 0; i < gt.data.size(); ++i)
    out.data[i] = gt.data[i] && keep[cc.labels[i]] ? 1 : 0;
  return out;
}

}  // namespace

std::vector<BinaryMask> corrupt_dataset(const std::vector<BinaryMask>& gts,
                                        const CorruptionSpec& spec) {
  if (gts.empty()) throw ParamError("corrupt_dataset: empty mask list");
  spec.validate();
  RandomStream root(spec.seed);
  std::vector<BinaryMask> out;
  out.reserve(gts.size());
  for (size_t i = 0; i < gts.size(); ++i) {
    RandomStream rng = root.fork(i);
    switch (spec.kind) {
      case CorruptionKind::systematic_erosion:
        out.push_back(morph(gts[i], realized_radius(spec.radius, rng),
                            MorphMode::erode));
        break;
      case CorruptionKind::erosion_dilation: {
        const bool erode = rng.bernoulli(0.5);
        out.push_back(morph(gts[i], realized_radius(spec.radius, rng),
                            erode ? MorphMode::erode : MorphMode::dilate));
        break;
      }
      case CorruptionKind::tool_drop:
        out.push_back(drop_tools(gts[i], spec.drop_prob, rng));
        break;
    }
  }
  return out;
}

double dataset_mean_iou(const std::vector<BinaryMask>& gts,
                        const std::vector<BinaryMask>& noisy) {
  if (gts.size() != noisy.size() || gts.empty())
    throw ParamError("dataset_mean_iou: size mismatch or empty");
  double sum = 0.0;
  for (size_t i = 0; i < gts.size(); ++i) sum += iou(gts[i], noisy[i]);
  return sum / static_cast<double>(gts.size());
}

CalibrationResult calibrate_corruption(const std::vector<BinaryMask>& gts,
                                       CorruptionKind kind, double target_iou,
                                       uint64_t seed, double tolerance) {
  if (gts.empty()) throw ParamError("calibrate_corruption: empty mask list");
  if (target_iou <= 0.0 || target_iou > 1.0)
    throw ParamError("calibrate_corruption: target_iou must be in (0,1]");

  const bool is_drop = kind == CorruptionKind::tool_drop;
  auto make_spec = [&](double x) {
    CorruptionSpec s;
    s.kind = kind;
    s.seed = seed;
    (is_drop ? s.drop_prob : s.radius) = x;
    return s;
  };
  auto achieved = [&](double x) {
    return dataset_mean_iou(gts, corrupt_dataset(gts, make_spec(x)));
  };

  const double hi_limit =
      is_drop ? 1.0 : std::max(gts.front().width, gts.front().height) / 2.0;

  double lo = 0.0;  // achieved(0) == 1
  if (std::abs(1.0 - target_iou) <= tolerance)
    return {make_spec(0.0), {target_iou, 1.0, tolerance}};
  double hi = hi_limit;
  const double floor_iou = achieved(hi);
  if (floor_iou > target_iou + tolerance)
    throw CalibrationError("target " + std::to_string(target_iou) +
                           " below reachable floor " + std::to_string(floor_iou) +
                           " for " + to_string(kind));

  double best_x = hi, best_err = std::abs(floor_iou - target_iou);
  for (int it = 0; it < 48 && best_err > tolerance / 4; ++it) {
    const double mid = 0.5 * (lo + hi);
    const double a = achieved(mid);
    if (std::abs(a - target_iou) < best_err) {
      best_err = std::abs(a - target_iou);
      best_x = mid;
    }
    if (a > target_iou)
      lo = mid;  // not corrupted enough
    else
      hi = mid;
  }
  const double final_iou = achieved(best_x);
  if (std::abs(final_iou - target_iou) > tolerance)
    throw CalibrationError("calibration for " + to_string(kind) +
                           " did not reach target " + std::to_string(target_iou) +
                           " (achieved " + std::to_string(final_iou) + ")");
  return {make_spec(best_x), {target_iou, final_iou, tolerance}};
}

}  // namespace mseg
