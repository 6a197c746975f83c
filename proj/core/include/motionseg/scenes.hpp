#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "motionseg/types.hpp"

namespace mseg {

struct SceneConfig {
  int image_size = 64;
  int channels = 1;
  int n_objects = 2;            // in [1,4]
  double p_still = 0.0;         // probability an object has zero motion
  double obj_motion_magnitude = 3.0;   // max translation of a moving object, px
  double obj_rotation_magnitude = 0.0; // max |rotation| of a moving object, rad
  double bg_motion_magnitude = 0.0;    // background translation norm, px
  double bg_fg_correlation = 0.0;      // couples bg motion to mean fg motion
  double texture_scale = 0.15;         // low-frequency background texture
  uint64_t seed = 0;

  void validate(int lociou_window = 0) const {
    if (image_size <= 0) throw ConfigError("SceneConfig: image_size must be positive");
    if (lociou_window > 0 && image_size % lociou_window != 0)
      throw ConfigError("SceneConfig: image_size not divisible by local-IoU window");
    if (channels != 1 && channels != 3)
      throw ConfigError("SceneConfig: channels must be 1 or 3");
    if (n_objects < 1 || n_objects > 4)
      throw ConfigError("SceneConfig: n_objects must be in [1,4]");
    if (p_still < 0 || p_still > 1)
      throw ConfigError("SceneConfig: p_still must be in [0,1]");
    if (bg_fg_correlation < 0 || bg_fg_correlation > 1)
      throw ConfigError("SceneConfig: bg_fg_correlation must be in [0,1]");
    if (obj_motion_magnitude < 0 || bg_motion_magnitude < 0)
      throw ConfigError("SceneConfig: motion magnitudes must be >= 0");
  }
};

struct ObjectMotion {
  double dx = 0, dy = 0;
  double rot = 0;       // about the object anchor
  bool still = false;
};

struct ScenePair {
  Image frame_t;
  Image frame_t1;
  BinaryMask gt_mask;  // union of object supports in frame_t
  FlowField flow;      // exact per-pixel displacement, frame_t ownership
  std::vector<ObjectMotion> motions;
  double bg_dx = 0, bg_dy = 0;
};

// Deterministic function of (cfg.seed, index).
ScenePair gen_scene_pair(const SceneConfig& cfg, int index);

struct DatasetItem {
  std::string id;
  std::filesystem::path frame_t;
  std::filesystem::path frame_t1;
  std::filesystem::path mask;  // may be empty
  std::filesystem::path flow;  // may be empty
};

struct DatasetManifest {
  std::vector<DatasetItem> items;
  std::optional<SceneConfig> config;  // present for generated datasets
};

DatasetManifest gen_dataset(const SceneConfig& cfg, int n_pairs,
                            const std::filesystem::path& out_dir);

// Loads either a manifest.json produced by gen_dataset, or a documented raw
// layout: frames/*.png paired consecutively (even count required), with
// optional masks/ and flows/ directories of matching stems.
DatasetManifest load_external_dataset(const std::filesystem::path& dir,
                                      bool with_masks, bool with_flows);

// Loaded-in-memory sample used by training and evaluation.
struct Sample {
  Image frame_t;
  Image frame_t1;
  BinaryMask gt_mask;  // empty (0x0) when unavailable
  FlowField flow;      // empty (0x0) when unavailable
};

std::vector<Sample> load_samples(const DatasetManifest& manifest);

}  // namespace mseg
