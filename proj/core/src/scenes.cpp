#include "motionseg/scenes.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>

#include "json.hpp"
#include "motionseg/imageio.hpp"
#include "motionseg/rng.hpp"

namespace mseg {

namespace {

using json = nlohmann::json;

// Elongated ellipse anchored to an image border, mimicking an instrument
// entering the view.
struct ToolShape {
  double ax, ay;      // anchor on the border
  double dirx, diry;  // unit axis pointing inward
  double half_len;
  double half_width;
  double intensity;
  double tint[3];
};

struct Pose {
  double ax, ay;
  double dirx, diry;
};

bool inside(const ToolShape& t, const Pose& p, double x, double y) {
  // Center sits inward from the anchor so the base extends past the border.
  const double cx = p.ax + p.dirx * t.half_len * 0.8;
  const double cy = p.ay + p.diry * t.half_len * 0.8;
  const double dx = x - cx, dy = y - cy;
  const double along = dx * p.dirx + dy * p.diry;
  const double perp = -dx * p.diry + dy * p.dirx;
  const double a = along / t.half_len, b = perp / t.half_width;
  return a * a + b * b <= 1.0;
}

ToolShape draw_tool(const SceneConfig& cfg, RandomStream& rng) {
  ToolShape t;
  const double size = cfg.image_size;
  const int side = rng.uniform_int(0, 3);
  const double pos = rng.uniform(0.2, 0.8) * size;
  switch (side) {
    case 0: t.ax = pos; t.ay = 0; t.dirx = 0; t.diry = 1; break;
    case 1: t.ax = pos; t.ay = size - 1; t.dirx = 0; t.diry = -1; break;
    case 2: t.ax = 0; t.ay = pos; t.dirx = 1; t.diry = 0; break;
    default: t.ax = size - 1; t.ay = pos; t.dirx = -1; t.diry = 0; break;
  }
  const double jitter = rng.uniform(-0.4, 0.4);
  const double c = std::cos(jitter), s = std::sin(jitter);
  const double dx = c * t.dirx - s * t.diry;
  const double dy = s * t.dirx + c * t.diry;
  t.dirx = dx;
  t.diry = dy;
  t.half_len = rng.uniform(0.55, 0.95) * size * 0.5;
  t.half_width = rng.uniform(2.5, 5.0) * size / 64.0;
  t.intensity = rng.uniform(0.75, 0.95);
  t.tint[0] = 1.0;
  t.tint[1] = rng.uniform(0.9, 1.0);
  t.tint[2] = rng.uniform(0.85, 1.0);
  return t;
}

struct BgTexture {
  double fx[4], fy[4], phase[4];
  double scale;
  double tint[3] = {0.95, 1.0, 0.9};

  double value(double x, double y) const {
    double v = 0.4;
    for (int j = 0; j < 4; ++j)
      v += scale * 0.5 * std::sin(2 * std::numbers::pi * (fx[j] * x + fy[j] * y) + phase[j]);
    return std::clamp(v, 0.05, 0.95);
  }
};

BgTexture draw_texture(const SceneConfig& cfg, RandomStream& rng) {
  BgTexture bg;
  bg.scale = cfg.texture_scale;
  for (int j = 0; j < 4; ++j) {
    const double f = rng.uniform(0.5, 2.0) * (j + 1) / cfg.image_size;
    const double ang = rng.uniform(0.0, 2 * std::numbers::pi);
    bg.fx[j] = f * std::cos(ang);
    bg.fy[j] = f * std::sin(ang);
    bg.phase[j] = rng.uniform(0.0, 2 * std::numbers::pi);
  }
  return bg;
}

Pose moved_pose(const ToolShape& t, const ObjectMotion& m) {
  Pose p;
  p.ax = t.ax + m.dx;
  p.ay = t.ay + m.dy;
  const double c = std::cos(m.rot), s = std::sin(m.rot);
  p.dirx = c * t.dirx - s * t.diry;
  p.diry = s * t.dirx + c * t.diry;
  return p;
}

}  // namespace

ScenePair gen_scene_pair(const SceneConfig& cfg, int index) {
  cfg.validate();
  if (index < 0) throw ConfigError("gen_scene_pair: index must be >= 0");
  RandomStream rng = RandomStream(cfg.seed).fork(static_cast<uint64_t>(index));

  const int n = cfg.image_size;
  const BgTexture bg = draw_texture(cfg, rng);
  std::vector<ToolShape> tools;
  for (int k = 0; k < cfg.n_objects; ++k) tools.push_back(draw_tool(cfg, rng));

  ScenePair out;
  out.motions.resize(cfg.n_objects);
  double mean_dx = 0, mean_dy = 0;
  int n_moving = 0;
  for (int k = 0; k < cfg.n_objects; ++k) {
    ObjectMotion& m = out.motions[k];
    m.still = rng.bernoulli(cfg.p_still);
    // Draws happen regardless of stillness so the still flag alone decides
    // the stream alignment between configs differing only in p_still.
    const double ang = rng.uniform(0.0, 2 * std::numbers::pi);
    const double mag = cfg.obj_motion_magnitude * rng.uniform(0.4, 1.0);
    const double rot = rng.uniform(-1.0, 1.0) * cfg.obj_rotation_magnitude;
    if (!m.still && cfg.obj_motion_magnitude > 0) {
      m.dx = mag * std::cos(ang);
      m.dy = mag * std::sin(ang);
      m.rot = rot;
      mean_dx += m.dx;
      mean_dy += m.dy;
      ++n_moving;
    }
  }
  if (cfg.bg_motion_magnitude > 0) {
    const double ang = rng.uniform(0.0, 2 * std::numbers::pi);
    double ux = std::cos(ang), uy = std::sin(ang);
    if (n_moving > 0) {
      const double norm = std::hypot(mean_dx, mean_dy);
      if (norm > 1e-12) {
        ux = cfg.bg_fg_correlation * mean_dx / norm + (1 - cfg.bg_fg_correlation) * ux;
        uy = cfg.bg_fg_correlation * mean_dy / norm + (1 - cfg.bg_fg_correlation) * uy;
        const double un = std::hypot(ux, uy);
        if (un > 1e-12) {
          ux /= un;
          uy /= un;
        }
      }
    }
    out.bg_dx = ux * cfg.bg_motion_magnitude;
    out.bg_dy = uy * cfg.bg_motion_magnitude;
  }

  out.frame_t = Image(n, n, cfg.channels);
  out.frame_t1 = Image(n, n, cfg.channels);
  out.gt_mask = BinaryMask(n, n);
  out.flow = FlowField(n, n);

  std::vector<Pose> pose_t(cfg.n_objects), pose_t1(cfg.n_objects);
  for (int k = 0; k < cfg.n_objects; ++k) {
    pose_t[k] = {tools[k].ax, tools[k].ay, tools[k].dirx, tools[k].diry};
    pose_t1[k] = moved_pose(tools[k], out.motions[k]);
  }

  auto shade = [&](const ToolShape& t, int c) {
    return std::clamp(t.intensity * (cfg.channels == 3 ? t.tint[c] : 1.0), 0.0, 1.0);
  };

  for (int y = 0; y < n; ++y)
    for (int x = 0; x < n; ++x) {
      int owner_t = -1, owner_t1 = -1;
      for (int k = 0; k < cfg.n_objects; ++k) {
        if (inside(tools[k], pose_t[k], x, y)) owner_t = k;  // topmost wins
        if (inside(tools[k], pose_t1[k], x, y)) owner_t1 = k;
      }
      for (int c = 0; c < cfg.channels; ++c) {
        const double bt = bg.value(x, y) * (cfg.channels == 3 ? bg.tint[c] : 1.0);
        const double bt1 = bg.value(x - out.bg_dx, y - out.bg_dy) *
                           (cfg.channels == 3 ? bg.tint[c] : 1.0);
        out.frame_t.at(x, y, c) = owner_t >= 0 ? shade(tools[owner_t], c) : bt;
        out.frame_t1.at(x, y, c) = owner_t1 >= 0 ? shade(tools[owner_t1], c) : bt1;
      }
      if (owner_t >= 0) {
        out.gt_mask.at(x, y) = 1;
        const ObjectMotion& m = out.motions[owner_t];
        const ToolShape& t = tools[owner_t];
        // Rigid displacement of the owner at this pixel.
        const double rx = x - t.ax, ry = y - t.ay;
        const double c = std::cos(m.rot), s = std::sin(m.rot);
        out.flow.u[out.flow.idx(x, y)] = t.ax + m.dx + c * rx - s * ry - x;
        out.flow.v[out.flow.idx(x, y)] = t.ay + m.dy + s * rx + c * ry - y;
      } else {
        out.flow.u[out.flow.idx(x, y)] = out.bg_dx;
        out.flow.v[out.flow.idx(x, y)] = out.bg_dy;
      }
    }
  return out;
}

namespace {

json config_to_json(const SceneConfig& c) {
  return json{{"image_size", c.image_size},
              {"channels", c.channels},
              {"n_objects", c.n_objects},
              {"p_still", c.p_still},
              {"obj_motion_magnitude", c.obj_motion_magnitude},
              {"obj_rotation_magnitude", c.obj_rotation_magnitude},
              {"bg_motion_magnitude", c.bg_motion_magnitude},
              {"bg_fg_correlation", c.bg_fg_correlation},
              {"texture_scale", c.texture_scale},
              {"seed", c.seed}};
}

SceneConfig config_from_json(const json& j) {
  SceneConfig c;
  c.image_size = j.value("image_size", c.image_size);
  c.channels = j.value("channels", c.channels);
  c.n_objects = j.value("n_objects", c.n_objects);
  c.p_still = j.value("p_still", c.p_still);
  c.obj_motion_magnitude = j.value("obj_motion_magnitude", c.obj_motion_magnitude);
  c.obj_rotation_magnitude =
      j.value("obj_rotation_magnitude", c.obj_rotation_magnitude);
  c.bg_motion_magnitude = j.value("bg_motion_magnitude", c.bg_motion_magnitude);
  c.bg_fg_correlation = j.value("bg_fg_correlation", c.bg_fg_correlation);
  c.texture_scale = j.value("texture_scale", c.texture_scale);
  c.seed = j.value("seed", c.seed);
  return c;
}

}  // namespace

DatasetManifest gen_dataset(const SceneConfig& cfg, int n_pairs,
                            const std::filesystem::path& out_dir) {
  if (n_pairs < 1) throw ParamError("gen_dataset: n_pairs must be >= 1");
  cfg.validate();
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw IoError("gen_dataset: cannot create " + out_dir.string());

  DatasetManifest manifest;
  manifest.config = cfg;
  json jitems = json::array();
  for (int i = 0; i < n_pairs; ++i) {
    const ScenePair pair = gen_scene_pair(cfg, i);
    char id[16];
    std::snprintf(id, sizeof(id), "pair_%04d", i);
    DatasetItem item;
    item.id = id;
    item.frame_t = out_dir / (item.id + std::string("_t.png"));
    item.frame_t1 = out_dir / (item.id + std::string("_t1.png"));
    item.mask = out_dir / (item.id + std::string("_mask.png"));
    item.flow = out_dir / (item.id + std::string("_flow.flo"));
    write_png(item.frame_t, pair.frame_t);
    write_png(item.frame_t1, pair.frame_t1);
    write_mask_png(item.mask, pair.gt_mask);
    write_flo(item.flow, pair.flow);
    jitems.push_back({{"id", item.id},
                      {"frame_t", item.frame_t.filename().string()},
                      {"frame_t1", item.frame_t1.filename().string()},
                      {"mask", item.mask.filename().string()},
                      {"flow", item.flow.filename().string()}});
    manifest.items.push_back(std::move(item));
  }
  json j{{"config", config_to_json(cfg)}, {"items", jitems}};
  std::ofstream out(out_dir / "manifest.json");
  out << j.dump(2) << "\n";
  if (!out) throw IoError("gen_dataset: manifest write failed");
  return manifest;
}

DatasetManifest load_external_dataset(const std::filesystem::path& dir,
                                      bool with_masks, bool with_flows) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(dir))
    throw IngestError("not a directory: " + dir.string());

  DatasetManifest manifest;
  const fs::path mpath = dir / "manifest.json";
  if (fs::exists(mpath)) {
    std::ifstream in(mpath);
    json j;
    try {
      in >> j;
    } catch (const json::exception& e) {
      throw IngestError("bad manifest " + mpath.string() + ": " + e.what());
    }
    if (j.contains("config")) manifest.config = config_from_json(j["config"]);
    for (const auto& ji : j["items"]) {
      DatasetItem item;
      item.id = ji.at("id");
      item.frame_t = dir / ji.at("frame_t").get<std::string>();
      item.frame_t1 = dir / ji.at("frame_t1").get<std::string>();
      if (ji.contains("mask") && !ji["mask"].is_null())
        item.mask = dir / ji.at("mask").get<std::string>();
      if (ji.contains("flow") && !ji["flow"].is_null())
        item.flow = dir / ji.at("flow").get<std::string>();
      manifest.items.push_back(std::move(item));
    }
  } else {
    // Raw layout: frames/*.png in consecutive pairs; optional masks/, flows/.
    const fs::path frames = dir / "frames";
    if (!fs::is_directory(frames))
      throw IngestError("missing manifest.json or frames/ in " + dir.string());
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(frames))
      if (e.path().extension() == ".png") files.push_back(e.path());
    std::sort(files.begin(), files.end());
    if (files.size() % 2 != 0)
      throw IngestError("odd frame count in " + frames.string() +
                        ": frames must pair consecutively");
    for (size_t i = 0; i + 1 < files.size(); i += 2) {
      DatasetItem item;
      item.id = files[i].stem().string();
      item.frame_t = files[i];
      item.frame_t1 = files[i + 1];
      const fs::path mask = dir / "masks" / (item.id + ".png");
      const fs::path flow = dir / "flows" / (item.id + ".flo");
      if (fs::exists(mask)) item.mask = mask;
      if (fs::exists(flow)) item.flow = flow;
      manifest.items.push_back(std::move(item));
    }
  }

  for (const auto& item : manifest.items) {
    if (!fs::exists(item.frame_t))
      throw IngestError("missing frame: " + item.frame_t.string());
    if (!fs::exists(item.frame_t1))
      throw IngestError("missing frame: " + item.frame_t1.string());
    if (with_masks && (item.mask.empty() || !fs::exists(item.mask)))
      throw IngestError("missing mask for item " + item.id);
    if (with_flows && (item.flow.empty() || !fs::exists(item.flow)))
      throw IngestError("missing flow for item " + item.id +
                        " (no bundled flow estimator)");
  }
  if (!with_masks)
    for (auto& item : manifest.items) item.mask.clear();
  if (!with_flows)
    for (auto& item : manifest.items) item.flow.clear();
  return manifest;
}

std::vector<Sample> load_samples(const DatasetManifest& manifest) {
  std::vector<Sample> out;
  out.reserve(manifest.items.size());
  for (const auto& item : manifest.items) {
    Sample s;
    s.frame_t = read_png(item.frame_t);
    s.frame_t1 = read_png(item.frame_t1);
    if (!item.mask.empty()) s.gt_mask = read_mask_png(item.mask);
    if (!item.flow.empty()) s.flow = read_flo(item.flow);
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace mseg
