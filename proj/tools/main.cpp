// Command-line front end: dataset generation, label corruption, training,
// evaluation, selection sweeps and plotting on top of the motionseg library.

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "motionseg/corruption.hpp"
#include "motionseg/evalstats.hpp"
#include "motionseg/imageio.hpp"
#include "motionseg/pipeline.hpp"
#include "motionseg/plots.hpp"
#include "motionseg/scenes.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace mseg;

namespace {

// Relative output paths land under $MOTIONSEG_OUT_ROOT when it is set.
fs::path resolve_out(const fs::path& p) {
  if (p.is_absolute()) return p;
  if (const char* root = std::getenv("MOTIONSEG_OUT_ROOT")) return fs::path(root) / p;
  return p;
}

void write_json(const fs::path& path, const json& j) {
  if (!path.parent_path().empty()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw IoError(path.string() + ": " + e.what());
  }
  return j;
}

std::vector<Sample> load_dataset(const fs::path& dir, bool need_masks,
                                 bool need_flows) {
  return load_samples(load_external_dataset(dir, need_masks, need_flows));
}

std::vector<BinaryMask> gt_masks_of(const std::vector<Sample>& samples) {
  std::vector<BinaryMask> out;
  out.reserve(samples.size());
  for (const auto& s : samples) {
    if (s.gt_mask.width == 0) throw IngestError("dataset sample lacks a gt mask");
    out.push_back(s.gt_mask);
  }
  return out;
}

// Label directories: labels.json (ordered file list) plus one PNG per sample.
void write_labels(const fs::path& dir, const std::vector<BinaryMask>& labels) {
  fs::create_directories(dir);
  json names = json::array();
  char buf[32];
  for (size_t i = 0; i < labels.size(); ++i) {
    std::snprintf(buf, sizeof buf, "label_%04zu.png", i);
    write_mask_png(dir / buf, labels[i]);
    names.push_back(buf);
  }
  write_json(dir / "labels.json", json{{"labels", names}});
}

std::vector<BinaryMask> load_labels(const fs::path& dir) {
  std::vector<fs::path> files;
  if (fs::exists(dir / "labels.json")) {
    const json j = read_json(dir / "labels.json");
    for (const auto& name : j.at("labels"))
      files.push_back(dir / name.get<std::string>());
  } else {
    for (const auto& e : fs::directory_iterator(dir))
      if (e.path().extension() == ".png") files.push_back(e.path());
    std::sort(files.begin(), files.end());
  }
  if (files.empty()) throw IngestError("no label masks in " + dir.string());
  std::vector<BinaryMask> out;
  out.reserve(files.size());
  for (const auto& f : files) out.push_back(read_mask_png(f));
  return out;
}

json train_config_to_json(const TrainConfig& c) {
  return json{{"mode", to_string(c.mode)},
              {"epochs_step1", c.epochs_step1},
              {"epochs_step2", c.epochs_step2},
              {"batch_size", c.batch_size},
              {"lr_gan", c.lr_gan},
              {"lr_teacher", c.lr_teacher},
              {"lr_proxy", c.lr_proxy},
              {"lr_student", c.lr_student},
              {"beta1_gan", c.beta1_gan},
              {"beta2_gan", c.beta2_gan},
              {"beta1", c.beta1},
              {"beta2", c.beta2},
              {"lr_halve_after", c.lr_halve_after},
              {"lr_halve_every", c.lr_halve_every},
              {"eps_teacher", c.eps_teacher},
              {"eps_proxy", c.eps_proxy},
              {"eps_iou", c.eps_iou},
              {"alpha_p", c.alpha_p},
              {"alpha_s", c.alpha_s},
              {"image_size", c.image_size},
              {"base_channels", c.base_channels},
              {"noise_size", c.noise_size},
              {"teacher_depth", c.teacher_depth},
              {"proxy_depth", c.proxy_depth},
              {"student_depth", c.student_depth},
              {"lociou_window", c.lociou_window},
              {"seed", c.seed}};
}

void train_config_from_json(const json& j, TrainConfig& c) {
  const auto get = [&](const char* key, auto& field) {
    if (j.contains(key)) field = j.at(key).get<std::decay_t<decltype(field)>>();
  };
  if (j.contains("mode")) c.mode = train_mode_from_string(j.at("mode"));
  get("epochs_step1", c.epochs_step1);
  get("epochs_step2", c.epochs_step2);
  get("batch_size", c.batch_size);
  get("lr_gan", c.lr_gan);
  get("lr_teacher", c.lr_teacher);
  get("lr_proxy", c.lr_proxy);
  get("lr_student", c.lr_student);
  get("beta1_gan", c.beta1_gan);
  get("beta2_gan", c.beta2_gan);
  get("beta1", c.beta1);
  get("beta2", c.beta2);
  get("lr_halve_after", c.lr_halve_after);
  get("lr_halve_every", c.lr_halve_every);
  get("eps_teacher", c.eps_teacher);
  get("eps_proxy", c.eps_proxy);
  get("eps_iou", c.eps_iou);
  get("alpha_p", c.alpha_p);
  get("alpha_s", c.alpha_s);
  get("image_size", c.image_size);
  get("base_channels", c.base_channels);
  get("noise_size", c.noise_size);
  get("teacher_depth", c.teacher_depth);
  get("proxy_depth", c.proxy_depth);
  get("student_depth", c.student_depth);
  get("lociou_window", c.lociou_window);
  get("seed", c.seed);
}

// Shared options for the training-style commands. CLI values override the
// config file, which overrides the built-in defaults.
struct TrainCliOpts {
  std::string config_file;
  TrainConfig cfg;

  void attach(CLI::App* cmd) {
    cmd->add_option("--config", config_file, "JSON config file")
        ->check(CLI::ExistingFile);
    cmd->add_option_function<std::string>(
           "--mode", [this](const std::string& s) { cfg.mode = train_mode_from_string(s); },
           "2step | 3step")
        ->check(CLI::IsMember({"2step", "3step"}));
    cmd->add_option("--epochs1", cfg.epochs_step1, "teacher/proxy epochs");
    cmd->add_option("--epochs2", cfg.epochs_step2, "student epochs");
    cmd->add_option("--batch", cfg.batch_size, "batch size");
    cmd->add_option("--base-channels", cfg.base_channels, "network width");
    cmd->add_option("--image-size", cfg.image_size, "square image size");
    cmd->add_option("--window", cfg.lociou_window,
                    "local-IoU window (0: image_size/4)");
    cmd->add_option("--seed", cfg.seed, "master seed");
    cmd->add_option("--lr-gan", cfg.lr_gan);
    cmd->add_option("--lr-teacher", cfg.lr_teacher);
    cmd->add_option("--lr-proxy", cfg.lr_proxy);
    cmd->add_option("--lr-student", cfg.lr_student);
    cmd->add_option("--alpha-p", cfg.alpha_p);
    cmd->add_option("--alpha-s", cfg.alpha_s);
    cmd->add_option("--eps-teacher", cfg.eps_teacher);
    cmd->add_option("--eps-proxy", cfg.eps_proxy);
    cmd->add_option("--eps-iou", cfg.eps_iou);
    // Config file first, then let CLI11 re-apply explicitly passed options.
    cmd->preparse_callback([this, cmd](size_t) {
      // nothing; config merge happens in resolve() after parse
      (void)cmd;
    });
  }

  // Call after parse: re-applies the file under the CLI values.
  TrainConfig resolve(CLI::App* cmd) const {
    TrainConfig out;  // defaults
    if (!config_file.empty()) train_config_from_json(read_json(config_file), out);
    // CLI overrides: copy any field whose option was actually given.
    TrainConfig cli = cfg;
    const auto passed = [&](const std::string& name) {
      const CLI::Option* o = cmd->get_option_no_throw(name);
      return o != nullptr && o->count() > 0;
    };
    if (passed("--mode")) out.mode = cli.mode;
    if (passed("--epochs1")) out.epochs_step1 = cli.epochs_step1;
    if (passed("--epochs2")) out.epochs_step2 = cli.epochs_step2;
    if (passed("--batch")) out.batch_size = cli.batch_size;
    if (passed("--base-channels")) out.base_channels = cli.base_channels;
    if (passed("--image-size")) out.image_size = cli.image_size;
    if (passed("--window")) out.lociou_window = cli.lociou_window;
    if (passed("--seed")) out.seed = cli.seed;
    if (passed("--lr-gan")) out.lr_gan = cli.lr_gan;
    if (passed("--lr-teacher")) out.lr_teacher = cli.lr_teacher;
    if (passed("--lr-proxy")) out.lr_proxy = cli.lr_proxy;
    if (passed("--lr-student")) out.lr_student = cli.lr_student;
    if (passed("--alpha-p")) out.alpha_p = cli.alpha_p;
    if (passed("--alpha-s")) out.alpha_s = cli.alpha_s;
    if (passed("--eps-teacher")) out.eps_teacher = cli.eps_teacher;
    if (passed("--eps-proxy")) out.eps_proxy = cli.eps_proxy;
    if (passed("--eps-iou")) out.eps_iou = cli.eps_iou;
    out.validate();
    return out;
  }
};

// Resolved-config snapshot plus the list of artifacts the command produced,
// one run.json per output directory.
void write_run_manifest(const fs::path& out_dir, const std::string& command,
                        const json& resolved,
                        const std::vector<std::string>& artifacts) {
  write_json(out_dir / "run.json", json{{"command", command},
                                        {"config", resolved},
                                        {"artifacts", artifacts}});
}

std::vector<BinaryMask> binarized_net_masks(Segmenter& net,
                                            const std::vector<Sample>& data,
                                            double eps) {
  std::vector<BinaryMask> out;
  out.reserve(data.size());
  const bool from_flow = net.spec().role == Role::teacher_segmenter;
  for (const auto& s : data) {
    const ProbMask pm =
        from_flow ? net.segment(normalize_flow(s.flow)) : net.segment(s.frame_t);
    out.push_back(binarize(pm, eps));
  }
  return out;
}

std::vector<EpochStats> read_metrics_csv(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw IoError("empty metrics file " + path.string());
  std::vector<EpochStats> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string f;
    EpochStats r;
    std::getline(ss, r.stage, ',');
    const auto next = [&] {
      std::getline(ss, f, ',');
      return std::stod(f);
    };
    r.epoch = static_cast<int>(next());
    r.loss_d = next();
    r.loss_g = next();
    r.loss_cycle = next();
    r.loss_proxy = next();
    r.loss_student = next();
    r.teacher_iou = next();
    r.proxy_iou = next();
    r.student_iou = next();
    r.selected_fraction = next();
    r.skipped_fraction = next();
    rows.push_back(r);
  }
  return rows;
}

std::vector<double> parse_double_list(const std::string& s) {
  std::vector<double> out;
  std::stringstream ss(s);
  std::string tok;
  while (std::getline(ss, tok, ',')) out.push_back(std::stod(tok));
  return out;
}

std::vector<int> parse_int_list(const std::string& s) {
  std::vector<int> out;
  for (double v : parse_double_list(s)) out.push_back(static_cast<int>(v));
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"unsupervised motion segmentation pipeline"};
  app.require_subcommand(1);

  // ---- gen-data
  auto* gen = app.add_subcommand("gen-data", "generate a synthetic video dataset");
  std::string gen_out;
  int gen_n = 64;
  SceneConfig scene;
  gen->add_option("--out", gen_out, "output directory")->required();
  gen->add_option("--n", gen_n, "number of frame pairs");
  gen->add_option("--image-size", scene.image_size);
  gen->add_option("--channels", scene.channels);
  gen->add_option("--objects", scene.n_objects, "objects per scene (1-4)");
  gen->add_option("--p-still", scene.p_still);
  gen->add_option("--obj-motion", scene.obj_motion_magnitude);
  gen->add_option("--obj-rotation", scene.obj_rotation_magnitude);
  gen->add_option("--bg-motion", scene.bg_motion_magnitude);
  gen->add_option("--bg-fg-corr", scene.bg_fg_correlation);
  gen->add_option("--texture-scale", scene.texture_scale);
  gen->add_option("--seed", scene.seed);
  gen->callback([&] {
    const fs::path out = resolve_out(gen_out);
    const DatasetManifest m = gen_dataset(scene, gen_n, out);
    std::vector<std::string> artifacts{"manifest.json"};
    for (const auto& it : m.items) {
      artifacts.push_back(it.frame_t.filename().string());
      artifacts.push_back(it.frame_t1.filename().string());
      artifacts.push_back(it.mask.filename().string());
      artifacts.push_back(it.flow.filename().string());
    }
    write_run_manifest(out, "gen-data",
                       json{{"n", gen_n},
                            {"image_size", scene.image_size},
                            {"channels", scene.channels},
                            {"n_objects", scene.n_objects},
                            {"p_still", scene.p_still},
                            {"obj_motion_magnitude", scene.obj_motion_magnitude},
                            {"obj_rotation_magnitude", scene.obj_rotation_magnitude},
                            {"bg_motion_magnitude", scene.bg_motion_magnitude},
                            {"bg_fg_correlation", scene.bg_fg_correlation},
                            {"texture_scale", scene.texture_scale},
                            {"seed", scene.seed}},
                       artifacts);
    std::cout << "wrote " << gen_n << " pairs to " << out << '\n';
  });

  // ---- corrupt
  auto* cor = app.add_subcommand("corrupt", "calibrated gt-mask corruption");
  std::string cor_data, cor_out, cor_kind = "erosion";
  double cor_target = 0.6, cor_tol = 0.02;
  uint64_t cor_seed = 0;
  cor->add_option("--dataset", cor_data, "dataset directory")->required();
  cor->add_option("--out", cor_out, "output label directory")->required();
  cor->add_option("--noise", cor_kind, "erosion | eros-dil | tool-drop")
      ->check(CLI::IsMember({"erosion", "eros-dil", "tool-drop"}));
  cor->add_option("--target-iou", cor_target)->required();
  cor->add_option("--tolerance", cor_tol);
  cor->add_option("--seed", cor_seed);
  cor->callback([&] {
    const auto samples = load_dataset(cor_data, true, false);
    const auto gts = gt_masks_of(samples);
    const CorruptionKind kind = corruption_kind_from_string(cor_kind);
    const CalibrationResult cal =
        calibrate_corruption(gts, kind, cor_target, cor_seed, cor_tol);
    const auto noisy = corrupt_dataset(gts, cal.spec);
    const fs::path out = resolve_out(cor_out);
    write_labels(out, noisy);
    write_json(out / "calibration.json",
               json{{"kind", to_string(cal.spec.kind)},
                    {"radius", cal.spec.radius},
                    {"drop_prob", cal.spec.drop_prob},
                    {"seed", cal.spec.seed},
                    {"target_iou", cal.level.target_iou},
                    {"achieved_iou", cal.level.achieved_iou},
                    {"tolerance", cal.level.tolerance}});
    write_run_manifest(out, "corrupt",
                       json{{"noise", cor_kind},
                            {"target_iou", cor_target},
                            {"tolerance", cor_tol},
                            {"seed", cor_seed}},
                       [&] {
                         std::vector<std::string> a{"labels.json",
                                                    "calibration.json"};
                         char buf[32];
                         for (size_t i = 0; i < noisy.size(); ++i) {
                           std::snprintf(buf, sizeof buf, "label_%04zu.png", i);
                           a.push_back(buf);
                         }
                         return a;
                       }());
    std::cout << "calibrated " << cor_kind << " to IoU " << cal.level.achieved_iou
              << " (target " << cor_target << ")\n";
  });

  // ---- pseudo-label
  auto* pl = app.add_subcommand("pseudo-label",
                                "teacher pseudo-labels from dataset flows");
  std::string pl_data, pl_ckpt, pl_out;
  double pl_eps = 0.5;
  pl->add_option("--dataset", pl_data)->required();
  pl->add_option("--teacher", pl_ckpt, "teacher checkpoint")->required();
  pl->add_option("--out", pl_out)->required();
  pl->add_option("--eps", pl_eps, "binarization threshold");
  pl->callback([&] {
    auto samples = load_dataset(pl_data, false, true);
    Segmenter teacher = load_network<Segmenter>(pl_ckpt);
    const auto labels = make_pseudo_labels(teacher, samples, pl_eps);
    const fs::path out = resolve_out(pl_out);
    write_labels(out, labels);
    std::vector<std::string> artifacts{"labels.json"};
    char buf[32];
    for (size_t i = 0; i < labels.size(); ++i) {
      std::snprintf(buf, sizeof buf, "label_%04zu.png", i);
      artifacts.push_back(buf);
    }
    write_run_manifest(out, "pseudo-label",
                       json{{"teacher", pl_ckpt}, {"eps", pl_eps}}, artifacts);
    std::cout << "wrote " << labels.size() << " pseudo-labels\n";
  });

  // ---- train (full pipeline)
  auto* tr = app.add_subcommand("train", "full teacher/proxy/student pipeline");
  std::string tr_data, tr_priors, tr_out;
  TrainCliOpts tr_opts;
  tr->add_option("--dataset", tr_data, "dataset with flows")->required();
  tr->add_option("--priors", tr_priors, "dataset whose gt masks act as shape priors")
      ->required();
  tr->add_option("--out", tr_out)->required();
  tr_opts.attach(tr);
  tr->callback([&] {
    const TrainConfig cfg = tr_opts.resolve(tr);
    // gt masks are optional for the pipeline but drive the reported IoUs.
    std::vector<Sample> data;
    try {
      data = load_dataset(tr_data, true, true);
    } catch (const IngestError&) {
      data = load_dataset(tr_data, false, true);
    }
    const auto priors = gt_masks_of(load_dataset(tr_priors, true, false));
    const fs::path out = resolve_out(tr_out);
    fs::create_directories(out);
    write_run_manifest(out, "train", train_config_to_json(cfg),
                       {"teacher.ckpt", "generator.ckpt", "disc_global.ckpt",
                        "disc_patch.ckpt", "proxy.ckpt", "student.ckpt",
                        "metrics.csv", "pseudo_labels/", "summary.json"});
    TrainResult res = run_training(cfg, data, priors, out);
    write_labels(out / "pseudo_labels", res.pseudo_labels);
    json summary{{"pseudo_label_count", res.pseudo_labels.size()}};
    if (!res.history.empty()) {
      for (auto it = res.history.rbegin(); it != res.history.rend(); ++it) {
        if (it->teacher_iou >= 0 && !summary.contains("teacher_iou"))
          summary["teacher_iou"] = it->teacher_iou;
        if (it->proxy_iou >= 0 && !summary.contains("proxy_iou"))
          summary["proxy_iou"] = it->proxy_iou;
        if (it->student_iou >= 0 && !summary.contains("student_iou"))
          summary["student_iou"] = it->student_iou;
      }
    }
    write_json(out / "summary.json", summary);
    std::cout << "training finished; artifacts in " << out << '\n';
  });

  // ---- train-noisy (proxy + student on fixed labels)
  auto* tn = app.add_subcommand(
      "train-noisy", "train proxy and student against fixed (noisy) labels");
  std::string tn_data, tn_labels, tn_out;
  TrainCliOpts tn_opts;
  bool tn_no_student = false;
  tn->add_option("--dataset", tn_data)->required();
  tn->add_option("--labels", tn_labels, "label directory")->required();
  tn->add_option("--out", tn_out)->required();
  tn->add_flag("--no-student", tn_no_student, "stop after the proxy");
  tn_opts.attach(tn);
  tn->callback([&] {
    const TrainConfig cfg = tn_opts.resolve(tn);
    const auto data = load_dataset(tn_data, true, false);
    const auto labels = load_labels(tn_labels);
    if (labels.size() != data.size())
      throw IngestError("label count does not match dataset size");
    const fs::path out = resolve_out(tn_out);
    fs::create_directories(out);
    write_run_manifest(out, "train-noisy", train_config_to_json(cfg),
                       tn_no_student
                           ? std::vector<std::string>{"proxy.ckpt", "metrics.csv",
                                                      "summary.json"}
                           : std::vector<std::string>{"proxy.ckpt", "student.ckpt",
                                                      "metrics.csv",
                                                      "summary.json"});

    std::vector<EpochStats> history;
    Segmenter proxy = train_proxy_on_labels(cfg, data, labels, &history);
    {
      auto refs = proxy.params();
      save_checkpoint(out / "proxy.ckpt", proxy.spec(), refs);
    }
    json summary{{"label_iou", evaluate_masks(gt_masks_of(data), labels).mean_iou},
                 {"proxy_iou", mean_iou_vs_gt(proxy, data, cfg.eps_proxy)}};
    if (!tn_no_student) {
      Segmenter student =
          train_student_on_labels(cfg, proxy, data, labels, &history);
      auto refs = student.params();
      save_checkpoint(out / "student.ckpt", student.spec(), refs);
      summary["student_iou"] = mean_iou_vs_gt(student, data, cfg.eps_proxy);
    }
    write_metrics_csv(out / "metrics.csv", history);
    write_json(out / "summary.json", summary);
    std::cout << summary.dump(2) << '\n';
  });

  // ---- eval
  auto* ev = app.add_subcommand("eval", "evaluate a checkpoint or label set");
  std::string ev_data, ev_net, ev_labels, ev_out;
  double ev_eps = 0.5;
  ev->add_option("--dataset", ev_data)->required();
  ev->add_option("--net", ev_net, "segmenter checkpoint");
  ev->add_option("--labels", ev_labels, "label directory to score instead");
  ev->add_option("--eps", ev_eps);
  ev->add_option("--out", ev_out, "report JSON path")->required();
  ev->callback([&] {
    if (ev_net.empty() == ev_labels.empty())
      throw ParamError("eval: pass exactly one of --net / --labels");
    const bool need_flows = !ev_net.empty() &&
        read_checkpoint_spec(ev_net).role == Role::teacher_segmenter;
    const auto data = load_dataset(ev_data, true, need_flows);
    const auto gts = gt_masks_of(data);
    std::vector<BinaryMask> preds;
    if (!ev_net.empty()) {
      Segmenter net = load_network<Segmenter>(ev_net);
      preds = binarized_net_masks(net, data, ev_eps);
    } else {
      preds = load_labels(ev_labels);
      if (preds.size() != gts.size())
        throw IngestError("label count does not match dataset size");
    }
    const EvalReport rep = evaluate_masks(gts, preds);
    const ToolHistogram hist = tool_histogram(gts, preds);
    json bins = json::array();
    for (int i = 0; i < 10; ++i) bins.push_back(hist.mass(i));
    write_json(resolve_out(ev_out),
               json{{"n", rep.n},
                    {"mean_iou", rep.mean_iou},
                    {"mean_pixel_accuracy", rep.mean_pa},
                    {"aggregate_iou", aggregate_iou(gts, preds)},
                    {"tool_iou_hist", bins},
                    {"tool_count", hist.n},
                    {"endpoint_mass", hist.endpoint_mass()}});
    const fs::path report = resolve_out(ev_out);
    const fs::path dir =
        report.parent_path().empty() ? fs::path(".") : report.parent_path();
    write_run_manifest(dir, "eval",
                       json{{"net", ev_net}, {"labels", ev_labels}, {"eps", ev_eps}},
                       {report.filename().string()});
    std::cout << "mean IoU " << rep.mean_iou << " over " << rep.n << " pairs\n";
  });

  // ---- sweep
  auto* sw = app.add_subcommand("sweep",
                                "selection sweep over windows and thresholds");
  std::string sw_data, sw_labels, sw_proxy, sw_out;
  std::string sw_wlist = "8,16,32,64", sw_epslist = "0.1,0.3,0.5,0.7,0.9";
  double sw_eps_proxy = 0.5;
  sw->add_option("--dataset", sw_data)->required();
  sw->add_option("--labels", sw_labels, "pseudo-label directory")->required();
  sw->add_option("--proxy", sw_proxy, "proxy checkpoint")->required();
  sw->add_option("--w-list", sw_wlist, "comma-separated window sizes");
  sw->add_option("--eps-list", sw_epslist, "comma-separated thresholds");
  sw->add_option("--eps-proxy", sw_eps_proxy);
  sw->add_option("--out", sw_out, "output directory")->required();
  sw->callback([&] {
    const auto data = load_dataset(sw_data, true, false);
    const auto gts = gt_masks_of(data);
    const auto pseudos = load_labels(sw_labels);
    if (pseudos.size() != gts.size())
      throw IngestError("label count does not match dataset size");
    Segmenter proxy = load_network<Segmenter>(sw_proxy);
    const auto proxy_bins = binarized_net_masks(proxy, data, sw_eps_proxy);
    const auto rows = sweep_selection(gts, pseudos, proxy_bins,
                                      parse_int_list(sw_wlist),
                                      parse_double_list(sw_epslist));
    const fs::path out = resolve_out(sw_out);
    fs::create_directories(out);
    std::ofstream csv(out / "sweep.csv");
    csv.precision(10);
    csv << "window,eps,selected_fraction,effective_iou,mean_effective_iou,"
           "n_selected_samples,any_selection\n";
    for (const auto& r : rows)
      csv << r.window << ',' << r.eps << ',' << r.selected_fraction << ','
          << r.effective_iou << ',' << r.mean_effective_iou << ','
          << r.n_selected_samples << ',' << (r.any_selection ? 1 : 0) << '\n';
    write_sweep_svg(out / "sweep.svg", "selection sweep", rows);
    write_run_manifest(out, "sweep",
                       json{{"proxy", sw_proxy},
                            {"w_list", sw_wlist},
                            {"eps_list", sw_epslist},
                            {"eps_proxy", sw_eps_proxy}},
                       {"sweep.csv", "sweep.svg"});
    std::cout << "wrote " << rows.size() << " sweep rows to " << out << '\n';
  });

  // ---- noise-study
  auto* ns = app.add_subcommand(
      "noise-study", "corruption kinds x levels, proxy+student per cell");
  std::string ns_data, ns_out, ns_kinds = "erosion,eros-dil,tool-drop";
  std::string ns_targets = "0.8,0.6,0.4,0.2";
  uint64_t ns_cor_seed = 0;
  TrainCliOpts ns_opts;
  ns->add_option("--dataset", ns_data)->required();
  ns->add_option("--out", ns_out)->required();
  ns->add_option("--kinds", ns_kinds, "comma-separated corruption kinds");
  ns->add_option("--targets", ns_targets, "comma-separated IoU targets");
  ns->add_option("--corruption-seed", ns_cor_seed);
  ns_opts.attach(ns);
  ns->callback([&] {
    const TrainConfig cfg = ns_opts.resolve(ns);
    const auto data = load_dataset(ns_data, true, false);
    std::vector<CorruptionKind> kinds;
    {
      std::stringstream ss(ns_kinds);
      std::string tok;
      while (std::getline(ss, tok, ','))
        kinds.push_back(corruption_kind_from_string(tok));
    }
    const auto targets = parse_double_list(ns_targets);
    const auto cells = noise_study(cfg, data, kinds, targets, ns_cor_seed);

    const fs::path out = resolve_out(ns_out);
    fs::create_directories(out);
    json jcells = json::array();
    std::ofstream csv(out / "study.csv");
    csv.precision(10);
    csv << "kind,target_iou,achieved_iou,label_iou,proxy_iou,student_iou,"
           "endpoint_mass\n";
    for (const auto& c : cells) {
      json bins = json::array();
      for (int i = 0; i < 10; ++i) bins.push_back(c.hist.mass(i));
      jcells.push_back(json{{"kind", to_string(c.kind)},
                            {"target_iou", c.target_iou},
                            {"achieved_iou", c.achieved_iou},
                            {"label_iou", c.label_iou},
                            {"proxy_iou", c.proxy_iou},
                            {"student_iou", c.student_iou},
                            {"tool_iou_hist", bins},
                            {"endpoint_mass", c.hist.endpoint_mass()}});
      csv << to_string(c.kind) << ',' << c.target_iou << ',' << c.achieved_iou
          << ',' << c.label_iou << ',' << c.proxy_iou << ',' << c.student_iou
          << ',' << c.hist.endpoint_mass() << '\n';
      char buf[64];
      std::snprintf(buf, sizeof buf, "hist_%s_%02d.svg",
                    to_string(c.kind).c_str(),
                    static_cast<int>(c.target_iou * 100 + 0.5));
      write_histogram_svg(out / buf,
                          to_string(c.kind) + " D" +
                              std::to_string(static_cast<int>(c.target_iou * 100 + 0.5)),
                          c.hist);
    }
    write_json(out / "study.json", jcells);
    json cfgj = train_config_to_json(cfg);
    cfgj["kinds"] = ns_kinds;
    cfgj["targets"] = ns_targets;
    cfgj["corruption_seed"] = ns_cor_seed;
    write_run_manifest(out, "noise-study", cfgj,
                       {"study.json", "study.csv", "hist_*.svg"});
    std::cout << "wrote " << cells.size() << " study cells to " << out << '\n';
  });

  // ---- plot
  auto* plt = app.add_subcommand("plot", "render curves from a metrics.csv");
  std::string plt_metrics, plt_out;
  plt->add_option("--metrics", plt_metrics)->required()->check(CLI::ExistingFile);
  plt->add_option("--out", plt_out)->required();
  plt->callback([&] {
    const fs::path out = resolve_out(plt_out);
    write_history_plots(out, read_metrics_csv(plt_metrics));
    write_run_manifest(out, "plot", json{{"metrics", plt_metrics}},
                       {"losses.svg", "iou.svg"});
    std::cout << "plots written to " << out << '\n';
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
