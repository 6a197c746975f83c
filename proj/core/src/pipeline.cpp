#include "motionseg/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>

namespace mseg {

std::string to_string(TrainMode m) {
  return m == TrainMode::three_step ? "3step" : "2step";
}

TrainMode train_mode_from_string(const std::string& s) {
  if (s == "3step" || s == "three_step") return TrainMode::three_step;
  if (s == "2step" || s == "two_step") return TrainMode::two_step;
  throw ParamError("unknown train mode: " + s);
}

void TrainConfig::validate() const {
  if (epochs_step1 < 0 || epochs_step2 < 0)
    throw ConfigError("TrainConfig: epoch counts must be >= 0");
  if (batch_size < 1) throw ConfigError("TrainConfig: batch_size must be >= 1");
  if (lr_gan <= 0 || lr_teacher <= 0 || lr_proxy <= 0 || lr_student <= 0)
    throw ConfigError("TrainConfig: learning rates must be positive");
  if (eps_teacher < 0 || eps_teacher > 1 || eps_proxy < 0 || eps_proxy > 1 ||
      eps_iou < 0 || eps_iou > 1)
    throw ConfigError("TrainConfig: thresholds must be in [0,1]");
  if (alpha_p < 0 || alpha_p > 1 || alpha_s < 0 || alpha_s > 1)
    throw ConfigError("TrainConfig: alpha must be in [0,1]");
  if (lr_halve_every < 1)
    throw ConfigError("TrainConfig: lr_halve_every must be >= 1");
  if (image_size < 16 || image_size % 16 != 0)
    throw ConfigError("TrainConfig: image_size must be a positive multiple of 16");
  if (window() < 1 || image_size % window() != 0)
    throw ConfigError("TrainConfig: local-IoU window must divide image_size");
  augment.validate();
  loss.validate();
}

double lr_scale_for_epoch(const TrainConfig& cfg, int epoch) {
  if (epoch <= cfg.lr_halve_after) return 1.0;
  const int halvings = (epoch - cfg.lr_halve_after) / cfg.lr_halve_every;
  return std::pow(0.5, halvings);
}

void write_metrics_csv(const std::filesystem::path& path,
                       const std::vector<EpochStats>& history) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << "stage,epoch,loss_d,loss_g,loss_cycle,loss_proxy,loss_student,"
         "teacher_iou,proxy_iou,student_iou,selected_fraction,skipped_fraction\n";
  out.precision(10);
  for (const auto& r : history) {
    out << r.stage << ',' << r.epoch << ',' << r.loss_d << ',' << r.loss_g << ','
        << r.loss_cycle << ',' << r.loss_proxy << ',' << r.loss_student << ','
        << r.teacher_iou << ',' << r.proxy_iou << ',' << r.student_iou << ','
        << r.selected_fraction << ',' << r.skipped_fraction << '\n';
  }
}

namespace {

void require_finite(double v, const char* what) {
  if (!std::isfinite(v))
    throw TrainingError(std::string("training diverged: non-finite ") + what);
}

void shuffle_indices(std::vector<size_t>& idx, RandomStream& rng) {
  for (size_t i = idx.size(); i > 1; --i)
    std::swap(idx[i - 1], idx[rng.next_u64() % i]);
}

std::vector<size_t> make_indices(size_t n) {
  std::vector<size_t> idx(n);
  for (size_t i = 0; i < n; ++i) idx[i] = i;
  return idx;
}

}  // namespace

TeacherTrainState::TeacherTrainState(const TrainConfig& cfg_) : cfg(cfg_) {
  cfg.validate();
  ArchSpec ts = default_arch(Role::teacher_segmenter, cfg.image_size,
                             cfg.base_channels, cfg.noise_size);
  ts.encoder_depth = cfg.teacher_depth;
  ArchSpec gs = default_arch(Role::generator, cfg.image_size, cfg.base_channels,
                             cfg.noise_size);
  ArchSpec dgs = default_arch(Role::disc_global, cfg.image_size,
                              cfg.base_channels, cfg.noise_size);
  ArchSpec dps = default_arch(Role::disc_patch, cfg.image_size,
                              cfg.base_channels, cfg.noise_size);
  RandomStream root(cfg.seed);
  teacher = Segmenter(ts, root.fork(11).next_u64());
  gen = Generator(gs, root.fork(12).next_u64());
  disc_global = GlobalDiscriminator(dgs, root.fork(13).next_u64());
  disc_patch = PatchDiscriminator(dps, root.fork(14).next_u64());

  const AdamConfig gan{cfg.lr_gan, cfg.beta1_gan, cfg.beta2_gan, 1e-8};
  opt_teacher = Adam(teacher.params(),
                     {cfg.lr_teacher, cfg.beta1, cfg.beta2, 1e-8});
  opt_gen = Adam(gen.params(), gan);
  opt_dg = Adam(disc_global.params(), gan);
  opt_dp = Adam(disc_patch.params(), gan);
}

TeacherStepStats train_teacher_step(TeacherTrainState& st,
                                    const std::vector<const FlowField*>& flows,
                                    const std::vector<const BinaryMask*>& priors,
                                    RandomStream& rng) {
  if (flows.empty() || flows.size() != priors.size())
    throw ParamError("train_teacher_step: flow/prior batch size mismatch");
  const TrainConfig& cfg = st.cfg;
  const size_t nb = flows.size();
  const double inv_nb = 1.0 / static_cast<double>(nb);
  const double pi = std::numbers::pi;

  struct SampleCache {
    Tensor mask_t;   // augmented prior
    Tensor gen_in;   // prior + broadcast noise
    double theta_f;  // rotation applied to the generated flow
  };
  std::vector<SampleCache> cache(nb);

  TeacherStepStats stats;

  // Phase A: critic updates. The teacher learns to cycle the generated flow
  // back to its prior; the discriminators learn real vs generated. The
  // generator is only run forward here.
  for (size_t i = 0; i < nb; ++i) {
    auto& sc = cache[i];
    const AugmentDraw draw =
        draw_augment(cfg.augment, rng, priors[i]->width, priors[i]->height);
    sc.mask_t = mask_to_tensor(augm_spatial(*priors[i], draw));
    const GeneratorNoise noise = GeneratorNoise::sample(cfg.noise_size, rng);
    sc.gen_in = st.gen.make_input(sc.mask_t, noise);
    sc.theta_f = rng.uniform(-pi, pi);
    const double theta_r = rng.uniform(-pi, pi);

    FlowRotateLayer rot(sc.theta_f);
    FlowNormalizeLayer norm;
    const Tensor fake = norm.forward(rot.forward(st.gen.forward(sc.gen_in)));
    const Tensor real =
        flow_to_tensor(normalize_flow(augm_flow_rotate(*flows[i], theta_r)));

    // Teacher cycle update on the generated flow (treated as a constant).
    {
      const Tensor m_hat = st.teacher.forward(fake);
      Tensor g(1, m_hat.h, m_hat.w);
      stats.loss_cycle += cycle_loss(sc.mask_t, m_hat, cfg.loss, &g) * inv_nb;
      for (double& v : g.v) v *= inv_nb;
      st.teacher.backward(g);
    }

    // Discriminators: backward immediately after each forward so the cached
    // activations match. The fake-score gradient of the critic loss does not
    // depend on the real score, so the two passes are independent.
    const auto disc_pass = [&](const Tensor& x, bool is_fake) {
      const Tensor sg = st.disc_global.forward(x);
      const Tensor sp = st.disc_patch.forward(x);
      double pmean = 0.0;
      for (double v : sp.v) pmean += v;
      pmean /= static_cast<double>(sp.v.size());
      const double score = 0.5 * (sg.v[0] + pmean);
      double gf = 0.0, gr = 0.0;
      if (is_fake)
        disc_adv_loss(score, 0.5, cfg.loss, &gf, nullptr);
      else
        disc_adv_loss(0.5, score, cfg.loss, nullptr, &gr);
      const double g = (is_fake ? gf : gr) * inv_nb;
      Tensor ggl(1, 1, 1);
      ggl.v[0] = 0.5 * g;
      Tensor gpt(1, sp.h, sp.w, 0.5 * g / static_cast<double>(sp.v.size()));
      st.disc_global.backward(ggl);
      st.disc_patch.backward(gpt);
      return score;
    };
    const double score_fake = disc_pass(fake, true);
    const double score_real = disc_pass(real, false);
    stats.loss_d += disc_adv_loss(score_fake, score_real, cfg.loss) * inv_nb;
  }
  require_finite(stats.loss_d, "discriminator loss");
  require_finite(stats.loss_cycle, "cycle loss");
  st.opt_teacher.step();
  st.opt_dg.step();
  st.opt_dp.step();
  zero_grads(st.teacher.params());
  zero_grads(st.disc_global.params());
  zero_grads(st.disc_patch.params());

  // Phase B: generator update through the freshly updated critics. Their
  // parameter gradients get polluted here and are zeroed afterwards.
  for (size_t i = 0; i < nb; ++i) {
    auto& sc = cache[i];
    FlowRotateLayer rot(sc.theta_f);
    FlowNormalizeLayer norm;
    const Tensor fake = norm.forward(rot.forward(st.gen.forward(sc.gen_in)));
    Tensor gflow(2, fake.h, fake.w);

    {  // adversarial term
      const Tensor sg = st.disc_global.forward(fake);
      const Tensor sp = st.disc_patch.forward(fake);
      double pmean = 0.0;
      for (double v : sp.v) pmean += v;
      pmean /= static_cast<double>(sp.v.size());
      const double score = 0.5 * (sg.v[0] + pmean);
      double gc = 0.0;
      stats.loss_g += gen_adv_loss(score, cfg.loss, &gc) * inv_nb;
      gc *= inv_nb;
      Tensor ggl(1, 1, 1);
      ggl.v[0] = 0.5 * gc;
      Tensor gpt(1, sp.h, sp.w, 0.5 * gc / static_cast<double>(sp.v.size()));
      const Tensor ga = st.disc_global.backward(ggl);
      const Tensor gb = st.disc_patch.backward(gpt);
      for (size_t j = 0; j < gflow.v.size(); ++j) gflow.v[j] += ga.v[j] + gb.v[j];
    }
    {  // cycle term through the teacher
      const Tensor m_hat = st.teacher.forward(fake);
      Tensor g(1, m_hat.h, m_hat.w);
      stats.loss_g += cycle_loss(sc.mask_t, m_hat, cfg.loss, &g) * inv_nb;
      for (double& v : g.v) v *= inv_nb;
      const Tensor gt = st.teacher.backward(g);
      for (size_t j = 0; j < gflow.v.size(); ++j) gflow.v[j] += gt.v[j];
    }
    st.gen.backward(rot.backward(norm.backward(gflow)));
  }
  require_finite(stats.loss_g, "generator loss");
  st.opt_gen.step();
  zero_grads(st.gen.params());
  zero_grads(st.teacher.params());
  zero_grads(st.disc_global.params());
  zero_grads(st.disc_patch.params());
  return stats;
}

std::vector<BinaryMask> make_pseudo_labels(Segmenter& teacher,
                                           const std::vector<Sample>& data,
                                           double eps_t) {
  std::vector<BinaryMask> labels;
  labels.reserve(data.size());
  for (const auto& s : data) {
    if (s.flow.width == 0)
      throw ParamError("make_pseudo_labels: sample has no flow");
    labels.push_back(binarize(teacher.segment(normalize_flow(s.flow)), eps_t));
  }
  return labels;
}

double train_proxy_epoch(Segmenter& proxy, Adam& opt,
                         const std::vector<Sample>& data,
                         const std::vector<BinaryMask>& labels,
                         const TrainConfig& cfg, int epoch, RandomStream& rng) {
  if (data.empty() || data.size() != labels.size())
    throw ParamError("train_proxy_epoch: data/label size mismatch");
  auto idx = make_indices(data.size());
  shuffle_indices(idx, rng);
  const double lr_scale = lr_scale_for_epoch(cfg, epoch);
  auto refs = proxy.params();

  double total = 0.0;
  for (size_t start = 0; start < idx.size(); start += cfg.batch_size) {
    const size_t nb = std::min<size_t>(cfg.batch_size, idx.size() - start);
    const double inv_nb = 1.0 / static_cast<double>(nb);
    zero_grads(refs);
    for (size_t k = 0; k < nb; ++k) {
      const Sample& s = data[idx[start + k]];
      const BinaryMask& label = labels[idx[start + k]];
      const AugmentDraw draw =
          draw_augment(cfg.augment, rng, s.frame_t.width, s.frame_t.height);
      const Tensor x = image_to_tensor(augm_spatial(s.frame_t, draw));
      const Tensor y = mask_to_tensor(augm_spatial(label, draw));
      const Tensor p = proxy.forward(x);
      Tensor g(1, p.h, p.w);
      const double loss = proxy_loss(p, y, cfg.alpha_p, cfg.loss, &g);
      require_finite(loss, "proxy loss");
      total += loss;
      for (double& v : g.v) v *= inv_nb;
      proxy.backward(g);
    }
    opt.step(lr_scale);
  }
  return total / static_cast<double>(data.size());
}

StudentEpochResult train_student_epoch(Segmenter& student, Segmenter& proxy,
                                       Adam& opt, const std::vector<Sample>& data,
                                       const std::vector<BinaryMask>& labels,
                                       const TrainConfig& cfg, int epoch,
                                       RandomStream& rng) {
  if (data.empty() || data.size() != labels.size())
    throw ParamError("train_student_epoch: data/label size mismatch");
  auto idx = make_indices(data.size());
  shuffle_indices(idx, rng);
  const double lr_scale = lr_scale_for_epoch(cfg, epoch);
  const int win = cfg.window();
  auto refs = student.params();

  StudentEpochResult res;
  size_t used = 0, skipped = 0;
  for (size_t start = 0; start < idx.size(); start += cfg.batch_size) {
    const size_t nb = std::min<size_t>(cfg.batch_size, idx.size() - start);
    const double inv_nb = 1.0 / static_cast<double>(nb);
    zero_grads(refs);
    for (size_t k = 0; k < nb; ++k) {
      const Sample& s = data[idx[start + k]];
      const BinaryMask& label = labels[idx[start + k]];
      const AugmentDraw draw =
          draw_augment(cfg.augment, rng, s.frame_t.width, s.frame_t.height);
      const Image frame = augm_spatial(s.frame_t, draw);
      const BinaryMask y = augm_spatial(label, draw);

      const BinaryMask proxy_bin = binarize(proxy.segment(frame), cfg.eps_proxy);
      const SelectionMask sel =
          binarize(local_iou(proxy_bin, y, win, win), cfg.eps_iou);
      if (sel.values.count() == 0) {
        ++skipped;
        continue;
      }
      res.selected_fraction += static_cast<double>(sel.values.count()) /
                               static_cast<double>(sel.values.data.size());
      const Tensor p = student.forward(image_to_tensor(frame));
      Tensor g(1, p.h, p.w);
      const double loss = student_loss(p, mask_to_tensor(y),
                                       mask_to_tensor(sel.values), cfg.alpha_s,
                                       cfg.loss, &g);
      require_finite(loss, "student loss");
      res.loss += loss;
      ++used;
      for (double& v : g.v) v *= inv_nb;
      student.backward(g);
    }
    if (used > 0) opt.step(lr_scale);
  }
  if (used > 0) {
    res.loss /= static_cast<double>(used);
    res.selected_fraction /= static_cast<double>(used);
  }
  res.skipped_fraction =
      static_cast<double>(skipped) / static_cast<double>(data.size());
  return res;
}

double mean_iou_vs_gt(Segmenter& net, const std::vector<Sample>& data,
                      double eps) {
  double total = 0.0;
  size_t n = 0;
  const bool from_flow = net.spec().role == Role::teacher_segmenter;
  for (const auto& s : data) {
    if (s.gt_mask.width == 0) continue;
    const ProbMask pm = from_flow ? net.segment(normalize_flow(s.flow))
                                  : net.segment(s.frame_t);
    total += iou(binarize(pm, eps), s.gt_mask);
    ++n;
  }
  if (n == 0) throw EvalError("mean_iou_vs_gt: no samples with gt masks");
  return total / static_cast<double>(n);
}

namespace {

Segmenter make_segmenter(Role role, const TrainConfig& cfg, uint64_t fork_tag) {
  ArchSpec spec =
      default_arch(role, cfg.image_size, cfg.base_channels, cfg.noise_size);
  spec.encoder_depth = role == Role::proxy     ? cfg.proxy_depth
                       : role == Role::student ? cfg.student_depth
                                               : cfg.teacher_depth;
  RandomStream root(cfg.seed);
  return Segmenter(spec, root.fork(fork_tag).next_u64());
}

bool have_gt(const std::vector<Sample>& data) {
  for (const auto& s : data)
    if (s.gt_mask.width != 0) return true;
  return false;
}

}  // namespace

Segmenter train_proxy_on_labels(const TrainConfig& cfg,
                                const std::vector<Sample>& data,
                                const std::vector<BinaryMask>& labels,
                                std::vector<EpochStats>* history) {
  cfg.validate();
  Segmenter proxy = make_segmenter(Role::proxy, cfg, 21);
  Adam opt(proxy.params(), {cfg.lr_proxy, cfg.beta1, cfg.beta2, 1e-8});
  RandomStream root(cfg.seed);
  const bool gt = have_gt(data);
  for (int e = 1; e <= cfg.epochs_step1; ++e) {
    RandomStream rng = root.fork(3000 + e);
    EpochStats row;
    row.stage = "proxy";
    row.epoch = e;
    row.loss_proxy = train_proxy_epoch(proxy, opt, data, labels, cfg, e, rng);
    if (gt) row.proxy_iou = mean_iou_vs_gt(proxy, data, cfg.eps_proxy);
    if (history) history->push_back(row);
  }
  return proxy;
}

Segmenter train_student_on_labels(const TrainConfig& cfg, Segmenter& proxy,
                                  const std::vector<Sample>& data,
                                  const std::vector<BinaryMask>& labels,
                                  std::vector<EpochStats>* history) {
  cfg.validate();
  Segmenter student = make_segmenter(Role::student, cfg, 22);
  Adam opt(student.params(), {cfg.lr_student, cfg.beta1, cfg.beta2, 1e-8});
  RandomStream root(cfg.seed);
  const bool gt = have_gt(data);
  for (int e = 1; e <= cfg.epochs_step2; ++e) {
    RandomStream rng = root.fork(4000 + e);
    const StudentEpochResult r =
        train_student_epoch(student, proxy, opt, data, labels, cfg, e, rng);
    EpochStats row;
    row.stage = "student";
    row.epoch = e;
    row.loss_student = r.loss;
    row.selected_fraction = r.selected_fraction;
    row.skipped_fraction = r.skipped_fraction;
    if (gt) row.student_iou = mean_iou_vs_gt(student, data, cfg.eps_proxy);
    if (history) history->push_back(row);
  }
  return student;
}

TrainResult run_training(const TrainConfig& cfg, const std::vector<Sample>& data,
                         const std::vector<BinaryMask>& priors,
                         const std::filesystem::path& out_dir) {
  cfg.validate();
  if (data.empty()) throw ConfigError("run_training: empty dataset");
  if (priors.empty()) throw ConfigError("run_training: empty prior set");
  for (const auto& s : data)
    if (s.flow.width == 0)
      throw ConfigError("run_training: teacher stage needs flows on every sample");

  TrainResult result;
  result.cfg = cfg;
  TeacherTrainState st(cfg);
  RandomStream root(cfg.seed);
  const bool gt = have_gt(data);

  Segmenter proxy = make_segmenter(Role::proxy, cfg, 21);
  Adam opt_proxy(proxy.params(), {cfg.lr_proxy, cfg.beta1, cfg.beta2, 1e-8});

  // Step I (and, in 2-step mode, interleaved proxy epochs).
  for (int e = 1; e <= cfg.epochs_step1; ++e) {
    RandomStream rng = root.fork(1000 + e);
    auto didx = make_indices(data.size());
    auto pidx = make_indices(priors.size());
    shuffle_indices(didx, rng);
    shuffle_indices(pidx, rng);

    TeacherStepStats acc;
    size_t steps = 0;
    for (size_t start = 0; start < didx.size(); start += cfg.batch_size) {
      const size_t nb = std::min<size_t>(cfg.batch_size, didx.size() - start);
      std::vector<const FlowField*> flows(nb);
      std::vector<const BinaryMask*> batch_priors(nb);
      for (size_t k = 0; k < nb; ++k) {
        flows[k] = &data[didx[start + k]].flow;
        batch_priors[k] = &priors[pidx[(start + k) % pidx.size()]];
      }
      const TeacherStepStats s = train_teacher_step(st, flows, batch_priors, rng);
      acc.loss_d += s.loss_d;
      acc.loss_g += s.loss_g;
      acc.loss_cycle += s.loss_cycle;
      ++steps;
    }

    EpochStats row;
    row.stage = "teacher";
    row.epoch = e;
    row.loss_d = acc.loss_d / steps;
    row.loss_g = acc.loss_g / steps;
    row.loss_cycle = acc.loss_cycle / steps;
    if (gt) row.teacher_iou = mean_iou_vs_gt(st.teacher, data, cfg.eps_teacher);
    result.history.push_back(row);

    if (cfg.mode == TrainMode::two_step) {
      const auto labels = make_pseudo_labels(st.teacher, data, cfg.eps_teacher);
      RandomStream prng = root.fork(3000 + e);
      EpochStats prow;
      prow.stage = "proxy";
      prow.epoch = e;
      prow.loss_proxy =
          train_proxy_epoch(proxy, opt_proxy, data, labels, cfg, e, prng);
      if (gt) prow.proxy_iou = mean_iou_vs_gt(proxy, data, cfg.eps_proxy);
      result.history.push_back(prow);
    }
  }

  result.pseudo_labels = make_pseudo_labels(st.teacher, data, cfg.eps_teacher);

  if (cfg.mode == TrainMode::three_step) {
    for (int e = 1; e <= cfg.epochs_step1; ++e) {
      RandomStream prng = root.fork(3000 + e);
      EpochStats prow;
      prow.stage = "proxy";
      prow.epoch = e;
      prow.loss_proxy = train_proxy_epoch(proxy, opt_proxy, data,
                                          result.pseudo_labels, cfg, e, prng);
      if (gt) prow.proxy_iou = mean_iou_vs_gt(proxy, data, cfg.eps_proxy);
      result.history.push_back(prow);
    }
  }

  // Step II: student on the final pseudo-labels with the frozen proxy's
  // local-IoU selection.
  Segmenter student = make_segmenter(Role::student, cfg, 22);
  Adam opt_student(student.params(), {cfg.lr_student, cfg.beta1, cfg.beta2, 1e-8});
  for (int e = 1; e <= cfg.epochs_step2; ++e) {
    RandomStream rng = root.fork(4000 + e);
    const StudentEpochResult r = train_student_epoch(
        student, proxy, opt_student, data, result.pseudo_labels, cfg, e, rng);
    EpochStats row;
    row.stage = "student";
    row.epoch = e;
    row.loss_student = r.loss;
    row.selected_fraction = r.selected_fraction;
    row.skipped_fraction = r.skipped_fraction;
    if (gt) row.student_iou = mean_iou_vs_gt(student, data, cfg.eps_proxy);
    result.history.push_back(row);
  }

  result.teacher = std::move(st.teacher);
  result.proxy = std::move(proxy);
  result.student = std::move(student);

  if (!out_dir.empty()) {
    std::filesystem::create_directories(out_dir);
    const auto save = [&](const char* name, auto& net) {
      auto refs = net.params();
      save_checkpoint(out_dir / name, net.spec(), refs);
    };
    save("teacher.ckpt", result.teacher);
    save("generator.ckpt", st.gen);
    save("disc_global.ckpt", st.disc_global);
    save("disc_patch.ckpt", st.disc_patch);
    save("proxy.ckpt", result.proxy);
    save("student.ckpt", result.student);
    write_metrics_csv(out_dir / "metrics.csv", result.history);
    // Reported networks come back from disk so downstream metrics are exactly
    // reproducible from the checkpoint files.
    result.teacher = load_network<Segmenter>(out_dir / "teacher.ckpt");
    result.proxy = load_network<Segmenter>(out_dir / "proxy.ckpt");
    result.student = load_network<Segmenter>(out_dir / "student.ckpt");
    result.pseudo_labels =
        make_pseudo_labels(result.teacher, data, cfg.eps_teacher);
  }
  return result;
}

}  // namespace mseg
