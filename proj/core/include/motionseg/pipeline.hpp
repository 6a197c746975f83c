#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "motionseg/augment.hpp"
#include "motionseg/losses.hpp"
#include "motionseg/maskmetrics.hpp"
#include "motionseg/nets.hpp"
#include "motionseg/optim.hpp"
#include "motionseg/scenes.hpp"

namespace mseg {

// three_step: adversarial teacher stage, then proxy on frozen pseudo-labels,
// then student. two_step: proxy epochs are interleaved with teacher epochs
// (pseudo-labels refreshed each epoch); the student stage is unchanged.
enum class TrainMode { three_step, two_step };

std::string to_string(TrainMode m);
TrainMode train_mode_from_string(const std::string& s);

struct TrainConfig {
  TrainMode mode = TrainMode::three_step;
  int epochs_step1 = 10;  // teacher + proxy
  int epochs_step2 = 10;  // student
  int batch_size = 8;

  double lr_gan = 3e-3;
  double lr_teacher = 2e-3;
  double lr_proxy = 5e-4;
  double lr_student = 3e-4;
  double beta1_gan = 0.5, beta2_gan = 0.9;
  double beta1 = 0.9, beta2 = 0.999;
  // Proxy/student LR is halved every lr_halve_every epochs once past
  // lr_halve_after (absolute epoch numbers, 1-based).
  int lr_halve_after = 20;
  int lr_halve_every = 5;

  double eps_teacher = 0.5;  // pseudo-label binarization
  double eps_proxy = 0.5;    // proxy binarization inside the selection rule
  double eps_iou = 0.5;      // local-IoU selection threshold
  double alpha_p = 0.8;
  double alpha_s = 0.8;

  int image_size = 64;
  int base_channels = 16;
  int noise_size = 32;
  int teacher_depth = 5;
  int proxy_depth = 6;
  int student_depth = 10;
  int lociou_window = 0;  // 0 -> image_size / 4

  uint64_t seed = 1;
  AugmentSpec augment;
  LossConfig loss;

  int window() const { return lociou_window > 0 ? lociou_window : image_size / 4; }
  void validate() const;
};

// Per-epoch scale factor for the halving schedule.
double lr_scale_for_epoch(const TrainConfig& cfg, int epoch);

struct EpochStats {
  std::string stage;  // "teacher" | "proxy" | "student"
  int epoch = 0;
  double loss_d = 0.0;
  double loss_g = 0.0;
  double loss_cycle = 0.0;
  double loss_proxy = 0.0;
  double loss_student = 0.0;
  double teacher_iou = -1.0;  // -1 where not applicable / no gt
  double proxy_iou = -1.0;
  double student_iou = -1.0;
  double selected_fraction = -1.0;  // student stage: mean selected-pixel share
  double skipped_fraction = 0.0;    // student stage: empty-selection samples
};

void write_metrics_csv(const std::filesystem::path& path,
                       const std::vector<EpochStats>& history);

struct TeacherTrainState {
  TrainConfig cfg;
  Segmenter teacher;
  Generator gen;
  GlobalDiscriminator disc_global;
  PatchDiscriminator disc_patch;
  Adam opt_teacher, opt_gen, opt_dg, opt_dp;

  explicit TeacherTrainState(const TrainConfig& cfg);
};

struct TeacherStepStats {
  double loss_d = 0.0;
  double loss_g = 0.0;      // adversarial + cycle, generator side
  double loss_cycle = 0.0;  // teacher-side cycle term
};

// One optimization step on a batch: discriminator and teacher updates on the
// current generator's flows, then a generator update through both critics.
TeacherStepStats train_teacher_step(TeacherTrainState& st,
                                    const std::vector<const FlowField*>& flows,
                                    const std::vector<const BinaryMask*>& priors,
                                    RandomStream& rng);

// Teacher applied to each sample's normalized flow, binarized at eps_t.
std::vector<BinaryMask> make_pseudo_labels(Segmenter& teacher,
                                           const std::vector<Sample>& data,
                                           double eps_t);

// One epoch over (frame, label) pairs with shared spatial augmentation.
// `epoch` is 1-based and drives the LR schedule. Returns the mean loss.
double train_proxy_epoch(Segmenter& proxy, Adam& opt,
                         const std::vector<Sample>& data,
                         const std::vector<BinaryMask>& labels,
                         const TrainConfig& cfg, int epoch, RandomStream& rng);

struct StudentEpochResult {
  double loss = 0.0;
  double selected_fraction = 0.0;
  double skipped_fraction = 0.0;
};

// Selection-masked student epoch: the frozen proxy's binarized prediction is
// compared to the label through the local-IoU map; empty selections skip the
// sample.
StudentEpochResult train_student_epoch(Segmenter& student, Segmenter& proxy,
                                       Adam& opt, const std::vector<Sample>& data,
                                       const std::vector<BinaryMask>& labels,
                                       const TrainConfig& cfg, int epoch,
                                       RandomStream& rng);

// Full proxy training against fixed label masks (pseudo-labels or corrupted
// gt). Appends one EpochStats row per epoch when `history` is non-null.
Segmenter train_proxy_on_labels(const TrainConfig& cfg,
                                const std::vector<Sample>& data,
                                const std::vector<BinaryMask>& labels,
                                std::vector<EpochStats>* history = nullptr);

Segmenter train_student_on_labels(const TrainConfig& cfg, Segmenter& proxy,
                                  const std::vector<Sample>& data,
                                  const std::vector<BinaryMask>& labels,
                                  std::vector<EpochStats>* history = nullptr);

// Mean IoU of the binarized network output against gt masks; samples without
// gt are skipped. Teacher nets consume the normalized flow, others frame_t.
double mean_iou_vs_gt(Segmenter& net, const std::vector<Sample>& data,
                      double eps);

struct TrainResult {
  TrainConfig cfg;
  Segmenter teacher;
  Segmenter proxy;
  Segmenter student;
  std::vector<BinaryMask> pseudo_labels;  // final teacher's labels
  std::vector<EpochStats> history;
};

// End-to-end pipeline. When out_dir is non-empty, checkpoints and
// metrics.csv are written there and the returned networks are re-loaded from
// the checkpoints, so reported metrics are reproducible from the files alone.
TrainResult run_training(const TrainConfig& cfg, const std::vector<Sample>& data,
                         const std::vector<BinaryMask>& priors,
                         const std::filesystem::path& out_dir = {});

}  // namespace mseg
