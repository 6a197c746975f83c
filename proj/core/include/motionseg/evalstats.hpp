#pragma once

#include <array>
#include <string>
#include <vector>

#include "motionseg/corruption.hpp"
#include "motionseg/maskmetrics.hpp"
#include "motionseg/scenes.hpp"
#include "motionseg/types.hpp"

namespace mseg {

struct EvalReport {
  std::vector<double> per_sample_iou;
  double mean_iou = 0.0;
  double mean_pa = 0.0;
  size_t n = 0;
};

EvalReport evaluate_masks(const std::vector<BinaryMask>& gts,
                          const std::vector<BinaryMask>& preds);

// Dataset-aggregated IoU: intersection and union pooled over all pixels of
// all pairs before taking the ratio (both-empty := 1).
double aggregate_iou(const std::vector<BinaryMask>& gts,
                     const std::vector<BinaryMask>& preds);

// Histogram of per-component (per-tool) IoUs pooled across the dataset,
// 10 uniform bins over [0,1], the last bin closed.
struct ToolHistogram {
  std::array<size_t, 10> bins{};
  size_t n = 0;

  double mass(int bin) const {
    return n ? static_cast<double>(bins[bin]) / static_cast<double>(n) : 0.0;
  }
  // Fraction of per-tool IoUs in [0, 0.1) union [0.9, 1].
  double endpoint_mass() const { return mass(0) + mass(9); }
};

ToolHistogram tool_histogram(const std::vector<BinaryMask>& gts,
                             const std::vector<BinaryMask>& noisy);

struct SweepRow {
  int window = 0;
  double eps = 0.0;
  double selected_fraction = 0.0;  // selected pixels / all pixels, pooled
  double effective_iou = 0.0;      // gt vs pseudo inside the selection, pooled
  // Mean of per-sample effective IoUs over samples with a nonempty selection.
  double mean_effective_iou = 0.0;
  size_t n_selected_samples = 0;
  bool any_selection = false;
};

// Selection sweep: for every (window, eps) pair, build the selection from
// local_iou(proxy_bin, pseudo) per sample and pool counts across the dataset.
// The selected fraction is exactly non-increasing in eps for a fixed window.
std::vector<SweepRow> sweep_selection(const std::vector<BinaryMask>& gts,
                                      const std::vector<BinaryMask>& pseudos,
                                      const std::vector<BinaryMask>& proxy_bins,
                                      const std::vector<int>& windows,
                                      const std::vector<double>& eps_list);

struct TTestResult {
  double t = 0.0;
  double p = 1.0;  // two-sided
  double dof = 0.0;
  double mean_diff = 0.0;
};

// Paired two-sided t-test on equal-length samples. Zero-variance differences
// degenerate to p = 1 when the mean difference is zero and p = 0 otherwise.
TTestResult paired_t_test(const std::vector<double>& a,
                          const std::vector<double>& b);

// Independent-samples effect size with the pooled (n-1) standard deviation.
// Zero pooled sd is an undefined effect and raises EvalError.
double cohens_d(const std::vector<double>& a, const std::vector<double>& b);

// |d| > 1.2 "very large", 0.8-1.2 "large", 0.5-0.8 "medium/high",
// 0.2-0.5 "medium/small", below "negligible".
std::string effect_band(double d);

struct TrainConfig;  // pipeline.hpp

// One (corruption kind, target level) cell of the noise-property study:
// corrupted-label quality, the proxy and student trained against those
// labels, and the per-tool histogram of the labels themselves.
struct NoiseStudyCell {
  CorruptionKind kind = CorruptionKind::systematic_erosion;
  double target_iou = 0.0;
  double achieved_iou = 0.0;
  double label_iou = 0.0;
  double proxy_iou = 0.0;
  double student_iou = 0.0;
  ToolHistogram hist;
};

// For every kind x target: calibrate the corruption on the dataset's gt
// masks, train proxy then student on the corrupted labels, and evaluate both
// against gt. Calibration failures propagate.
std::vector<NoiseStudyCell> noise_study(const TrainConfig& cfg,
                                        const std::vector<Sample>& data,
                                        const std::vector<CorruptionKind>& kinds,
                                        const std::vector<double>& targets,
                                        uint64_t corruption_seed = 0);

}  // namespace mseg
