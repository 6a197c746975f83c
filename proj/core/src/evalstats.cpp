#include "motionseg/evalstats.hpp"

#include <algorithm>
#include <cmath>

#include <boost/math/distributions/students_t.hpp>

#include "motionseg/pipeline.hpp"

namespace mseg {

namespace {

void require_matched(size_t a, size_t b, const char* what) {
  if (a == 0 || a != b)
    throw EvalError(std::string(what) + ": mismatched or empty mask lists");
}

}  // namespace

EvalReport evaluate_masks(const std::vector<BinaryMask>& gts,
                          const std::vector<BinaryMask>& preds) {
  require_matched(gts.size(), preds.size(), "evaluate_masks");
  EvalReport r;
  r.per_sample_iou.reserve(gts.size());
  for (size_t i = 0; i < gts.size(); ++i) {
    r.per_sample_iou.push_back(iou(gts[i], preds[i]));
    r.mean_iou += r.per_sample_iou.back();
    r.mean_pa += pixel_accuracy(gts[i], preds[i]);
  }
  r.n = gts.size();
  r.mean_iou /= static_cast<double>(r.n);
  r.mean_pa /= static_cast<double>(r.n);
  return r;
}

double aggregate_iou(const std::vector<BinaryMask>& gts,
                     const std::vector<BinaryMask>& preds) {
  require_matched(gts.size(), preds.size(), "aggregate_iou");
  size_t inter = 0, uni = 0;
  for (size_t i = 0; i < gts.size(); ++i) {
    require_same_shape(gts[i], preds[i], "aggregate_iou");
    for (size_t j = 0; j < gts[i].data.size(); ++j) {
      const bool a = gts[i].data[j] != 0, b = preds[i].data[j] != 0;
      inter += (a && b);
      uni += (a || b);
    }
  }
  return uni == 0 ? 1.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

ToolHistogram tool_histogram(const std::vector<BinaryMask>& gts,
                             const std::vector<BinaryMask>& noisy) {
  require_matched(gts.size(), noisy.size(), "tool_histogram");
  ToolHistogram h;
  for (size_t i = 0; i < gts.size(); ++i) {
    for (double v : per_tool_ious(gts[i], noisy[i])) {
      const int bin = std::min(9, static_cast<int>(v * 10.0));
      ++h.bins[bin];
      ++h.n;
    }
  }
  return h;
}

std::vector<SweepRow> sweep_selection(const std::vector<BinaryMask>& gts,
                                      const std::vector<BinaryMask>& pseudos,
                                      const std::vector<BinaryMask>& proxy_bins,
                                      const std::vector<int>& windows,
                                      const std::vector<double>& eps_list) {
  require_matched(gts.size(), pseudos.size(), "sweep_selection");
  require_matched(gts.size(), proxy_bins.size(), "sweep_selection");
  if (windows.empty() || eps_list.empty())
    throw ParamError("sweep_selection: empty window or eps list");

  std::vector<SweepRow> rows;
  for (int win : windows) {
    // Local-IoU maps are eps-independent; compute once per window.
    std::vector<LocalIoUMap> maps;
    maps.reserve(gts.size());
    for (size_t i = 0; i < gts.size(); ++i)
      maps.push_back(local_iou(proxy_bins[i], pseudos[i], win, win));

    for (double eps : eps_list) {
      SweepRow row;
      row.window = win;
      row.eps = eps;
      size_t selected = 0, total = 0, inter = 0, uni = 0;
      for (size_t i = 0; i < gts.size(); ++i) {
        const SelectionMask sel = binarize(maps[i], eps);
        total += sel.values.data.size();
        size_t sample_sel = 0;
        for (size_t j = 0; j < sel.values.data.size(); ++j) {
          if (!sel.values.data[j]) continue;
          ++selected;
          ++sample_sel;
          const bool a = gts[i].data[j] != 0, b = pseudos[i].data[j] != 0;
          inter += (a && b);
          uni += (a || b);
        }
        if (sample_sel > 0) {
          row.mean_effective_iou += effective_iou(gts[i], pseudos[i], sel);
          ++row.n_selected_samples;
        }
      }
      if (row.n_selected_samples > 0)
        row.mean_effective_iou /= static_cast<double>(row.n_selected_samples);
      row.selected_fraction =
          static_cast<double>(selected) / static_cast<double>(total);
      row.any_selection = selected > 0;
      row.effective_iou =
          !row.any_selection
              ? 0.0
              : (uni == 0 ? 1.0
                          : static_cast<double>(inter) / static_cast<double>(uni));
      rows.push_back(row);
    }
  }
  return rows;
}

TTestResult paired_t_test(const std::vector<double>& a,
                          const std::vector<double>& b) {
  if (a.size() != b.size() || a.size() < 2)
    throw EvalError("paired_t_test: need matched samples of size >= 2");
  const size_t n = a.size();
  double mean = 0.0;
  for (size_t i = 0; i < n; ++i) mean += a[i] - b[i];
  mean /= static_cast<double>(n);
  double ss = 0.0;
  for (size_t i = 0; i < n; ++i) {
    const double d = a[i] - b[i] - mean;
    ss += d * d;
  }
  const double sd = std::sqrt(ss / static_cast<double>(n - 1));

  TTestResult r;
  r.dof = static_cast<double>(n - 1);
  r.mean_diff = mean;
  if (sd == 0.0) {
    r.t = mean == 0.0 ? 0.0 : (mean > 0 ? INFINITY : -INFINITY);
    r.p = mean == 0.0 ? 1.0 : 0.0;
    return r;
  }
  r.t = mean / (sd / std::sqrt(static_cast<double>(n)));
  const boost::math::students_t dist(r.dof);
  r.p = 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(r.t)));
  return r;
}

double cohens_d(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() < 2 || b.size() < 2)
    throw EvalError("cohens_d: need at least two observations per group");
  const auto stats = [](const std::vector<double>& x) {
    double m = 0.0;
    for (double v : x) m += v;
    m /= static_cast<double>(x.size());
    double ss = 0.0;
    for (double v : x) ss += (v - m) * (v - m);
    return std::pair<double, double>(m, ss);
  };
  const auto [ma, ssa] = stats(a);
  const auto [mb, ssb] = stats(b);
  const double pooled =
      std::sqrt((ssa + ssb) / static_cast<double>(a.size() + b.size() - 2));
  if (pooled == 0.0) {
    if (ma == mb) return 0.0;
    throw EvalError("cohens_d: zero pooled sd, effect size undefined");
  }
  return (ma - mb) / pooled;
}

std::vector<NoiseStudyCell> noise_study(const TrainConfig& cfg,
                                        const std::vector<Sample>& data,
                                        const std::vector<CorruptionKind>& kinds,
                                        const std::vector<double>& targets,
                                        uint64_t corruption_seed) {
  if (kinds.empty() || targets.empty())
    throw ParamError("noise_study: empty kind or target list");
  std::vector<BinaryMask> gts;
  gts.reserve(data.size());
  for (const auto& s : data) {
    if (s.gt_mask.width == 0) throw EvalError("noise_study: sample lacks gt");
    gts.push_back(s.gt_mask);
  }

  std::vector<NoiseStudyCell> cells;
  for (CorruptionKind kind : kinds) {
    for (double target : targets) {
      const CalibrationResult cal =
          calibrate_corruption(gts, kind, target, corruption_seed);
      const auto labels = corrupt_dataset(gts, cal.spec);

      NoiseStudyCell cell;
      cell.kind = kind;
      cell.target_iou = target;
      cell.achieved_iou = cal.level.achieved_iou;
      cell.label_iou = evaluate_masks(gts, labels).mean_iou;
      cell.hist = tool_histogram(gts, labels);

      Segmenter proxy = train_proxy_on_labels(cfg, data, labels);
      cell.proxy_iou = mean_iou_vs_gt(proxy, data, cfg.eps_proxy);
      Segmenter student = train_student_on_labels(cfg, proxy, data, labels);
      cell.student_iou = mean_iou_vs_gt(student, data, cfg.eps_proxy);
      cells.push_back(cell);
    }
  }
  return cells;
}

std::string effect_band(double d) {
  const double a = std::abs(d);
  if (a > 1.2) return "very large";
  if (a >= 0.8) return "large";
  if (a >= 0.5) return "medium/high";
  if (a >= 0.2) return "medium/small";
  return "negligible";
}

}  // namespace mseg
