#include "motionseg/losses.hpp"

#include <algorithm>
#include <cmath>

namespace mseg {

namespace {

void require_prob_shapes(const Tensor& a, const Tensor& b, const char* what) {
  if (a.c != 1 || b.c != 1 || a.h != b.h || a.w != b.w)
    throw ShapeError(std::string(what) + ": tensor shape mismatch");
}

// Per-pixel clipped cross-entropy and its gradient wrt the prediction.
// Clipped coordinates carry zero gradient, matching what finite differences
// see through the clamp.
inline double ce_term(double t, double p, double eps, double* dp) {
  const double pc = std::clamp(p, eps, 1.0 - eps);
  if (dp) *dp = (p > eps && p < 1.0 - eps) ? (-t / pc + (1.0 - t) / (1.0 - pc)) : 0.0;
  return -t * std::log(pc) - (1.0 - t) * std::log(1.0 - pc);
}

}  // namespace

double cycle_loss(const Tensor& mask, const Tensor& cycled, const LossConfig& cfg,
                  Tensor* grad) {
  require_prob_shapes(mask, cycled, "cycle_loss");
  cfg.validate();
  const double inv_n = 1.0 / static_cast<double>(mask.v.size());
  double loss = 0.0;
  for (size_t i = 0; i < mask.v.size(); ++i) {
    double dp;
    loss += ce_term(mask.v[i], cycled.v[i], cfg.eps_clip, grad ? &dp : nullptr);
    if (grad) grad->v[i] += dp * inv_n;
  }
  return loss * inv_n;
}

double gen_adv_loss(double d_score, const LossConfig& cfg, double* grad) {
  cfg.validate();
  const double s = std::clamp(d_score, cfg.eps_clip, 1.0 - cfg.eps_clip);
  if (grad)
    *grad += (d_score > cfg.eps_clip && d_score < 1.0 - cfg.eps_clip) ? -1.0 / s : 0.0;
  return -std::log(s);
}

double disc_adv_loss(double d_fake, double d_real, const LossConfig& cfg,
                     double* grad_fake, double* grad_real) {
  cfg.validate();
  const double f = std::clamp(d_fake, cfg.eps_clip, 1.0 - cfg.eps_clip);
  const double r = std::clamp(d_real, cfg.eps_clip, 1.0 - cfg.eps_clip);
  if (grad_fake)
    *grad_fake +=
        (d_fake > cfg.eps_clip && d_fake < 1.0 - cfg.eps_clip) ? 1.0 / (1.0 - f) : 0.0;
  if (grad_real)
    *grad_real +=
        (d_real > cfg.eps_clip && d_real < 1.0 - cfg.eps_clip) ? -1.0 / r : 0.0;
  return -std::log(1.0 - f) - std::log(r);
}

namespace {

// Shared log-IoU machinery for the proxy and student losses. Sums can carry
// per-pixel selection weights (pass nullptr for unweighted).
struct LogIoU {
  double inter = 0.0, uni = 0.0;
  bool label_empty = true;
  double value = 0.0;
  bool clipped = false;

  void accumulate(const Tensor& p, const Tensor& t, const Tensor* sel) {
    for (size_t i = 0; i < p.v.size(); ++i) {
      const double s = sel ? sel->v[i] : 1.0;
      if (s == 0.0) continue;
      if (t.v[i] != 0.0) label_empty = false;
      inter += s * p.v[i] * t.v[i];
      uni += s * (p.v[i] + t.v[i] - p.v[i] * t.v[i]);
    }
  }

  void finish(double eps) {
    if (label_empty) {
      inter += eps;
      uni += eps;
    }
    double ratio = inter / uni;
    if (ratio < eps) {
      ratio = eps;
      clipped = true;
    }
    value = -std::log(ratio);
  }

  // d(-log(I/U))/dp_i for a pixel with weight s.
  double grad(double t, double s) const {
    if (clipped) return 0.0;
    return s * (-t / inter + (1.0 - t) / uni);
  }
};

}  // namespace

double proxy_loss(const Tensor& y_pred, const Tensor& y_label, double alpha,
                  const LossConfig& cfg, Tensor* grad) {
  require_prob_shapes(y_pred, y_label, "proxy_loss");
  cfg.validate();
  if (alpha < 0 || alpha > 1) throw ParamError("proxy_loss: alpha must be in [0,1]");

  LogIoU iou;
  iou.accumulate(y_pred, y_label, nullptr);
  iou.finish(cfg.eps_clip);

  const double inv_n = 1.0 / static_cast<double>(y_pred.v.size());
  double ce = 0.0;
  for (size_t i = 0; i < y_pred.v.size(); ++i) {
    double dp;
    ce += ce_term(y_label.v[i], y_pred.v[i], cfg.eps_clip, grad ? &dp : nullptr);
    if (grad)
      grad->v[i] += alpha * iou.grad(y_label.v[i], 1.0) + (1 - alpha) * dp * inv_n;
  }
  return alpha * iou.value + (1 - alpha) * ce * inv_n;
}

double student_loss(const Tensor& y_pred, const Tensor& y_label,
                    const Tensor& selection, double alpha, const LossConfig& cfg,
                    Tensor* grad) {
  require_prob_shapes(y_pred, y_label, "student_loss");
  require_prob_shapes(y_pred, selection, "student_loss");
  cfg.validate();
  if (alpha < 0 || alpha > 1)
    throw ParamError("student_loss: alpha must be in [0,1]");

  double sel_sum = 0.0;
  for (double s : selection.v) sel_sum += s;
  if (sel_sum == 0.0)
    throw EmptySelectionError("student_loss: selection is all-zero");

  LogIoU iou;
  iou.accumulate(y_pred, y_label, &selection);
  iou.finish(cfg.eps_clip);
  const double iou_scale = cfg.student_iou_prefactor ? 1.0 / sel_sum : 1.0;

  double ce = 0.0;
  for (size_t i = 0; i < y_pred.v.size(); ++i) {
    const double s = selection.v[i];
    if (s == 0.0) continue;
    double dp;
    ce += s * ce_term(y_label.v[i], y_pred.v[i], cfg.eps_clip, grad ? &dp : nullptr);
    if (grad)
      grad->v[i] += alpha * iou_scale * iou.grad(y_label.v[i], s) +
                    (1 - alpha) * s * dp / sel_sum;
  }
  return alpha * iou_scale * iou.value + (1 - alpha) * ce / sel_sum;
}

double grad_check(const std::function<double(bool with_grad)>& eval,
                  const std::vector<ParamRef>& params, int probes,
                  RandomStream& rng, double step) {
  const double base = eval(true);
  if (!std::isfinite(base))
    throw TrainingError("grad_check: non-finite loss at probe point");
  std::vector<std::vector<double>> analytic;
  analytic.reserve(params.size());
  for (const auto& p : params) analytic.push_back(*p.grad);

  double max_rel = 0.0;
  for (int k = 0; k < probes; ++k) {
    const size_t pi = rng.next_u64() % params.size();
    auto& value = *params[pi].value;
    const size_t ci = rng.next_u64() % value.size();
    const double saved = value[ci];
    value[ci] = saved + step;
    const double lp = eval(false);
    value[ci] = saved - step;
    const double lm = eval(false);
    value[ci] = saved;
    const double numeric = (lp - lm) / (2 * step);
    const double a = analytic[pi][ci];
    const double rel = std::abs(a - numeric) / std::max(std::abs(a) + std::abs(numeric), 1e-3);
    max_rel = std::max(max_rel, rel);
  }
  return max_rel;
}

}  // namespace mseg
