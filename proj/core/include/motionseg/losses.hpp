#pragma once

#include <functional>

#include "motionseg/layers.hpp"
#include "motionseg/tensor.hpp"

namespace mseg {

struct LossConfig {
  double alpha_p = 0.8;
  double alpha_s = 0.8;
  double eps_clip = 1e-7;  // log-argument clip floor
  // Keep the printed 1/sum(sel) prefactor on the selected log-IoU term;
  // switchable for sensitivity analysis (it rescales a log term by the
  // selection size).
  bool student_iou_prefactor = true;

  void validate() const {
    if (alpha_p < 0 || alpha_p > 1 || alpha_s < 0 || alpha_s > 1)
      throw ParamError("LossConfig: alpha must be in [0,1]");
    if (eps_clip <= 0 || eps_clip >= 0.5)
      throw ParamError("LossConfig: eps_clip must be in (0, 0.5)");
  }
};

// All pixel losses take CHW tensors with c == 1 and report pixel means.
// Targets are 0/1 valued; predictions are probabilities. When `grad` is
// non-null, the gradient with respect to the prediction is accumulated into
// it (callers zero it).

// Pixel-mean binary cross-entropy between a mask and its cycled
// reconstruction, log arguments clipped to [eps_clip, 1 - eps_clip].
double cycle_loss(const Tensor& mask, const Tensor& cycled, const LossConfig& cfg,
                  Tensor* grad = nullptr);

// -log(d_score), generator side of the adversarial pair.
double gen_adv_loss(double d_score, const LossConfig& cfg, double* grad = nullptr);

// -log(1 - d_fake) - log(d_real), discriminator side.
double disc_adv_loss(double d_fake, double d_real, const LossConfig& cfg,
                     double* grad_fake = nullptr, double* grad_real = nullptr);

// alpha * logIoU + (1 - alpha) * CE against a (pseudo-)label mask.
// All-zero labels fall back to a soft ratio with eps_clip added to both
// numerator and denominator.
double proxy_loss(const Tensor& y_pred, const Tensor& y_label, double alpha,
                  const LossConfig& cfg, Tensor* grad = nullptr);

// Selection-masked variant; every sum carries the selection factor, so the
// loss is invariant to prediction and label values on unselected pixels.
// Errors on an all-zero selection.
double student_loss(const Tensor& y_pred, const Tensor& y_label,
                    const Tensor& selection, double alpha, const LossConfig& cfg,
                    Tensor* grad = nullptr);

// Central-difference gradient oracle. `eval(true)` must zero the parameter
// gradients, run forward+backward and return the loss; `eval(false)` returns
// the loss without touching gradients. Returns the max relative error over
// `probes` randomly chosen parameter coordinates.
double grad_check(const std::function<double(bool with_grad)>& eval,
                  const std::vector<ParamRef>& params, int probes,
                  RandomStream& rng, double step = 1e-3);

}  // namespace mseg
