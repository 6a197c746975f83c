#pragma once

#include <cmath>
#include <vector>

#include "motionseg/layers.hpp"

namespace mseg {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

class Adam {
 public:
  Adam() = default;
  Adam(std::vector<ParamRef> params, AdamConfig cfg)
      : params_(std::move(params)), cfg_(cfg) {
    m_.reserve(params_.size());
    v_.reserve(params_.size());
    for (const auto& p : params_) {
      m_.emplace_back(p.value->size(), 0.0);
      v_.emplace_back(p.value->size(), 0.0);
    }
  }

  // Applies accumulated gradients; lr_scale implements epoch LR schedules.
  void step(double lr_scale = 1.0) {
    ++t_;
    const double bc1 = 1.0 - std::pow(cfg_.beta1, t_);
    const double bc2 = 1.0 - std::pow(cfg_.beta2, t_);
    const double lr = cfg_.lr * lr_scale;
    for (size_t i = 0; i < params_.size(); ++i) {
      auto& value = *params_[i].value;
      auto& grad = *params_[i].grad;
      for (size_t j = 0; j < value.size(); ++j) {
        m_[i][j] = cfg_.beta1 * m_[i][j] + (1 - cfg_.beta1) * grad[j];
        v_[i][j] = cfg_.beta2 * v_[i][j] + (1 - cfg_.beta2) * grad[j] * grad[j];
        value[j] -= lr * (m_[i][j] / bc1) / (std::sqrt(v_[i][j] / bc2) + cfg_.eps);
      }
    }
  }

 private:
  std::vector<ParamRef> params_;
  AdamConfig cfg_;
  std::vector<std::vector<double>> m_, v_;
  long t_ = 0;
};

}  // namespace mseg
