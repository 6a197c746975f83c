#pragma once

#include <string>
#include <vector>

#include "motionseg/rng.hpp"
#include "motionseg/tensor.hpp"

namespace mseg {

// Named view over one parameter array and its gradient accumulator.
struct ParamRef {
  std::string name;
  std::vector<double>* value;
  std::vector<double>* grad;
};

// Layers cache whatever forward state their backward pass needs; backward
// accumulates parameter gradients (zeroed externally via zero_grads helpers)
// and returns the gradient with respect to the layer input.

class Conv2d {
 public:
  Conv2d() = default;
  Conv2d(int in_ch, int out_ch, int ksize, RandomStream& rng);

  Tensor forward(const Tensor& x);
  Tensor backward(const Tensor& gout);
  std::vector<ParamRef> params(const std::string& prefix);

  int in_ch() const { return in_ch_; }
  int out_ch() const { return out_ch_; }

 private:
  int in_ch_ = 0, out_ch_ = 0, k_ = 3, pad_ = 1;
  std::vector<double> w_, wg_;  // [out][in][k][k]
  std::vector<double> b_, bg_;
  Tensor x_;  // cached input
};

// 2x2 average pooling; input height/width must be even.
class AvgPool2 {
 public:
  Tensor forward(const Tensor& x);
  Tensor backward(const Tensor& gout);

 private:
  int in_h_ = 0, in_w_ = 0;
};

// Bilinear 2x upsampling (half-pixel centers), matched transpose in backward.
class BilinearUp2 {
 public:
  Tensor forward(const Tensor& x);
  Tensor backward(const Tensor& gout);

 private:
  int in_h_ = 0, in_w_ = 0;
};

// x * sigmoid(x): smooth everywhere, so finite-difference gradient probes
// stay well-conditioned.
class Silu {
 public:
  Tensor forward(const Tensor& x);
  Tensor backward(const Tensor& gout);

 private:
  Tensor x_;
};

class SigmoidLayer {
 public:
  Tensor forward(const Tensor& x);
  Tensor backward(const Tensor& gout);

 private:
  Tensor y_;
};

class GlobalAvgPool {
 public:
  Tensor forward(const Tensor& x);  // c x h x w -> c x 1 x 1
  Tensor backward(const Tensor& gout);

 private:
  int in_h_ = 0, in_w_ = 0;
};

class Dense {
 public:
  Dense() = default;
  Dense(int in_dim, int out_dim, RandomStream& rng);

  Tensor forward(const Tensor& x);  // treats input as flat vector
  Tensor backward(const Tensor& gout);
  std::vector<ParamRef> params(const std::string& prefix);

 private:
  int in_dim_ = 0, out_dim_ = 0;
  std::vector<double> w_, wg_, b_, bg_;
  Tensor x_;
};

// Value-space rotation of a 2-channel (u,v) tensor; linear, exact backward.
class FlowRotateLayer {
 public:
  FlowRotateLayer() = default;
  explicit FlowRotateLayer(double theta);
  Tensor forward(const Tensor& x);
  Tensor backward(const Tensor& gout);

 private:
  double cos_ = 1.0, sin_ = 0.0;
};

// Divides a 2-channel flow tensor by its maximum per-pixel norm. Backward
// differentiates through the argmax pixel, which is exact away from ties;
// all-zero inputs pass through as the identity.
class FlowNormalizeLayer {
 public:
  Tensor forward(const Tensor& x);
  Tensor backward(const Tensor& gout);

 private:
  double scale_ = 1.0;
  long arg_ = -1;  // plane index of the max-norm pixel, -1 for identity
  Tensor y_;
};

Tensor concat_channels(const Tensor& a, const Tensor& b);
void split_channels(const Tensor& g, Tensor& ga, Tensor& gb);

}  // namespace mseg
