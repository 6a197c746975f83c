#pragma once

#include <cstddef>
#include <vector>

#include "motionseg/types.hpp"

namespace mseg {

// CHW feature map, planar row-major.
struct Tensor {
  int c = 0, h = 0, w = 0;
  std::vector<double> v;

  Tensor() = default;
  Tensor(int c_, int h_, int w_, double fill = 0.0)
      : c(c_), h(h_), w(w_), v(static_cast<size_t>(c_) * h_ * w_, fill) {}

  size_t plane_size() const { return static_cast<size_t>(h) * w; }
  double* plane(int i) { return v.data() + i * plane_size(); }
  const double* plane(int i) const { return v.data() + i * plane_size(); }
  double& at(int ci, int y, int x) {
    return v[(static_cast<size_t>(ci) * h + y) * w + x];
  }
  double at(int ci, int y, int x) const {
    return v[(static_cast<size_t>(ci) * h + y) * w + x];
  }
  bool same_shape(const Tensor& o) const {
    return c == o.c && h == o.h && w == o.w;
  }
};

Tensor image_to_tensor(const Image& img);
Tensor flow_to_tensor(const FlowField& flow);
Tensor mask_to_tensor(const BinaryMask& m);
ProbMask tensor_to_probmask(const Tensor& t);  // expects c == 1
FlowField tensor_to_flow(const Tensor& t);     // expects c == 2

}  // namespace mseg
