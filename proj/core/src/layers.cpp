#include "motionseg/layers.hpp"

#include <cassert>
#include <cmath>

namespace mseg {

Tensor image_to_tensor(const Image& img) {
  Tensor t(img.channels, img.height, img.width);
  t.v = img.data;
  return t;
}

Tensor flow_to_tensor(const FlowField& flow) {
  Tensor t(2, flow.height, flow.width);
  std::copy(flow.u.begin(), flow.u.end(), t.plane(0));
  std::copy(flow.v.begin(), flow.v.end(), t.plane(1));
  return t;
}

Tensor mask_to_tensor(const BinaryMask& m) {
  Tensor t(1, m.height, m.width);
  for (size_t i = 0; i < m.data.size(); ++i) t.v[i] = m.data[i] ? 1.0 : 0.0;
  return t;
}

ProbMask tensor_to_probmask(const Tensor& t) {
  assert(t.c == 1);
  ProbMask m(t.w, t.h, 1);
  m.data = t.v;
  return m;
}

FlowField tensor_to_flow(const Tensor& t) {
  assert(t.c == 2);
  FlowField f(t.w, t.h);
  std::copy(t.plane(0), t.plane(0) + t.plane_size(), f.u.begin());
  std::copy(t.plane(1), t.plane(1) + t.plane_size(), f.v.begin());
  return f;
}

// ---------------------------------------------------------------- Conv2d

Conv2d::Conv2d(int in_ch, int out_ch, int ksize, RandomStream& rng)
    : in_ch_(in_ch), out_ch_(out_ch), k_(ksize), pad_(ksize / 2) {
  const size_t nw = static_cast<size_t>(out_ch) * in_ch * k_ * k_;
  w_.resize(nw);
  wg_.assign(nw, 0.0);
  b_.assign(out_ch, 0.0);
  bg_.assign(out_ch, 0.0);
  const double scale = std::sqrt(2.0 / (in_ch * k_ * k_));  // He init
  for (auto& x : w_) x = rng.normal() * scale;
}

Tensor Conv2d::forward(const Tensor& x) {
  assert(x.c == in_ch_);
  x_ = x;
  Tensor out(out_ch_, x.h, x.w);
  const int H = x.h, W = x.w;
  for (int o = 0; o < out_ch_; ++o) {
    double* op = out.plane(o);
    const double bo = b_[o];
    for (int i = 0; i < static_cast<int>(out.plane_size()); ++i) op[i] = bo;
    for (int ic = 0; ic < in_ch_; ++ic) {
      const double* ip = x.plane(ic);
      const double* wk = &w_[(static_cast<size_t>(o) * in_ch_ + ic) * k_ * k_];
      for (int ky = 0; ky < k_; ++ky)
        for (int kx = 0; kx < k_; ++kx) {
          const double wv = wk[ky * k_ + kx];
          const int dy = ky - pad_, dx = kx - pad_;
          const int y0 = std::max(0, -dy), y1 = std::min(H, H - dy);
          const int x0 = std::max(0, -dx), x1 = std::min(W, W - dx);
          for (int y = y0; y < y1; ++y) {
            double* orow = op + y * W;
            const double* irow = ip + (y + dy) * W + dx;
            for (int x2 = x0; x2 < x1; ++x2) orow[x2] += wv * irow[x2];
          }
        }
    }
  }
  return out;
}

Tensor Conv2d::backward(const Tensor& gout) {
  assert(gout.c == out_ch_ && gout.h == x_.h && gout.w == x_.w);
  Tensor gin(in_ch_, x_.h, x_.w);
  const int H = x_.h, W = x_.w;
  for (int o = 0; o < out_ch_; ++o) {
    const double* gp = gout.plane(o);
    double gb = 0.0;
    for (size_t i = 0; i < gout.plane_size(); ++i) gb += gp[i];
    bg_[o] += gb;
    for (int ic = 0; ic < in_ch_; ++ic) {
      const double* ip = x_.plane(ic);
      double* gip = gin.plane(ic);
      const size_t wbase = (static_cast<size_t>(o) * in_ch_ + ic) * k_ * k_;
      for (int ky = 0; ky < k_; ++ky)
        for (int kx = 0; kx < k_; ++kx) {
          const int dy = ky - pad_, dx = kx - pad_;
          const int y0 = std::max(0, -dy), y1 = std::min(H, H - dy);
          const int x0 = std::max(0, -dx), x1 = std::min(W, W - dx);
          double gw = 0.0;
          const double wv = w_[wbase + ky * k_ + kx];
          for (int y = y0; y < y1; ++y) {
            const double* grow = gp + y * W;
            const double* irow = ip + (y + dy) * W + dx;
            double* girow = gip + (y + dy) * W + dx;
            for (int x2 = x0; x2 < x1; ++x2) {
              gw += grow[x2] * irow[x2];
              girow[x2] += grow[x2] * wv;
            }
          }
          wg_[wbase + ky * k_ + kx] += gw;
        }
    }
  }
  return gin;
}

std::vector<ParamRef> Conv2d::params(const std::string& prefix) {
  return {{prefix + ".w", &w_, &wg_}, {prefix + ".b", &b_, &bg_}};
}

// ---------------------------------------------------------------- pooling

Tensor AvgPool2::forward(const Tensor& x) {
  assert(x.h % 2 == 0 && x.w % 2 == 0);
  in_h_ = x.h;
  in_w_ = x.w;
  Tensor out(x.c, x.h / 2, x.w / 2);
  for (int c = 0; c < x.c; ++c) {
    const double* ip = x.plane(c);
    double* op = out.plane(c);
    for (int y = 0; y < out.h; ++y)
      for (int xx = 0; xx < out.w; ++xx) {
        const double* r0 = ip + 2 * y * x.w + 2 * xx;
        const double* r1 = r0 + x.w;
        op[y * out.w + xx] = 0.25 * (r0[0] + r0[1] + r1[0] + r1[1]);
      }
  }
  return out;
}

Tensor AvgPool2::backward(const Tensor& gout) {
  Tensor gin(gout.c, in_h_, in_w_);
  for (int c = 0; c < gout.c; ++c) {
    const double* gp = gout.plane(c);
    double* gi = gin.plane(c);
    for (int y = 0; y < gout.h; ++y)
      for (int xx = 0; xx < gout.w; ++xx) {
        const double g = 0.25 * gp[y * gout.w + xx];
        double* r0 = gi + 2 * y * in_w_ + 2 * xx;
        double* r1 = r0 + in_w_;
        r0[0] += g;
        r0[1] += g;
        r1[0] += g;
        r1[1] += g;
      }
  }
  return gin;
}

namespace {

// Half-pixel-center source coordinate for 2x upsampling: (x+0.5)/2 - 0.5.
inline void up2_taps(int xo, int in_n, int& i0, int& i1, double& w1) {
  const double s = (xo + 0.5) * 0.5 - 0.5;
  const double fl = std::floor(s);
  i0 = static_cast<int>(fl);
  w1 = s - fl;
  i1 = i0 + 1;
  if (i0 < 0) i0 = 0;
  if (i1 > in_n - 1) i1 = in_n - 1;
}

}  // namespace

Tensor BilinearUp2::forward(const Tensor& x) {
  in_h_ = x.h;
  in_w_ = x.w;
  Tensor out(x.c, x.h * 2, x.w * 2);
  for (int c = 0; c < x.c; ++c) {
    const double* ip = x.plane(c);
    double* op = out.plane(c);
    for (int y = 0; y < out.h; ++y) {
      int y0, y1;
      double wy;
      up2_taps(y, x.h, y0, y1, wy);
      for (int xx = 0; xx < out.w; ++xx) {
        int x0, x1;
        double wx;
        up2_taps(xx, x.w, x0, x1, wx);
        const double top = (1 - wx) * ip[y0 * x.w + x0] + wx * ip[y0 * x.w + x1];
        const double bot = (1 - wx) * ip[y1 * x.w + x0] + wx * ip[y1 * x.w + x1];
        op[y * out.w + xx] = (1 - wy) * top + wy * bot;
      }
    }
  }
  return out;
}

Tensor BilinearUp2::backward(const Tensor& gout) {
  Tensor gin(gout.c, in_h_, in_w_);
  for (int c = 0; c < gout.c; ++c) {
    const double* gp = gout.plane(c);
    double* gi = gin.plane(c);
    for (int y = 0; y < gout.h; ++y) {
      int y0, y1;
      double wy;
      up2_taps(y, in_h_, y0, y1, wy);
      for (int xx = 0; xx < gout.w; ++xx) {
        int x0, x1;
        double wx;
        up2_taps(xx, in_w_, x0, x1, wx);
        const double g = gp[y * gout.w + xx];
        gi[y0 * in_w_ + x0] += (1 - wy) * (1 - wx) * g;
        gi[y0 * in_w_ + x1] += (1 - wy) * wx * g;
        gi[y1 * in_w_ + x0] += wy * (1 - wx) * g;
        gi[y1 * in_w_ + x1] += wy * wx * g;
      }
    }
  }
  return gin;
}

// ---------------------------------------------------------------- pointwise

Tensor Silu::forward(const Tensor& x) {
  x_ = x;
  Tensor out = x;
  for (auto& v : out.v) v = v / (1.0 + std::exp(-v));
  return out;
}

Tensor Silu::backward(const Tensor& gout) {
  Tensor gin = gout;
  for (size_t i = 0; i < gin.v.size(); ++i) {
    const double s = 1.0 / (1.0 + std::exp(-x_.v[i]));
    gin.v[i] *= s * (1.0 + x_.v[i] * (1.0 - s));
  }
  return gin;
}

Tensor SigmoidLayer::forward(const Tensor& x) {
  y_ = x;
  for (auto& v : y_.v) v = 1.0 / (1.0 + std::exp(-v));
  return y_;
}

Tensor SigmoidLayer::backward(const Tensor& gout) {
  Tensor gin = gout;
  for (size_t i = 0; i < gin.v.size(); ++i)
    gin.v[i] *= y_.v[i] * (1.0 - y_.v[i]);
  return gin;
}

Tensor GlobalAvgPool::forward(const Tensor& x) {
  in_h_ = x.h;
  in_w_ = x.w;
  Tensor out(x.c, 1, 1);
  for (int c = 0; c < x.c; ++c) {
    double s = 0.0;
    const double* ip = x.plane(c);
    for (size_t i = 0; i < x.plane_size(); ++i) s += ip[i];
    out.v[c] = s / static_cast<double>(x.plane_size());
  }
  return out;
}

Tensor GlobalAvgPool::backward(const Tensor& gout) {
  Tensor gin(gout.c, in_h_, in_w_);
  const double inv = 1.0 / (static_cast<double>(in_h_) * in_w_);
  for (int c = 0; c < gout.c; ++c) {
    const double g = gout.v[c] * inv;
    double* gi = gin.plane(c);
    for (size_t i = 0; i < gin.plane_size(); ++i) gi[i] = g;
  }
  return gin;
}

Dense::Dense(int in_dim, int out_dim, RandomStream& rng)
    : in_dim_(in_dim), out_dim_(out_dim) {
  w_.resize(static_cast<size_t>(in_dim) * out_dim);
  wg_.assign(w_.size(), 0.0);
  b_.assign(out_dim, 0.0);
  bg_.assign(out_dim, 0.0);
  const double scale = std::sqrt(2.0 / in_dim);
  for (auto& x : w_) x = rng.normal() * scale;
}

Tensor Dense::forward(const Tensor& x) {
  assert(static_cast<int>(x.v.size()) == in_dim_);
  x_ = x;
  Tensor out(out_dim_, 1, 1);
  for (int o = 0; o < out_dim_; ++o) {
    double s = b_[o];
    const double* wr = &w_[static_cast<size_t>(o) * in_dim_];
    for (int i = 0; i < in_dim_; ++i) s += wr[i] * x.v[i];
    out.v[o] = s;
  }
  return out;
}

Tensor Dense::backward(const Tensor& gout) {
  Tensor gin(x_.c, x_.h, x_.w);
  for (int o = 0; o < out_dim_; ++o) {
    const double g = gout.v[o];
    bg_[o] += g;
    double* wgr = &wg_[static_cast<size_t>(o) * in_dim_];
    const double* wr = &w_[static_cast<size_t>(o) * in_dim_];
    for (int i = 0; i < in_dim_; ++i) {
      wgr[i] += g * x_.v[i];
      gin.v[i] += g * wr[i];
    }
  }
  return gin;
}

std::vector<ParamRef> Dense::params(const std::string& prefix) {
  return {{prefix + ".w", &w_, &wg_}, {prefix + ".b", &b_, &bg_}};
}

FlowRotateLayer::FlowRotateLayer(double theta)
    : cos_(std::cos(theta)), sin_(std::sin(theta)) {}

Tensor FlowRotateLayer::forward(const Tensor& x) {
  assert(x.c == 2);
  Tensor out(2, x.h, x.w);
  const size_t n = x.plane_size();
  for (size_t i = 0; i < n; ++i) {
    const double u = x.v[i], v = x.v[n + i];
    out.v[i] = cos_ * u - sin_ * v;
    out.v[n + i] = sin_ * u + cos_ * v;
  }
  return out;
}

Tensor FlowRotateLayer::backward(const Tensor& gout) {
  assert(gout.c == 2);
  Tensor gin(2, gout.h, gout.w);
  const size_t n = gout.plane_size();
  for (size_t i = 0; i < n; ++i) {
    const double gu = gout.v[i], gv = gout.v[n + i];
    gin.v[i] = cos_ * gu + sin_ * gv;
    gin.v[n + i] = -sin_ * gu + cos_ * gv;
  }
  return gin;
}

Tensor FlowNormalizeLayer::forward(const Tensor& x) {
  assert(x.c == 2);
  const size_t n = x.plane_size();
  double best = 0.0;
  arg_ = -1;
  for (size_t i = 0; i < n; ++i) {
    const double m = x.v[i] * x.v[i] + x.v[n + i] * x.v[n + i];
    if (m > best) {
      best = m;
      arg_ = static_cast<long>(i);
    }
  }
  if (arg_ < 0) {  // all-zero field
    scale_ = 1.0;
    y_ = x;
    return x;
  }
  scale_ = std::sqrt(best);
  Tensor out(2, x.h, x.w);
  for (size_t i = 0; i < x.v.size(); ++i) out.v[i] = x.v[i] / scale_;
  y_ = out;
  return out;
}

Tensor FlowNormalizeLayer::backward(const Tensor& gout) {
  if (arg_ < 0) return gout;
  const size_t n = y_.plane_size();
  Tensor gin(2, gout.h, gout.w);
  double dot = 0.0;
  for (size_t i = 0; i < gout.v.size(); ++i) {
    gin.v[i] = gout.v[i] / scale_;
    dot += gout.v[i] * y_.v[i];
  }
  // d scale / d x is nonzero only at the argmax components, equal to y there.
  const size_t ui = static_cast<size_t>(arg_), vi = n + ui;
  gin.v[ui] -= dot * y_.v[ui] / scale_;
  gin.v[vi] -= dot * y_.v[vi] / scale_;
  return gin;
}

Tensor concat_channels(const Tensor& a, const Tensor& b) {
  assert(a.h == b.h && a.w == b.w);
  Tensor out(a.c + b.c, a.h, a.w);
  std::copy(a.v.begin(), a.v.end(), out.v.begin());
  std::copy(b.v.begin(), b.v.end(), out.v.begin() + a.v.size());
  return out;
}

void split_channels(const Tensor& g, Tensor& ga, Tensor& gb) {
  assert(g.c == ga.c + gb.c);
  std::copy(g.v.begin(), g.v.begin() + ga.v.size(), ga.v.begin());
  std::copy(g.v.begin() + ga.v.size(), g.v.end(), gb.v.begin());
}

}  // namespace mseg
