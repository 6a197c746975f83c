#include <cmath>
#include <functional>

#include "doctest.h"
#include "motionseg/layers.hpp"

using namespace mseg;

namespace {

Tensor random_tensor(int c, int h, int w, RandomStream& rng, double scale = 1.0) {
  Tensor t(c, h, w);
  for (auto& v : t.v) v = rng.uniform(-scale, scale);
  return t;
}

// Scalar probe loss: fixed random weighting of the output.
struct Probe {
  Tensor weights;
  explicit Probe(const Tensor& shape_like, RandomStream& rng)
      : weights(shape_like.c, shape_like.h, shape_like.w) {
    for (auto& v : weights.v) v = rng.uniform(-1, 1);
  }
  double loss(const Tensor& out) const {
    double s = 0;
    for (size_t i = 0; i < out.v.size(); ++i) s += weights.v[i] * out.v[i];
    return s;
  }
  Tensor grad() const { return weights; }
};

// Central-difference check of d(loss)/d(input) against layer.backward.
template <typename Fwd>
void check_input_grad(Fwd&& fwd, Tensor x, const Tensor& analytic,
                      double tol = 1e-6) {
  const double step = 1e-5;
  RandomStream pick(99);
  for (int k = 0; k < 30; ++k) {
    const size_t i = pick.next_u64() % x.v.size();
    const double saved = x.v[i];
    x.v[i] = saved + step;
    const double lp = fwd(x);
    x.v[i] = saved - step;
    const double lm = fwd(x);
    x.v[i] = saved;
    const double numeric = (lp - lm) / (2 * step);
    CHECK(analytic.v[i] == doctest::Approx(numeric).epsilon(tol).scale(1.0));
  }
}

}  // namespace

TEST_CASE("Conv2d preserves spatial size and differentiates correctly") {
  RandomStream rng(1);
  Conv2d conv(2, 3, 3, rng);
  Tensor x = random_tensor(2, 6, 5, rng);
  Tensor y = conv.forward(x);
  CHECK(y.c == 3);
  CHECK(y.h == 6);
  CHECK(y.w == 5);

  Probe probe(y, rng);
  conv.forward(x);
  const Tensor gin = conv.backward(probe.grad());
  check_input_grad([&](const Tensor& t) { return probe.loss(conv.forward(t)); },
                   x, gin);

  // parameter gradients
  auto params = conv.params("c");
  for (auto& p : params) std::fill(p.grad->begin(), p.grad->end(), 0.0);
  conv.forward(x);
  conv.backward(probe.grad());
  const double step = 1e-5;
  RandomStream pick(5);
  for (int k = 0; k < 20; ++k) {
    auto& pr = params[pick.next_u64() % params.size()];
    const size_t i = pick.next_u64() % pr.value->size();
    const double saved = (*pr.value)[i];
    (*pr.value)[i] = saved + step;
    const double lp = probe.loss(conv.forward(x));
    (*pr.value)[i] = saved - step;
    const double lm = probe.loss(conv.forward(x));
    (*pr.value)[i] = saved;
    CHECK((*pr.grad)[i] ==
          doctest::Approx((lp - lm) / (2 * step)).epsilon(1e-6).scale(1.0));
  }
}

TEST_CASE("AvgPool2 averages 2x2 blocks exactly") {
  Tensor x(1, 2, 4);
  for (size_t i = 0; i < x.v.size(); ++i) x.v[i] = double(i);
  AvgPool2 pool;
  const Tensor y = pool.forward(x);
  REQUIRE(y.h == 1);
  REQUIRE(y.w == 2);
  CHECK(y.v[0] == doctest::Approx((0 + 1 + 4 + 5) / 4.0));
  CHECK(y.v[1] == doctest::Approx((2 + 3 + 6 + 7) / 4.0));

  RandomStream rng(2);
  Tensor big = random_tensor(2, 6, 8, rng);
  Tensor out = pool.forward(big);
  Probe probe(out, rng);
  pool.forward(big);
  const Tensor gin = pool.backward(probe.grad());
  check_input_grad([&](const Tensor& t) { return probe.loss(pool.forward(t)); },
                   big, gin);
}

TEST_CASE("BilinearUp2 doubles resolution and is the transpose in backward") {
  RandomStream rng(3);
  Tensor x = random_tensor(2, 4, 3, rng);
  BilinearUp2 up;
  const Tensor y = up.forward(x);
  CHECK(y.h == 8);
  CHECK(y.w == 6);

  Probe probe(y, rng);
  up.forward(x);
  const Tensor gin = up.backward(probe.grad());
  check_input_grad([&](const Tensor& t) { return probe.loss(up.forward(t)); }, x,
                   gin);

  // constant input stays constant (bilinear reproduces constants)
  Tensor c(1, 4, 4, 2.5);
  const Tensor yc = up.forward(c);
  for (double v : yc.v) CHECK(v == doctest::Approx(2.5));
}

TEST_CASE("Silu and Sigmoid gradients match finite differences") {
  RandomStream rng(4);
  Tensor x = random_tensor(1, 3, 4, rng, 2.0);

  Silu silu;
  Tensor ys = silu.forward(x);
  Probe ps(ys, rng);
  silu.forward(x);
  check_input_grad([&](const Tensor& t) { return ps.loss(silu.forward(t)); }, x,
                   silu.backward(ps.grad()));

  SigmoidLayer sig;
  Tensor yg = sig.forward(x);
  Probe pg(yg, rng);
  sig.forward(x);
  check_input_grad([&](const Tensor& t) { return pg.loss(sig.forward(t)); }, x,
                   sig.backward(pg.grad()));
  for (double v : yg.v) {
    CHECK(v > 0.0);
    CHECK(v < 1.0);
  }
}

TEST_CASE("Dense and GlobalAvgPool differentiate correctly") {
  RandomStream rng(5);
  Tensor x = random_tensor(3, 2, 2, rng);

  GlobalAvgPool gap;
  const Tensor g = gap.forward(x);
  REQUIRE(g.c == 3);
  REQUIRE(g.h == 1);
  CHECK(g.v[0] == doctest::Approx((x.v[0] + x.v[1] + x.v[2] + x.v[3]) / 4.0));

  Dense dense(12, 4, rng);
  Tensor y = dense.forward(x);
  REQUIRE(y.v.size() == 4);
  Probe probe(y, rng);
  dense.forward(x);
  check_input_grad([&](const Tensor& t) { return probe.loss(dense.forward(t)); },
                   x, dense.backward(probe.grad()));
}

TEST_CASE("FlowRotateLayer matches the rotation matrix and inverts in backward") {
  RandomStream rng(6);
  Tensor x = random_tensor(2, 3, 3, rng);
  const double th = 0.7;
  FlowRotateLayer rot(th);
  const Tensor y = rot.forward(x);
  const size_t n = x.plane_size();
  for (size_t i = 0; i < n; ++i) {
    CHECK(y.v[i] ==
          doctest::Approx(std::cos(th) * x.v[i] - std::sin(th) * x.v[n + i]));
    CHECK(y.v[n + i] ==
          doctest::Approx(std::sin(th) * x.v[i] + std::cos(th) * x.v[n + i]));
  }
  Probe probe(y, rng);
  check_input_grad([&](const Tensor& t) { return probe.loss(rot.forward(t)); },
                   x, rot.backward(probe.grad()));
}

TEST_CASE("FlowNormalizeLayer divides by the max norm, exact backward") {
  RandomStream rng(7);
  Tensor x = random_tensor(2, 4, 4, rng, 3.0);
  FlowNormalizeLayer norm;
  const Tensor y = norm.forward(x);
  const size_t n = x.plane_size();
  double maxn = 0;
  for (size_t i = 0; i < n; ++i)
    maxn = std::max(maxn, std::hypot(x.v[i], x.v[n + i]));
  for (size_t i = 0; i < n; ++i)
    CHECK(y.v[i] == doctest::Approx(x.v[i] / maxn).epsilon(1e-12));

  Probe probe(y, rng);
  norm.forward(x);
  FlowNormalizeLayer fresh;
  check_input_grad(
      [&](const Tensor& t) { return probe.loss(fresh.forward(t)); }, x,
      norm.backward(probe.grad()), 1e-5);

  Tensor zero(2, 3, 3);
  FlowNormalizeLayer nz;
  const Tensor yz = nz.forward(zero);
  for (double v : yz.v) CHECK(v == 0.0);
}
