#include <array>
#include <queue>

#include "doctest.h"
#include "motionseg/maskmetrics.hpp"
#include "motionseg/rng.hpp"

using namespace mseg;

namespace {

BinaryMask random_mask(int w, int h, double p, RandomStream& rng) {
  BinaryMask m(w, h);
  for (auto& v : m.data) v = rng.bernoulli(p);
  return m;
}

// Independent counting oracle.
double iou_oracle(const BinaryMask& a, const BinaryMask& b) {
  size_t inter = 0, uni = 0;
  for (size_t i = 0; i < a.data.size(); ++i) {
    inter += (a.data[i] && b.data[i]);
    uni += (a.data[i] || b.data[i]);
  }
  return uni == 0 ? 1.0 : double(inter) / double(uni);
}

// Brute-force sliding-window map built by cropping each tile.
Image local_iou_oracle(const BinaryMask& a, const BinaryMask& b, int ww, int wh) {
  Image out(a.width, a.height);
  for (int ty = 0; ty < a.height; ty += wh) {
    for (int tx = 0; tx < a.width; tx += ww) {
      const int x1 = std::min(tx + ww, a.width), y1 = std::min(ty + wh, a.height);
      size_t inter = 0, uni = 0;
      for (int y = ty; y < y1; ++y)
        for (int x = tx; x < x1; ++x) {
          inter += (a.at(x, y) && b.at(x, y));
          uni += (a.at(x, y) || b.at(x, y));
        }
      const double v = uni == 0 ? 1.0 : double(inter) / double(uni);
      for (int y = ty; y < y1; ++y)
        for (int x = tx; x < x1; ++x) out.at(x, y) = v;
    }
  }
  return out;
}

// BFS flood-fill component counter (8-connectivity).
int components_oracle(const BinaryMask& m) {
  std::vector<char> seen(m.data.size(), 0);
  int count = 0;
  for (int y = 0; y < m.height; ++y)
    for (int x = 0; x < m.width; ++x) {
      if (!m.at(x, y) || seen[y * m.width + x]) continue;
      ++count;
      std::queue<std::pair<int, int>> q;
      q.push({x, y});
      seen[y * m.width + x] = 1;
      while (!q.empty()) {
        auto [cx, cy] = q.front();
        q.pop();
        for (int dy = -1; dy <= 1; ++dy)
          for (int dx = -1; dx <= 1; ++dx) {
            const int nx = cx + dx, ny = cy + dy;
            if (nx < 0 || ny < 0 || nx >= m.width || ny >= m.height) continue;
            if (!m.at(nx, ny) || seen[ny * m.width + nx]) continue;
            seen[ny * m.width + nx] = 1;
            q.push({nx, ny});
          }
      }
    }
  return count;
}

}  // namespace

TEST_CASE("iou matches the counting oracle and handles the empty convention") {
  RandomStream rng(1);
  for (int t = 0; t < 50; ++t) {
    const auto a = random_mask(23, 17, 0.3, rng);
    const auto b = random_mask(23, 17, 0.3, rng);
    CHECK(iou(a, b) == doctest::Approx(iou_oracle(a, b)).epsilon(1e-12));
  }
  const BinaryMask e1(5, 5), e2(5, 5);
  CHECK(iou(e1, e2) == 1.0);  // both empty
  BinaryMask f(5, 5);
  f.at(2, 2) = 1;
  CHECK(iou(e1, f) == 0.0);
}

TEST_CASE("local_iou matches the brute-force tiling oracle, partial tiles included") {
  RandomStream rng(2);
  for (const auto [w, h, ww, wh] :
       {std::array{16, 16, 4, 4}, std::array{17, 13, 4, 4},
        std::array{16, 16, 16, 16}, std::array{15, 9, 1, 1},
        std::array{10, 10, 7, 3}}) {
    const auto a = random_mask(w, h, 0.4, rng);
    const auto b = random_mask(w, h, 0.4, rng);
    const LocalIoUMap m = local_iou(a, b, ww, wh);
    const Image oracle = local_iou_oracle(a, b, ww, wh);
    for (size_t i = 0; i < oracle.data.size(); ++i)
      CHECK(m.values.data[i] == doctest::Approx(oracle.data[i]).epsilon(1e-12));
  }
}

TEST_CASE("local_iou identities: full window = IoU, 1x1 = pixel accuracy") {
  RandomStream rng(3);
  for (int t = 0; t < 100; ++t) {
    const int w = 8 + int(rng.next_u64() % 25), h = 8 + int(rng.next_u64() % 25);
    const auto a = random_mask(w, h, 0.35, rng);
    const auto b = random_mask(w, h, 0.35, rng);
    const auto mean_of = [](const LocalIoUMap& m) {
      double s = 0;
      for (double v : m.values.data) s += v;
      return s / double(m.values.data.size());
    };
    CHECK(std::abs(mean_of(local_iou(a, b, w, h)) - iou(a, b)) < 1e-9);
    CHECK(std::abs(mean_of(local_iou(a, b, 1, 1)) - pixel_accuracy(a, b)) < 1e-9);
  }
}

TEST_CASE("binarize thresholds with ties to foreground") {
  ProbMask p(3, 1);
  p.at(0, 0) = 0.49;
  p.at(1, 0) = 0.5;
  p.at(2, 0) = 0.51;
  const BinaryMask m = binarize(p, 0.5);
  CHECK(m.at(0, 0) == 0);
  CHECK(m.at(1, 0) == 1);  // tie selects
  CHECK(m.at(2, 0) == 1);
  CHECK_THROWS_AS(binarize(p, 1.5), ParamError);
  CHECK_THROWS_AS(binarize(p, -0.1), ParamError);
}

TEST_CASE("selection binarize is monotone in eps") {
  RandomStream rng(4);
  const auto a = random_mask(16, 16, 0.4, rng);
  const auto b = random_mask(16, 16, 0.4, rng);
  const LocalIoUMap m = local_iou(a, b, 4, 4);
  size_t prev = SIZE_MAX;
  for (double eps : {0.0, 0.2, 0.4, 0.6, 0.8, 1.0}) {
    const size_t c = binarize(m, eps).values.count();
    CHECK(c <= prev);
    prev = c;
  }
  CHECK(binarize(m, 0.0).values.count() == m.values.data.size());  // all pass
}

TEST_CASE("effective_iou restricts to the selection") {
  BinaryMask gt(4, 1), noisy(4, 1);
  gt.at(0, 0) = gt.at(1, 0) = 1;
  noisy.at(1, 0) = noisy.at(2, 0) = 1;
  SelectionMask sel{BinaryMask(4, 1), 0.5};
  sel.values.at(0, 0) = sel.values.at(1, 0) = 1;
  // inside selection: gt {1,1}, noisy {0,1} -> inter 1, union 2
  CHECK(effective_iou(gt, noisy, sel) == doctest::Approx(0.5));

  SelectionMask empty{BinaryMask(4, 1), 0.5};
  CHECK_THROWS_AS(effective_iou(gt, noisy, empty), EmptySelectionError);

  SelectionMask bg_only{BinaryMask(4, 1), 0.5};
  bg_only.values.at(3, 0) = 1;  // both masks empty there
  CHECK(effective_iou(gt, noisy, bg_only) == 1.0);
}

TEST_CASE("connected_components matches the flood-fill oracle") {
  RandomStream rng(5);
  for (int t = 0; t < 30; ++t) {
    const auto m = random_mask(20, 15, 0.25, rng);
    CHECK(connected_components(m).count == components_oracle(m));
  }
}

TEST_CASE("component labels are ordered by first pixel in row-major order") {
  BinaryMask m(6, 3);
  m.at(4, 0) = 1;  // component seen first
  m.at(0, 2) = 1;  // later row
  const LabeledMask lab = connected_components(m);
  REQUIRE(lab.count == 2);
  CHECK(lab.at(4, 0) == 1);
  CHECK(lab.at(0, 2) == 2);
}

TEST_CASE("per_tool_ious crops per gt component") {
  // Two gt blobs; noisy misses the second entirely.
  BinaryMask gt(10, 4), noisy(10, 4);
  for (int y = 0; y < 2; ++y)
    for (int x = 0; x < 2; ++x) gt.at(x, y) = 1;
  for (int y = 0; y < 2; ++y)
    for (int x = 7; x < 9; ++x) gt.at(x, y) = 1;
  noisy.at(0, 0) = noisy.at(1, 0) = 1;  // half of blob 1
  const auto v = per_tool_ious(gt, noisy);
  REQUIRE(v.size() == 2);
  CHECK(v[0] == doctest::Approx(0.5));
  CHECK(v[1] == doctest::Approx(0.0));
  CHECK(per_tool_ious(BinaryMask(10, 4), noisy).empty());
}
