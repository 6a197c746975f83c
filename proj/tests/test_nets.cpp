#include <filesystem>

#include "doctest.h"
#include "motionseg/nets.hpp"
#include "motionseg/tensor.hpp"

using namespace mseg;
namespace fs = std::filesystem;

namespace {

Tensor random_input(int c, int s, uint64_t seed) {
  RandomStream rng(seed);
  Tensor t(c, s, s);
  for (auto& v : t.v) v = rng.uniform(-1, 1);
  return t;
}

}  // namespace

TEST_CASE("default arch wiring per role") {
  CHECK(default_arch(Role::teacher_segmenter).encoder_depth == 5);
  CHECK(default_arch(Role::teacher_segmenter).input_channels == 2);
  CHECK(default_arch(Role::proxy).encoder_depth == 6);
  CHECK(default_arch(Role::proxy).input_channels == 1);
  CHECK(default_arch(Role::student).encoder_depth == 10);
  const ArchSpec g = default_arch(Role::generator);
  CHECK(g.input_channels == 1 + g.noise_size);
  CHECK(g.output_channels == 2);
  CHECK(default_arch(Role::disc_patch).patch_k == 4);
}

TEST_CASE("arch validation rejects bad shapes") {
  ArchSpec s = default_arch(Role::proxy);
  s.image_size = 50;  // not a multiple of 16
  CHECK_THROWS_AS(s.validate(), ConfigError);
  ArchSpec g = default_arch(Role::generator);
  g.input_channels = 3;  // must be 1 + noise_size
  CHECK_THROWS_AS(g.validate(), ConfigError);
}

TEST_CASE("segmenter outputs probabilities of the input resolution") {
  Segmenter seg(default_arch(Role::proxy, 64, 8), 42);
  const Tensor y = seg.forward(random_input(1, 64, 1));
  REQUIRE(y.c == 1);
  REQUIRE(y.h == 64);
  REQUIRE(y.w == 64);
  for (double v : y.v) {
    CHECK(v > 0.0);
    CHECK(v < 1.0);
  }
  CHECK_THROWS_AS(seg.forward(random_input(2, 64, 1)), ShapeError);
}

TEST_CASE("generator produces a 2-channel flow tensor from mask and noise") {
  const ArchSpec spec = default_arch(Role::generator, 64, 8);
  Generator gen(spec, 7);
  RandomStream rng(3);
  const GeneratorNoise noise = GeneratorNoise::sample(spec.noise_size, rng);
  REQUIRE(int(noise.values.size()) == spec.noise_size);
  BinaryMask m(64, 64);
  m.at(10, 10) = 1;
  const FlowField f = gen.generate(m, noise);
  CHECK(f.width == 64);
  CHECK(f.height == 64);
}

TEST_CASE("discriminators score in (0,1), patch map is k x k") {
  const int s = 64;
  GlobalDiscriminator dg(default_arch(Role::disc_global, s, 8), 1);
  PatchDiscriminator dp(default_arch(Role::disc_patch, s, 8), 2);
  const Tensor flow = random_input(2, s, 9);
  const Tensor sg = dg.forward(flow);
  REQUIRE(sg.v.size() == 1);
  CHECK(sg.v[0] > 0.0);
  CHECK(sg.v[0] < 1.0);
  const Tensor sp = dp.forward(flow);
  CHECK(sp.c == 1);
  CHECK(sp.h == 4);
  CHECK(sp.w == 4);
  for (double v : sp.v) {
    CHECK(v > 0.0);
    CHECK(v < 1.0);
  }

  FlowField f(s, s);
  const DiscOutput out = discriminate(dg, dp, f);
  double pmean = 0;
  for (int y = 0; y < 4; ++y)
    for (int x = 0; x < 4; ++x) pmean += out.patch_map.at(x, y);
  pmean /= 16.0;
  CHECK(out.combined() ==
        doctest::Approx(0.5 * (out.global_score + pmean)).epsilon(1e-12));
}

TEST_CASE("same seed, same params; different seed, different params") {
  Segmenter a(default_arch(Role::proxy, 64, 8), 5);
  Segmenter b(default_arch(Role::proxy, 64, 8), 5);
  Segmenter c(default_arch(Role::proxy, 64, 8), 6);
  CHECK(param_checksum(a.params()) == param_checksum(b.params()));
  CHECK(param_checksum(a.params()) != param_checksum(c.params()));
}

TEST_CASE("checkpoint roundtrip preserves f32 weights and the arch header") {
  const fs::path p = fs::temp_directory_path() / "mseg_ckpt_test.ckpt";
  Segmenter seg(default_arch(Role::student, 64, 8), 11);
  {
    auto refs = seg.params();
    save_checkpoint(p, seg.spec(), refs);
  }
  const ArchSpec spec = read_checkpoint_spec(p);
  CHECK(spec.role == Role::student);
  CHECK(spec.encoder_depth == seg.spec().encoder_depth);

  Segmenter back = load_network<Segmenter>(p);
  CHECK(param_checksum(back.params()) == param_checksum(seg.params()));

  // saved f32 weights round-trip exactly once quantized
  const Tensor x = random_input(1, 64, 21);
  const Tensor y0 = back.forward(x);
  Segmenter again = load_network<Segmenter>(p);
  const Tensor y1 = again.forward(x);
  CHECK(y0.v == y1.v);
  fs::remove(p);
}

TEST_CASE("loading a checkpoint into a mismatched arch fails") {
  const fs::path p = fs::temp_directory_path() / "mseg_ckpt_mismatch.ckpt";
  Segmenter seg(default_arch(Role::proxy, 64, 8), 1);
  {
    auto refs = seg.params();
    save_checkpoint(p, seg.spec(), refs);
  }
  Segmenter other(default_arch(Role::student, 64, 8), 1);
  auto refs = other.params();
  CHECK_THROWS_AS(load_checkpoint(p, other.spec(), refs), IoError);
  fs::remove(p);
}

TEST_CASE("zero_grads clears accumulated gradients") {
  Segmenter seg(default_arch(Role::proxy, 64, 8), 2);
  seg.forward(random_input(1, 64, 3));
  Tensor g(1, 64, 64, 0.01);
  seg.backward(g);
  auto refs = seg.params();
  double total = 0;
  for (const auto& r : refs)
    for (double v : *r.grad) total += std::abs(v);
  CHECK(total > 0.0);
  zero_grads(refs);
  for (const auto& r : refs)
    for (double v : *r.grad) CHECK(v == 0.0);
}
