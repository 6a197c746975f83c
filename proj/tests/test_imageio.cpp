#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "motionseg/imageio.hpp"
#include "motionseg/rng.hpp"

using namespace mseg;
namespace fs = std::filesystem;

namespace {

fs::path tmpdir() {
  const fs::path d = fs::temp_directory_path() / "mseg_imageio_test";
  fs::create_directories(d);
  return d;
}

std::string file_bytes(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(in), {});
}

}  // namespace

TEST_CASE("gray png roundtrip is exact at 8-bit resolution") {
  Image img(13, 9);
  RandomStream rng(1);
  for (auto& v : img.data) v = rng.uniform();
  const fs::path p = tmpdir() / "gray.png";
  write_png(p, img);
  const Image back = read_png(p);
  REQUIRE(back.same_shape(img));
  for (size_t i = 0; i < img.data.size(); ++i)
    CHECK(std::abs(back.data[i] - img.data[i]) <= 0.5 / 255.0 + 1e-12);
}

TEST_CASE("rgb png roundtrip") {
  Image img(7, 5, 3);
  RandomStream rng(2);
  for (auto& v : img.data) v = rng.uniform();
  const fs::path p = tmpdir() / "rgb.png";
  write_png(p, img);
  const Image back = read_png(p);
  REQUIRE(back.channels == 3);
  for (size_t i = 0; i < img.data.size(); ++i)
    CHECK(std::abs(back.data[i] - img.data[i]) <= 0.5 / 255.0 + 1e-12);
}

TEST_CASE("mask png roundtrip is exact") {
  BinaryMask m(17, 11);
  RandomStream rng(3);
  for (auto& v : m.data) v = rng.bernoulli(0.4);
  const fs::path p = tmpdir() / "mask.png";
  write_mask_png(p, m);
  CHECK(read_mask_png(p) == m);
}

TEST_CASE("png output is byte-deterministic") {
  Image img(16, 16);
  RandomStream rng(4);
  for (auto& v : img.data) v = rng.uniform();
  const fs::path a = tmpdir() / "det_a.png", b = tmpdir() / "det_b.png";
  write_png(a, img);
  write_png(b, img);
  CHECK(file_bytes(a) == file_bytes(b));
}

TEST_CASE("flo roundtrip preserves values at f32 resolution") {
  FlowField f(6, 4);
  RandomStream rng(5);
  for (size_t i = 0; i < f.u.size(); ++i) {
    f.u[i] = rng.uniform(-10, 10);
    f.v[i] = rng.uniform(-10, 10);
  }
  const fs::path p = tmpdir() / "flow.flo";
  write_flo(p, f);
  const FlowField back = read_flo(p);
  REQUIRE(back.same_shape(f));
  for (size_t i = 0; i < f.u.size(); ++i) {
    CHECK(back.u[i] == doctest::Approx(f.u[i]).epsilon(1e-6));
    CHECK(back.v[i] == doctest::Approx(f.v[i]).epsilon(1e-6));
  }
}

TEST_CASE("flo header layout matches the format") {
  FlowField f(3, 2);
  f.u[0] = 1.0;
  const fs::path p = tmpdir() / "hdr.flo";
  write_flo(p, f);
  std::ifstream in(p, std::ios::binary);
  float magic;
  int32_t w, h;
  in.read(reinterpret_cast<char*>(&magic), 4);
  in.read(reinterpret_cast<char*>(&w), 4);
  in.read(reinterpret_cast<char*>(&h), 4);
  CHECK(magic == 202021.25f);
  CHECK(w == 3);
  CHECK(h == 2);
}

TEST_CASE("reading a missing file raises IoError") {
  CHECK_THROWS_AS(read_png(tmpdir() / "nope.png"), IoError);
  CHECK_THROWS_AS(read_flo(tmpdir() / "nope.flo"), IoError);
}

TEST_CASE("png16 writes a 16-bit grayscale file") {
  Image img(4, 4);
  for (size_t i = 0; i < img.data.size(); ++i) img.data[i] = i / 15.0;
  const fs::path p = tmpdir() / "deep.png";
  write_png16(p, img);
  // 16-bit PNG magic check: bit depth byte in IHDR == 16
  const std::string bytes = file_bytes(p);
  REQUIRE(bytes.size() > 25);
  CHECK(static_cast<unsigned char>(bytes[24]) == 16);
}
