#include "motionseg/imageio.hpp"

#include <png.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <memory>
#include <vector>

namespace mseg {

namespace {

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

FilePtr open_file(const std::filesystem::path& path, const char* mode) {
  FilePtr f(std::fopen(path.c_str(), mode));
  if (!f) throw IoError("cannot open " + path.string());
  return f;
}

uint8_t to_u8(double v) {
  v = std::clamp(v, 0.0, 1.0);
  return static_cast<uint8_t>(std::lround(v * 255.0));
}

void write_png_impl(const std::filesystem::path& path, int width, int height,
                    int color_type, int bit_depth,
                    const std::vector<std::vector<uint8_t>>& rows) {
  auto f = open_file(path, "wb");
  png_structp png =
      png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png_create_info_struct(png);
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw IoError("png write failed: " + path.string());
  }
  png_init_io(png, f.get());
  png_set_IHDR(png, info, width, height, bit_depth, color_type,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  // No timestamps or ancillary chunks: output must be byte-reproducible.
  png_write_info(png, info);
  for (const auto& row : rows)
    png_write_row(png, const_cast<png_bytep>(row.data()));
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

struct PngReader {
  png_structp png = nullptr;
  png_infop info = nullptr;
  ~PngReader() {
    if (png) png_destroy_read_struct(&png, info ? &info : nullptr, nullptr);
  }
};

Image read_png_as(const std::filesystem::path& path) {
  auto f = open_file(path, "rb");
  PngReader r;
  r.png =
      png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  r.info = png_create_info_struct(r.png);
  if (setjmp(png_jmpbuf(r.png))) throw IoError("png read failed: " + path.string());
  png_init_io(r.png, f.get());
  png_read_info(r.png, r.info);

  png_uint_32 w, h;
  int bit_depth, color_type;
  png_get_IHDR(r.png, r.info, &w, &h, &bit_depth, &color_type, nullptr, nullptr,
               nullptr);
  if (bit_depth == 16) png_set_strip_16(r.png);
  if (color_type == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(r.png);
  if (color_type == PNG_COLOR_TYPE_GRAY && bit_depth < 8)
    png_set_expand_gray_1_2_4_to_8(r.png);
  png_set_strip_alpha(r.png);
  png_read_update_info(r.png, r.info);

  const int channels = png_get_channels(r.png, r.info);
  std::vector<uint8_t> row(static_cast<size_t>(w) * channels);
  Image img(static_cast<int>(w), static_cast<int>(h), channels);
  for (png_uint_32 y = 0; y < h; ++y) {
    png_read_row(r.png, row.data(), nullptr);
    for (png_uint_32 x = 0; x < w; ++x)
      for (int c = 0; c < channels; ++c)
        img.at(static_cast<int>(x), static_cast<int>(y), c) =
            row[x * channels + c] / 255.0;
  }
  return img;
}

}  // namespace

void write_png(const std::filesystem::path& path, const Image& img) {
  if (img.channels != 1 && img.channels != 3)
    throw IoError("write_png supports 1 or 3 channels");
  const int color_type =
      img.channels == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB;
  std::vector<std::vector<uint8_t>> rows(img.height);
  for (int y = 0; y < img.height; ++y) {
    rows[y].resize(static_cast<size_t>(img.width) * img.channels);
    for (int x = 0; x < img.width; ++x)
      for (int c = 0; c < img.channels; ++c)
        rows[y][x * img.channels + c] = to_u8(img.at(x, y, c));
  }
  write_png_impl(path, img.width, img.height, color_type, 8, rows);
}

Image read_png(const std::filesystem::path& path) { return read_png_as(path); }

void write_mask_png(const std::filesystem::path& path, const BinaryMask& m) {
  std::vector<std::vector<uint8_t>> rows(m.height);
  for (int y = 0; y < m.height; ++y) {
    rows[y].resize(m.width);
    for (int x = 0; x < m.width; ++x) rows[y][x] = m.at(x, y) ? 255 : 0;
  }
  write_png_impl(path, m.width, m.height, PNG_COLOR_TYPE_GRAY, 8, rows);
}

BinaryMask read_mask_png(const std::filesystem::path& path) {
  Image img = read_png_as(path);
  BinaryMask m(img.width, img.height);
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x)
      m.at(x, y) = img.at(x, y, 0) > 0.5 ? 1 : 0;
  return m;
}

void write_png16(const std::filesystem::path& path, const Image& img) {
  if (img.channels != 1) throw IoError("write_png16 expects 1 channel");
  std::vector<std::vector<uint8_t>> rows(img.height);
  for (int y = 0; y < img.height; ++y) {
    rows[y].resize(static_cast<size_t>(img.width) * 2);
    for (int x = 0; x < img.width; ++x) {
      const double v = std::clamp(img.at(x, y), 0.0, 1.0);
      const auto q = static_cast<uint16_t>(std::lround(v * 65535.0));
      rows[y][2 * x] = static_cast<uint8_t>(q >> 8);  // PNG is big-endian
      rows[y][2 * x + 1] = static_cast<uint8_t>(q & 0xff);
    }
  }
  write_png_impl(path, img.width, img.height, PNG_COLOR_TYPE_GRAY, 16, rows);
}

namespace {

constexpr float kFloMagic = 202021.25f;

void put_f32_le(std::FILE* f, float v) {
  static_assert(std::endian::native == std::endian::little);
  std::fwrite(&v, sizeof(float), 1, f);
}

void put_i32_le(std::FILE* f, int32_t v) { std::fwrite(&v, sizeof(int32_t), 1, f); }

}  // namespace

void write_flo(const std::filesystem::path& path, const FlowField& flow) {
  auto f = open_file(path, "wb");
  put_f32_le(f.get(), kFloMagic);
  put_i32_le(f.get(), flow.width);
  put_i32_le(f.get(), flow.height);
  for (int y = 0; y < flow.height; ++y)
    for (int x = 0; x < flow.width; ++x) {
      put_f32_le(f.get(), static_cast<float>(flow.u[flow.idx(x, y)]));
      put_f32_le(f.get(), static_cast<float>(flow.v[flow.idx(x, y)]));
    }
  if (std::ferror(f.get())) throw IoError("flo write failed: " + path.string());
}

FlowField read_flo(const std::filesystem::path& path) {
  auto f = open_file(path, "rb");
  float magic = 0;
  int32_t w = 0, h = 0;
  if (std::fread(&magic, 4, 1, f.get()) != 1 || magic != kFloMagic)
    throw IoError("not a .flo file: " + path.string());
  if (std::fread(&w, 4, 1, f.get()) != 1 || std::fread(&h, 4, 1, f.get()) != 1 ||
      w <= 0 || h <= 0)
    throw IoError("bad .flo header: " + path.string());
  FlowField flow(w, h);
  std::vector<float> row(static_cast<size_t>(w) * 2);
  for (int y = 0; y < h; ++y) {
    if (std::fread(row.data(), sizeof(float), row.size(), f.get()) != row.size())
      throw IoError("truncated .flo file: " + path.string());
    for (int x = 0; x < w; ++x) {
      flow.u[flow.idx(x, y)] = row[2 * x];
      flow.v[flow.idx(x, y)] = row[2 * x + 1];
    }
  }
  return flow;
}

}  // namespace mseg
