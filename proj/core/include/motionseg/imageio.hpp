#pragma once

#include <filesystem>
#include <string>

#include "motionseg/types.hpp"

namespace mseg {

// 8-bit PNG. 1-channel images are written as grayscale, 3-channel as RGB.
// Values are clamped to [0,1] and scaled to [0,255].
void write_png(const std::filesystem::path& path, const Image& img);
Image read_png(const std::filesystem::path& path);

// Masks: foreground=255, background=0. Readers treat any nonzero as foreground.
void write_mask_png(const std::filesystem::path& path, const BinaryMask& m);
BinaryMask read_mask_png(const std::filesystem::path& path);

// 16-bit grayscale export (value * 65535), used for local-IoU map inspection.
void write_png16(const std::filesystem::path& path, const Image& img);

// Middlebury .flo: magic float 202021.25, int32 width, int32 height,
// interleaved little-endian float32 (u,v), row-major.
void write_flo(const std::filesystem::path& path, const FlowField& flow);
FlowField read_flo(const std::filesystem::path& path);

}  // namespace mseg
