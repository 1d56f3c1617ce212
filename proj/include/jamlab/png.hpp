#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace jamlab {

// Minimal 8-bit RGB PNG codec backed by zlib. The encoder always emits
// filter type 0 with a fixed compression level so output bytes are
// reproducible; the decoder handles all five standard filter types.
struct RgbImage {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> pixels;  // row-major, 3 bytes per pixel
};

std::vector<std::uint8_t> png_encode(const RgbImage& img);
RgbImage png_decode(const std::vector<std::uint8_t>& bytes);

void write_png_file(const std::string& path, const RgbImage& img);
RgbImage read_png_file(const std::string& path);

}  // namespace jamlab
