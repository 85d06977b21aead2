#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace clenet {

struct GrayImage {
  int64_t height = 0;
  int64_t width = 0;
  std::vector<uint8_t> pixels;  // row-major, height*width

  uint8_t at(int64_t y, int64_t x) const {
    return pixels[size_t(y * width + x)];
  }
};

// 8-bit grayscale PNG, fixed encoder settings so identical pixels produce
// identical bytes.
void write_png_gray8(const std::string& path, const GrayImage& img);
GrayImage read_png_gray8(const std::string& path);

}  // namespace clenet
