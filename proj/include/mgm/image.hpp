#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace mgm {

// 8-bit PGM/PPM image decoded to floats in [0,1], row-major h×w×c.
struct Image {
  int height = 0;
  int width = 0;
  int channels = 0;  // 1 = grayscale, 3 = RGB
  std::vector<float> pixels;

  float& at(int y, int x, int c) {
    return pixels[(static_cast<std::size_t>(y) * width + x) * channels + c];
  }
  float at(int y, int x, int c) const {
    return pixels[(static_cast<std::size_t>(y) * width + x) * channels + c];
  }
  std::size_t numel() const { return pixels.size(); }
};

Image make_image(int height, int width, int channels, float fill = 0.0f);

// Binary PGM (P5) or PPM (P6), chosen by the file's magic. maxval up to 255.
Image read_image(const std::string& path);

// Writes P5 for 1-channel, P6 for 3-channel images; values clamped to [0,1].
void write_image(const std::string& path, const Image& img);

}  // namespace mgm
