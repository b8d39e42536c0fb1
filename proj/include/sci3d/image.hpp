#pragma once

#include <cstddef>
#include <vector>

#include "sci3d/errors.hpp"

namespace sci3d {

/// Dense H x W x C image, row-major with interleaved channels, f32 storage.
/// Pixel values are nominally in [0,1] for frames; measurements may exceed 1.
struct Image {
  int height = 0;
  int width = 0;
  int channels = 0;
  std::vector<float> data;

  Image() = default;
  Image(int h, int w, int c, float fill = 0.0f)
      : height(h), width(w), channels(c),
        data(static_cast<std::size_t>(h) * w * c, fill) {}

  std::size_t index(int row, int col, int ch) const {
    return (static_cast<std::size_t>(row) * width + col) * channels + ch;
  }
  float& at(int row, int col, int ch) { return data[index(row, col, ch)]; }
  float at(int row, int col, int ch) const { return data[index(row, col, ch)]; }

  bool same_shape(const Image& other) const {
    return height == other.height && width == other.width && channels == other.channels;
  }
  std::size_t size() const { return data.size(); }
};

inline void require_same_shape(const Image& a, const Image& b, const char* what) {
  if (!a.same_shape(b))
    throw DimensionMismatch(std::string(what) + ": image shapes differ");
}

}  // namespace sci3d
