#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <vector>

#include "sci3d/image.hpp"

namespace sci3d {

enum class MaskMode {
  ExactCount,  // exactly or*N ones per pixel (requires or*N integer)
  Bernoulli    // each entry iid Bernoulli(or); for sensitivity experiments
};

/// N binary H x W modulation masks, stored mask-major, row-major each.
struct MaskStack {
  int n = 0;
  int height = 0;
  int width = 0;
  uint64_t seed = 0;
  double target_or = 1.0;  // overlapping rate in (0, 1]
  std::vector<uint8_t> bits;

  std::size_t index(int mask, int row, int col) const {
    return (static_cast<std::size_t>(mask) * height + row) * width + col;
  }
  uint8_t at(int mask, int row, int col) const { return bits[index(mask, row, col)]; }

  /// Number of masks equal to 1 at a pixel.
  int ones_count(int row, int col) const {
    int k = 0;
    for (int i = 0; i < n; ++i) k += at(i, row, col);
    return k;
  }
  void check_pixel(int row, int col) const;
};

/// Single compressed measurement, in frame units (values may reach k <= N).
/// Kept in double precision in memory so that a noiseless encode reproduces
/// the masked frame sums bit-exactly; the file format stores f32.
struct Measurement {
  int height = 0;
  int width = 0;
  int channels = 0;          // 1 or 3
  std::vector<double> pixels;
  double noise_sigma = 0.0;  // sigma used at formation time

  Measurement() = default;
  Measurement(int h, int w, int c)
      : height(h), width(w), channels(c),
        pixels(static_cast<std::size_t>(h) * w * c, 0.0) {}

  std::size_t index(int row, int col, int ch) const {
    return (static_cast<std::size_t>(row) * width + col) * channels + ch;
  }
  double& at(int row, int col, int ch) { return pixels[index(row, col, ch)]; }
  double at(int row, int col, int ch) const { return pixels[index(row, col, ch)]; }
};

/// Random mask stack with the configured overlapping rate. In ExactCount
/// mode every pixel has exactly or*N ones (a seeded per-pixel draw of which
/// masks fire); throws NonIntegerOnesCount when or*N is not a positive
/// integer. Bernoulli mode draws each bit independently with probability or.
MaskStack generate_masks(int height, int width, int n, double overlapping_rate, uint64_t seed,
                         MaskMode mode = MaskMode::ExactCount);

/// Per-pixel overlapping rate: sum_i M_i(x,y) / N.
double overlapping_rate(const MaskStack& stack, int row, int col);

/// Forms the measurement Y = sum_i X_i (.) M_i + Z with the same binary mask
/// applied to every color channel. Z is iid Gaussian(0, sigma^2) drawn from
/// noise_seed; the result is clamped at 0.
Measurement encode_measurement(const std::vector<Image>& frames, const MaskStack& stack,
                               double noise_sigma, uint64_t noise_seed = 0);

struct PixelCoord {
  int row = 0;
  int col = 0;
};

/// One rendered frame value for a ray. Frames with a zero mask bit may be
/// omitted by the caller; they contribute neither loss nor gradient.
struct RenderedFrameValue {
  int frame = 0;
  Eigen::Vector3d color = Eigen::Vector3d::Zero();
};

struct SciLossResult {
  double loss = 0.0;
  /// d(loss)/d(rendered color), same shape as the rendered input.
  std::vector<std::vector<Eigen::Vector3d>> d_rendered;
};

/// Photometric loss against the measurement over a batch of rays:
/// L = sum_r || Y(r) - sum_i M(r,i) C(r,i) ||^2, summed over channels, with
/// d L / d C(r,i) = -2 M(r,i) (Y(r) - sum_j M(r,j) C(r,j)).
/// When normalize_by_k is set, both the measurement and the masked sum are
/// divided by the per-pixel ones count (rescales L by 1/k^2 only).
SciLossResult sci_loss(const Measurement& measurement, const MaskStack& stack,
                       const std::vector<PixelCoord>& rays,
                       const std::vector<std::vector<RenderedFrameValue>>& rendered,
                       bool normalize_by_k = false);

}  // namespace sci3d
