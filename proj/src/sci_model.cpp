#include "sci3d/sci_model.hpp"

#include <algorithm>
#include <cmath>

#include "sci3d/rng.hpp"

namespace sci3d {

void MaskStack::check_pixel(int row, int col) const {
  if (row < 0 || row >= height || col < 0 || col >= width)
    throw PixelOutOfBounds("mask stack: pixel (" + std::to_string(row) + ", " +
                           std::to_string(col) + ") outside " + std::to_string(height) + "x" +
                           std::to_string(width));
}

MaskStack generate_masks(int height, int width, int n, double overlapping_rate, uint64_t seed,
                         MaskMode mode) {
  if (height < 1 || width < 1 || n < 1)
    throw Error("generate_masks: dimensions and mask count must be positive");
  if (!(overlapping_rate > 0.0 && overlapping_rate <= 1.0))
    throw Error("generate_masks: overlapping rate must be in (0, 1]");

  MaskStack stack;
  stack.n = n;
  stack.height = height;
  stack.width = width;
  stack.seed = seed;
  stack.target_or = overlapping_rate;
  stack.bits.assign(static_cast<std::size_t>(n) * height * width, 0);

  Rng rng(hash_mix(seed, 0x6d61736bull));  // "mask"

  if (mode == MaskMode::Bernoulli) {
    for (int i = 0; i < n; ++i)
      for (int row = 0; row < height; ++row)
        for (int col = 0; col < width; ++col)
          stack.bits[stack.index(i, row, col)] = rng.uniform() < overlapping_rate ? 1 : 0;
    return stack;
  }

  const double exact = overlapping_rate * n;
  const int k = static_cast<int>(std::lround(exact));
  if (k < 1 || std::abs(exact - k) > 1e-9)
    throw NonIntegerOnesCount("generate_masks: or*N = " + std::to_string(exact) +
                              " is not a positive integer");

  // Per pixel, choose k of the n masks uniformly: partial Fisher-Yates over
  // the mask indices.
  std::vector<int> pool(n);
  for (int row = 0; row < height; ++row) {
    for (int col = 0; col < width; ++col) {
      for (int i = 0; i < n; ++i) pool[i] = i;
      for (int pick = 0; pick < k; ++pick) {
        const int j = pick + static_cast<int>(rng.uniform_below(n - pick));
        std::swap(pool[pick], pool[j]);
        stack.bits[stack.index(pool[pick], row, col)] = 1;
      }
    }
  }
  return stack;
}

double overlapping_rate(const MaskStack& stack, int row, int col) {
  stack.check_pixel(row, col);
  return static_cast<double>(stack.ones_count(row, col)) / stack.n;
}

Measurement encode_measurement(const std::vector<Image>& frames, const MaskStack& stack,
                               double noise_sigma, uint64_t noise_seed) {
  if (static_cast<int>(frames.size()) != stack.n)
    throw DimensionMismatch("encode_measurement: frame count " + std::to_string(frames.size()) +
                            " != mask count " + std::to_string(stack.n));
  if (noise_sigma < 0.0) throw Error("encode_measurement: noise sigma must be >= 0");
  for (const Image& f : frames) {
    if (f.height != stack.height || f.width != stack.width)
      throw DimensionMismatch("encode_measurement: frame dims do not match masks");
    if (f.channels != frames.front().channels)
      throw DimensionMismatch("encode_measurement: frames have mixed channel counts");
  }

  const int channels = frames.front().channels;
  Measurement m(stack.height, stack.width, channels);
  m.noise_sigma = noise_sigma;

  for (int row = 0; row < stack.height; ++row) {
    for (int col = 0; col < stack.width; ++col) {
      for (int ch = 0; ch < channels; ++ch) {
        double acc = 0.0;
        for (int i = 0; i < stack.n; ++i)
          if (stack.at(i, row, col)) acc += frames[i].at(row, col, ch);
        m.at(row, col, ch) = acc;
      }
    }
  }

  if (noise_sigma > 0.0) {
    Rng rng(hash_mix(noise_seed, 0x6e6f697365ull));  // "noise"
    for (double& v : m.pixels) v = std::max(0.0, v + noise_sigma * rng.normal());
  }
  return m;
}

SciLossResult sci_loss(const Measurement& measurement, const MaskStack& stack,
                       const std::vector<PixelCoord>& rays,
                       const std::vector<std::vector<RenderedFrameValue>>& rendered,
                       bool normalize_by_k) {
  if (rays.size() != rendered.size())
    throw DimensionMismatch("sci_loss: ray and rendered batch sizes differ");
  if (measurement.height != stack.height || measurement.width != stack.width)
    throw DimensionMismatch("sci_loss: measurement dims do not match masks");
  const int channels = measurement.channels;
  if (channels != 1 && channels != 3)
    throw DimensionMismatch("sci_loss: measurement must have 1 or 3 channels");

  SciLossResult result;
  result.d_rendered.resize(rendered.size());

  for (std::size_t r = 0; r < rays.size(); ++r) {
    const PixelCoord px = rays[r];
    stack.check_pixel(px.row, px.col);

    double scale = 1.0;
    if (normalize_by_k) {
      const int k = stack.ones_count(px.row, px.col);
      if (k > 0) scale = 1.0 / k;
    }

    Eigen::Vector3d synthesized = Eigen::Vector3d::Zero();
    for (const RenderedFrameValue& v : rendered[r]) {
      if (v.frame < 0 || v.frame >= stack.n)
        throw DimensionMismatch("sci_loss: frame index out of range");
      if (stack.at(v.frame, px.row, px.col)) synthesized += v.color;
    }

    result.d_rendered[r].resize(rendered[r].size(), Eigen::Vector3d::Zero());

    if (channels == 3) {
      Eigen::Vector3d target;
      for (int ch = 0; ch < 3; ++ch) target[ch] = measurement.at(px.row, px.col, ch);
      const Eigen::Vector3d residual = scale * (target - synthesized);
      result.loss += residual.squaredNorm();
      for (std::size_t i = 0; i < rendered[r].size(); ++i) {
        const RenderedFrameValue& v = rendered[r][i];
        if (stack.at(v.frame, px.row, px.col))
          result.d_rendered[r][i] = -2.0 * scale * residual;
      }
    } else {
      // Mono sensor: responds to the channel mean of the rendered frames.
      const double target = measurement.at(px.row, px.col, 0);
      const double residual = scale * (target - synthesized.mean());
      result.loss += residual * residual;
      for (std::size_t i = 0; i < rendered[r].size(); ++i) {
        const RenderedFrameValue& v = rendered[r][i];
        if (stack.at(v.frame, px.row, px.col))
          result.d_rendered[r][i] = Eigen::Vector3d::Constant(-2.0 * scale * residual / 3.0);
      }
    }
  }
  return result;
}

}  // namespace sci3d
