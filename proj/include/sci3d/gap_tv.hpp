#pragma once

#include <vector>

#include "sci3d/image.hpp"
#include "sci3d/sci_model.hpp"

namespace sci3d {

struct GapTvConfig {
  int outer_iterations = 60;
  int tv_iterations = 20;       // Chambolle dual-projection steps per denoise
  double tv_weight = 0.1;
  double tv_weight_decay = 0.98;  // per outer iteration
  bool acceleration = false;      // accelerated GAP measurement update

  void validate() const;
};

struct GapTvResult {
  std::vector<Image> frames;       // N recovered frames, clamped to [0,1]
  std::vector<double> objective;   // 1/2 ||X - V||^2 + lambda * TV(V) per outer iteration
};

/// Isotropic total-variation denoising via Chambolle's dual projection:
/// approximate minimizer of 1/2 ||u - f||^2 + weight * TV(u). Channels are
/// treated independently.
Image tv_denoise(const Image& image, double weight, int iterations);

/// Discrete isotropic total variation (forward differences), summed over
/// channels. Exposed for tests and the GAP objective.
double total_variation(const Image& image);

/// Generalized alternating projection with TV regularization: alternates a
/// closed-form per-pixel Euclidean projection onto {X : sum_i M_i (.) X_i = Y}
/// with per-frame TV denoising. Throws ZeroMaskPixel if any pixel is never
/// sampled by a mask.
GapTvResult gap_tv_decode(const Measurement& measurement, const MaskStack& stack,
                          const GapTvConfig& cfg);

}  // namespace sci3d
