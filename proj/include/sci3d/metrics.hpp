#pragma once

#include <vector>

#include "sci3d/image.hpp"

namespace sci3d {

/// Peak signal-to-noise ratio in dB over all pixels and channels, dynamic
/// range 1.0 (inputs are clamped to [0,1] first). Identical images return
/// +infinity.
double psnr(const Image& reference, const Image& candidate);

/// Single-scale SSIM: 11x11 Gaussian window (sigma 1.5), K1 = 0.01,
/// K2 = 0.03, dynamic range 1.0; mean over all valid windows and channels.
/// Throws ImageTooSmall when min(H, W) < 11.
double ssim(const Image& reference, const Image& candidate);

struct FrameMetrics {
  int frame = 0;
  double psnr_db = 0.0;
  double ssim = 0.0;
};

/// Per-frame metrics plus their mean (mean PSNR over frames; an infinite
/// frame PSNR makes the mean infinite).
struct EvalReport {
  std::vector<FrameMetrics> frames;
  double mean_psnr = 0.0;
  double mean_ssim = 0.0;
};

EvalReport evaluate_frames(const std::vector<Image>& reference,
                           const std::vector<Image>& candidate);

}  // namespace sci3d
