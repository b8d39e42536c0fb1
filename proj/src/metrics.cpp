#include "sci3d/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace sci3d {

namespace {

constexpr int kWindow = 11;
constexpr double kSigma = 1.5;
constexpr double kK1 = 0.01;
constexpr double kK2 = 0.03;

double clamp01(double v) { return std::min(1.0, std::max(0.0, v)); }

std::vector<double> gaussian_kernel() {
  std::vector<double> k(kWindow);
  const int half = kWindow / 2;
  double sum = 0.0;
  for (int i = 0; i < kWindow; ++i) {
    const double d = i - half;
    k[i] = std::exp(-d * d / (2.0 * kSigma * kSigma));
    sum += k[i];
  }
  for (double& v : k) v /= sum;
  return k;
}

/// Separable valid-mode Gaussian filter of one channel; output is
/// (H-10) x (W-10).
std::vector<double> filter_valid(const std::vector<double>& src, int h, int w,
                                 const std::vector<double>& kernel, int& oh, int& ow) {
  const int half = kWindow / 2;
  ow = w - 2 * half;
  oh = h - 2 * half;
  std::vector<double> rows(static_cast<std::size_t>(h) * ow);
  for (int r = 0; r < h; ++r)
    for (int c = 0; c < ow; ++c) {
      double acc = 0.0;
      for (int i = 0; i < kWindow; ++i) acc += kernel[i] * src[r * w + c + i];
      rows[r * ow + c] = acc;
    }
  std::vector<double> out(static_cast<std::size_t>(oh) * ow);
  for (int r = 0; r < oh; ++r)
    for (int c = 0; c < ow; ++c) {
      double acc = 0.0;
      for (int i = 0; i < kWindow; ++i) acc += kernel[i] * rows[(r + i) * ow + c];
      out[r * ow + c] = acc;
    }
  return out;
}

}  // namespace

double psnr(const Image& reference, const Image& candidate) {
  require_same_shape(reference, candidate, "psnr");
  double se = 0.0;
  for (std::size_t i = 0; i < reference.size(); ++i) {
    const double d = clamp01(reference.data[i]) - clamp01(candidate.data[i]);
    se += d * d;
  }
  const double mse = se / static_cast<double>(reference.size());
  if (mse == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(1.0 / mse);
}

double ssim(const Image& reference, const Image& candidate) {
  require_same_shape(reference, candidate, "ssim");
  if (std::min(reference.height, reference.width) < kWindow)
    throw ImageTooSmall("ssim: images must be at least 11x11");

  const double c1 = kK1 * kK1;
  const double c2 = kK2 * kK2;
  const std::vector<double> kernel = gaussian_kernel();
  const int h = reference.height, w = reference.width;
  const std::size_t plane = static_cast<std::size_t>(h) * w;

  std::vector<double> x(plane), y(plane), xx(plane), yy(plane), xy(plane);
  double total = 0.0;
  for (int ch = 0; ch < reference.channels; ++ch) {
    for (int r = 0; r < h; ++r)
      for (int c = 0; c < w; ++c) {
        const double a = clamp01(reference.at(r, c, ch));
        const double b = clamp01(candidate.at(r, c, ch));
        const std::size_t i = static_cast<std::size_t>(r) * w + c;
        x[i] = a;
        y[i] = b;
        xx[i] = a * a;
        yy[i] = b * b;
        xy[i] = a * b;
      }
    int oh = 0, ow = 0;
    const auto mu_x = filter_valid(x, h, w, kernel, oh, ow);
    const auto mu_y = filter_valid(y, h, w, kernel, oh, ow);
    const auto m_xx = filter_valid(xx, h, w, kernel, oh, ow);
    const auto m_yy = filter_valid(yy, h, w, kernel, oh, ow);
    const auto m_xy = filter_valid(xy, h, w, kernel, oh, ow);

    double acc = 0.0;
    for (std::size_t i = 0; i < mu_x.size(); ++i) {
      const double var_x = m_xx[i] - mu_x[i] * mu_x[i];
      const double var_y = m_yy[i] - mu_y[i] * mu_y[i];
      const double cov = m_xy[i] - mu_x[i] * mu_y[i];
      const double num = (2.0 * mu_x[i] * mu_y[i] + c1) * (2.0 * cov + c2);
      const double den = (mu_x[i] * mu_x[i] + mu_y[i] * mu_y[i] + c1) * (var_x + var_y + c2);
      acc += num / den;
    }
    total += acc / static_cast<double>(mu_x.size());
  }
  return total / reference.channels;
}

EvalReport evaluate_frames(const std::vector<Image>& reference,
                           const std::vector<Image>& candidate) {
  if (reference.size() != candidate.size())
    throw DimensionMismatch("evaluate_frames: frame counts differ");
  EvalReport report;
  for (std::size_t i = 0; i < reference.size(); ++i) {
    FrameMetrics m;
    m.frame = static_cast<int>(i);
    m.psnr_db = psnr(reference[i], candidate[i]);
    m.ssim = ssim(reference[i], candidate[i]);
    report.frames.push_back(m);
    report.mean_psnr += m.psnr_db;
    report.mean_ssim += m.ssim;
  }
  if (!report.frames.empty()) {
    report.mean_psnr /= static_cast<double>(report.frames.size());
    report.mean_ssim /= static_cast<double>(report.frames.size());
  }
  return report;
}

}  // namespace sci3d
