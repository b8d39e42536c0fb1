#include "sci3d/gap_tv.hpp"

#include <algorithm>
#include <cmath>

namespace sci3d {

namespace {

constexpr double kDualStep = 0.25;

/// Chambolle dual projection on one channel plane (doubles, row-major).
/// Gradients use forward differences with Neumann boundaries; the divergence
/// below is the negative adjoint.
void chambolle_plane(const std::vector<double>& f, std::vector<double>& u, int h, int w,
                     double lambda, int iterations) {
  const std::size_t n = f.size();
  std::vector<double> px(n, 0.0), py(n, 0.0), div(n, 0.0);

  auto divergence = [&]() {
    for (int r = 0; r < h; ++r)
      for (int c = 0; c < w; ++c) {
        const std::size_t i = static_cast<std::size_t>(r) * w + c;
        double d = 0.0;
        if (c < w - 1) d += px[i];
        if (c > 0) d -= px[i - 1];
        if (r < h - 1) d += py[i];
        if (r > 0) d -= py[i - static_cast<std::size_t>(w)];
        div[i] = d;
      }
  };

  for (int it = 0; it < iterations; ++it) {
    divergence();
    for (int r = 0; r < h; ++r)
      for (int c = 0; c < w; ++c) {
        const std::size_t i = static_cast<std::size_t>(r) * w + c;
        // gradient of (div p - f/lambda)
        const double center = div[i] - f[i] / lambda;
        const double gx = c < w - 1 ? (div[i + 1] - f[i + 1] / lambda) - center : 0.0;
        const double gy = r < h - 1 ? (div[i + w] - f[i + w] / lambda) - center : 0.0;
        const double nx = px[i] + kDualStep * gx;
        const double ny = py[i] + kDualStep * gy;
        const double mag = 1.0 + kDualStep * std::sqrt(gx * gx + gy * gy);
        px[i] = nx / mag;
        py[i] = ny / mag;
      }
  }
  divergence();
  for (std::size_t i = 0; i < n; ++i) u[i] = f[i] - lambda * div[i];
}

}  // namespace

void GapTvConfig::validate() const {
  if (outer_iterations < 1 || tv_iterations < 1)
    throw Error("gap-tv: iteration counts must be >= 1");
  if (!(tv_weight > 0.0)) throw Error("gap-tv: tv_weight must be > 0");
  if (!(tv_weight_decay > 0.0 && tv_weight_decay <= 1.0))
    throw Error("gap-tv: tv_weight_decay must be in (0, 1]");
}

Image tv_denoise(const Image& image, double weight, int iterations) {
  if (!(weight > 0.0)) throw Error("tv_denoise: weight must be > 0");
  const int h = image.height, w = image.width;
  const std::size_t plane = static_cast<std::size_t>(h) * w;
  Image out(h, w, image.channels);
  std::vector<double> f(plane), u(plane);
  for (int ch = 0; ch < image.channels; ++ch) {
    for (int r = 0; r < h; ++r)
      for (int c = 0; c < w; ++c) f[static_cast<std::size_t>(r) * w + c] = image.at(r, c, ch);
    chambolle_plane(f, u, h, w, weight, iterations);
    for (int r = 0; r < h; ++r)
      for (int c = 0; c < w; ++c)
        out.at(r, c, ch) = static_cast<float>(u[static_cast<std::size_t>(r) * w + c]);
  }
  return out;
}

double total_variation(const Image& image) {
  double tv = 0.0;
  for (int ch = 0; ch < image.channels; ++ch)
    for (int r = 0; r < image.height; ++r)
      for (int c = 0; c < image.width; ++c) {
        const double v = image.at(r, c, ch);
        const double dx = c < image.width - 1 ? image.at(r, c + 1, ch) - v : 0.0;
        const double dy = r < image.height - 1 ? image.at(r + 1, c, ch) - v : 0.0;
        tv += std::sqrt(dx * dx + dy * dy);
      }
  return tv;
}

GapTvResult gap_tv_decode(const Measurement& measurement, const MaskStack& stack,
                          const GapTvConfig& cfg) {
  cfg.validate();
  const Measurement& y = measurement;
  if (y.height != stack.height || y.width != stack.width)
    throw DimensionMismatch("gap_tv_decode: measurement dims do not match masks");

  const int n = stack.n, h = stack.height, w = stack.width, channels = y.channels;

  std::vector<int> ones(static_cast<std::size_t>(h) * w, 0);
  for (int r = 0; r < h; ++r)
    for (int c = 0; c < w; ++c) {
      const int k = stack.ones_count(r, c);
      if (k == 0)
        throw ZeroMaskPixel("gap_tv_decode: pixel (" + std::to_string(r) + ", " +
                            std::to_string(c) + ") is never sampled");
      ones[static_cast<std::size_t>(r) * w + c] = k;
    }

  // V: denoised estimate, X: measurement-consistent projection of V.
  std::vector<Image> v(n, Image(h, w, channels));
  std::vector<Image> x(n, Image(h, w, channels));
  Measurement y_work = y;  // accelerated GAP updates this running measurement

  // init: spread the measurement over its contributing frames
  for (int i = 0; i < n; ++i)
    for (int r = 0; r < h; ++r)
      for (int c = 0; c < w; ++c)
        if (stack.at(i, r, c))
          for (int ch = 0; ch < channels; ++ch)
            v[i].at(r, c, ch) = static_cast<float>(
                y.at(r, c, ch) / ones[static_cast<std::size_t>(r) * w + c]);

  GapTvResult result;
  double lambda = cfg.tv_weight;

  for (int outer = 0; outer < cfg.outer_iterations; ++outer) {
    // Projection onto {sum_i M_i (.) X_i = Y}: the per-pixel normal system
    // is diagonal with entry k = sum_i M_i^2, so the residual is spread
    // equally over the sampled frames.
    for (int r = 0; r < h; ++r)
      for (int c = 0; c < w; ++c) {
        const int k = ones[static_cast<std::size_t>(r) * w + c];
        for (int ch = 0; ch < channels; ++ch) {
          double sum = 0.0;
          for (int i = 0; i < n; ++i)
            if (stack.at(i, r, c)) sum += v[i].at(r, c, ch);
          const double residual = (y_work.at(r, c, ch) - sum) / k;
          for (int i = 0; i < n; ++i)
            x[i].at(r, c, ch) =
                stack.at(i, r, c) ? static_cast<float>(v[i].at(r, c, ch) + residual)
                                  : v[i].at(r, c, ch);
        }
      }

    if (cfg.acceleration) {
      // accelerated GAP: y_work <- y_work + (y - A(x))
      for (int r = 0; r < h; ++r)
        for (int c = 0; c < w; ++c)
          for (int ch = 0; ch < channels; ++ch) {
            double ax = 0.0;
            for (int i = 0; i < n; ++i)
              if (stack.at(i, r, c)) ax += x[i].at(r, c, ch);
            y_work.at(r, c, ch) += y.at(r, c, ch) - ax;
          }
    }

    for (int i = 0; i < n; ++i) v[i] = tv_denoise(x[i], lambda, cfg.tv_iterations);

    double objective = 0.0;
    for (int i = 0; i < n; ++i) {
      for (std::size_t idx = 0; idx < x[i].data.size(); ++idx) {
        const double d = x[i].data[idx] - v[i].data[idx];
        objective += 0.5 * d * d;
      }
      objective += lambda * total_variation(v[i]);
    }
    result.objective.push_back(objective);

    lambda *= cfg.tv_weight_decay;
  }

  // Final measurement-consistent projection, clamped for output.
  result.frames.assign(n, Image(h, w, channels));
  for (int r = 0; r < h; ++r)
    for (int c = 0; c < w; ++c) {
      const int k = ones[static_cast<std::size_t>(r) * w + c];
      for (int ch = 0; ch < channels; ++ch) {
        double sum = 0.0;
        for (int i = 0; i < n; ++i)
          if (stack.at(i, r, c)) sum += v[i].at(r, c, ch);
        const double residual = (y.at(r, c, ch) - sum) / k;
        for (int i = 0; i < n; ++i) {
          const double val =
              stack.at(i, r, c) ? v[i].at(r, c, ch) + residual : v[i].at(r, c, ch);
          result.frames[i].at(r, c, ch) = static_cast<float>(std::clamp(val, 0.0, 1.0));
        }
      }
    }
  return result;
}

}  // namespace sci3d
