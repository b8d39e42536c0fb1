#include "sci3d/radiance_grid.hpp"

#include <algorithm>
#include <cmath>

#include "sci3d/parallel.hpp"
#include "sci3d/rng.hpp"

namespace sci3d {

namespace {

constexpr double kSh0 = 0.28209479177387814;
constexpr double kSh1 = 0.48860251190291987;
constexpr double kSh2a = 1.0925484305920792;
constexpr double kSh2b = 0.31539156525252005;
constexpr double kSh2c = 0.5462742152960396;

/// Trilinear interpolation stencil at a point: 8 (possibly duplicated,
/// clamped-to-edge) corner voxels with weights and weight gradients.
struct Stencil {
  std::size_t corner[8];
  double w[8];
  Eigen::Vector3d dw[8];
  bool inside = false;
};

Stencil make_stencil(const RadianceGrid& grid, const Eigen::Vector3d& p, bool with_grad) {
  Stencil st;
  for (int a = 0; a < 3; ++a) {
    if (p[a] < grid.bbox_min[a] || p[a] > grid.bbox_max[a]) return st;
  }
  st.inside = true;

  const Eigen::Vector3d h = grid.voxel_size();
  int i0[3], i1[3];
  double f[3], inv_h[3];
  for (int a = 0; a < 3; ++a) {
    const double u = (p[a] - grid.bbox_min[a]) / h[a] - 0.5;
    double base = std::floor(u);
    f[a] = u - base;
    const int n = grid.resolution[a];
    i0[a] = std::clamp(static_cast<int>(base), 0, n - 1);
    i1[a] = std::clamp(static_cast<int>(base) + 1, 0, n - 1);
    inv_h[a] = 1.0 / h[a];
  }
  for (int c = 0; c < 8; ++c) {
    const int bx = c & 1, by = (c >> 1) & 1, bz = (c >> 2) & 1;
    const double wx = bx ? f[0] : 1.0 - f[0];
    const double wy = by ? f[1] : 1.0 - f[1];
    const double wz = bz ? f[2] : 1.0 - f[2];
    st.corner[c] = grid.voxel_index(bx ? i1[0] : i0[0], by ? i1[1] : i0[1], bz ? i1[2] : i0[2]);
    st.w[c] = wx * wy * wz;
    if (with_grad) {
      st.dw[c] = Eigen::Vector3d((bx ? 1.0 : -1.0) * wy * wz * inv_h[0],
                                 (by ? 1.0 : -1.0) * wx * wz * inv_h[1],
                                 (bz ? 1.0 : -1.0) * wx * wy * inv_h[2]);
    }
  }
  return st;
}

double sample_t(const SamplingConfig& cfg, uint64_t jitter_key, int j, double dt) {
  const double u = cfg.stratified ? hashed_uniform(jitter_key, static_cast<uint64_t>(j)) : 0.5;
  return cfg.t_near + (j + u) * dt;
}

}  // namespace

void eval_sh_basis(int degree, const Eigen::Vector3d& dir, double* out) {
  out[0] = kSh0;
  if (degree < 1) return;
  const double x = dir.x(), y = dir.y(), z = dir.z();
  out[1] = -kSh1 * y;
  out[2] = kSh1 * z;
  out[3] = -kSh1 * x;
  if (degree < 2) return;
  out[4] = kSh2a * x * y;
  out[5] = -kSh2a * y * z;
  out[6] = kSh2b * (2.0 * z * z - x * x - y * y);
  out[7] = -kSh2a * x * z;
  out[8] = kSh2c * (x * x - y * y);
}

void eval_sh_basis_grad(int degree, const Eigen::Vector3d& dir, double* basis,
                        Eigen::Vector3d* grad) {
  eval_sh_basis(degree, dir, basis);
  grad[0].setZero();
  if (degree < 1) return;
  const double x = dir.x(), y = dir.y(), z = dir.z();
  grad[1] = Eigen::Vector3d(0.0, -kSh1, 0.0);
  grad[2] = Eigen::Vector3d(0.0, 0.0, kSh1);
  grad[3] = Eigen::Vector3d(-kSh1, 0.0, 0.0);
  if (degree < 2) return;
  grad[4] = Eigen::Vector3d(kSh2a * y, kSh2a * x, 0.0);
  grad[5] = Eigen::Vector3d(0.0, -kSh2a * z, -kSh2a * y);
  grad[6] = Eigen::Vector3d(-2.0 * kSh2b * x, -2.0 * kSh2b * y, 4.0 * kSh2b * z);
  grad[7] = Eigen::Vector3d(-kSh2a * z, 0.0, -kSh2a * x);
  grad[8] = Eigen::Vector3d(2.0 * kSh2c * x, -2.0 * kSh2c * y, 0.0);
}

double softplus(double x) { return x > 30.0 ? x : std::log1p(std::exp(x)); }

double softplus_inverse(double y) {
  if (y <= 0.0) return -std::numeric_limits<double>::infinity();
  return y > 30.0 ? y : std::log(std::expm1(y));
}

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

void RadianceGrid::validate() const {
  if ((resolution.array() < 1).any()) throw Error("grid: resolution must be >= 1 per axis");
  if (!((bbox_min.array() < bbox_max.array()).all()))
    throw Error("grid: bbox_min must be componentwise below bbox_max");
  if (sh_degree < 0 || sh_degree > 2) throw Error("grid: sh_degree must be in {0,1,2}");
  if (density_raw.size() != voxel_count() || sh_coeffs.size() != voxel_count() * sh_count() * 3)
    throw Error("grid: parameter array sizes do not match resolution");
}

RadianceGrid make_grid(const Eigen::Vector3i& resolution, const Eigen::Vector3d& bbox_min,
                       const Eigen::Vector3d& bbox_max, int sh_degree, double init_density,
                       double init_gray) {
  RadianceGrid grid;
  grid.resolution = resolution;
  grid.bbox_min = bbox_min;
  grid.bbox_max = bbox_max;
  grid.sh_degree = sh_degree;
  const double raw = init_density > 0.0 ? softplus_inverse(init_density) : -20.0;
  grid.density_raw.assign(grid.voxel_count(), raw);
  grid.sh_coeffs.assign(grid.voxel_count() * grid.sh_count() * 3, 0.0);
  const double dc = init_gray / kSh0;
  for (std::size_t v = 0; v < grid.voxel_count(); ++v)
    for (int ch = 0; ch < 3; ++ch) grid.sh_coeffs[grid.sh_index(v, 0, ch)] = dc;
  grid.validate();
  return grid;
}

void SamplingConfig::validate() const {
  if (!(t_near >= 0.0) || !(t_near < t_far))
    throw Error("sampling: require 0 <= t_near < t_far");
  if (n_samples < 1) throw Error("sampling: n_samples must be >= 1");
}

std::pair<double, Eigen::Vector3d> sample_field(const RadianceGrid& grid,
                                                const Eigen::Vector3d& point,
                                                const Eigen::Vector3d& dir) {
  const Stencil st = make_stencil(grid, point, false);
  if (!st.inside) return {0.0, Eigen::Vector3d::Zero()};

  double raw_density = 0.0;
  for (int c = 0; c < 8; ++c) raw_density += st.w[c] * grid.density_raw[st.corner[c]];

  const int K = grid.sh_count();
  double basis[9];
  eval_sh_basis(grid.sh_degree, dir, basis);

  Eigen::Vector3d color = Eigen::Vector3d::Zero();
  for (int k = 0; k < K; ++k) {
    Eigen::Vector3d coeff = Eigen::Vector3d::Zero();
    for (int c = 0; c < 8; ++c) {
      const std::size_t base = grid.sh_index(st.corner[c], k, 0);
      coeff.x() += st.w[c] * grid.sh_coeffs[base];
      coeff.y() += st.w[c] * grid.sh_coeffs[base + 1];
      coeff.z() += st.w[c] * grid.sh_coeffs[base + 2];
    }
    color += basis[k] * coeff;
  }
  color = color.cwiseMax(0.0).cwiseMin(1.0);
  return {softplus(raw_density), color};
}

namespace {

// Rays stop once the transmittance drops below this; everything behind
// contributes less than the gradient-check tolerances can see.
constexpr double kMinTransmittance = 1e-10;

RenderOutput render_ray_impl(const RadianceGrid& grid, const Ray& ray, const SamplingConfig& cfg,
                             uint64_t jitter_key, RayCache* cache) {
  cfg.validate();
  const int n = cfg.n_samples;
  const double dt = (cfg.t_far - cfg.t_near) / n;

  if (cache != nullptr) {
    cache->sigma.resize(n);
    cache->alpha.resize(n);
    cache->trans.resize(n);
    cache->color.resize(n);
    cache->evaluated = 0;
  }

  RenderOutput out;
  out.weights.assign(n, 0.0);
  double transmittance = 1.0;
  for (int j = 0; j < n; ++j) {
    const double t = sample_t(cfg, jitter_key, j, dt);
    const auto [sigma, color] = sample_field(grid, ray.origin + t * ray.direction, ray.direction);
    const double alpha = 1.0 - std::exp(-sigma * dt);
    const double w = transmittance * alpha;
    out.color += w * color;
    out.weights[j] = w;
    if (cache != nullptr) {
      cache->sigma[j] = sigma;
      cache->alpha[j] = alpha;
      cache->trans[j] = transmittance;
      cache->color[j] = color;
      cache->evaluated = j + 1;
    }
    transmittance *= 1.0 - alpha;
    if (transmittance < kMinTransmittance) break;
  }
  if (cfg.white_background) out.color.array() += transmittance;
  out.transmittance = transmittance;
  return out;
}

}  // namespace

RenderOutput render_ray(const RadianceGrid& grid, const Ray& ray, const SamplingConfig& cfg,
                        uint64_t jitter_key) {
  return render_ray_impl(grid, ray, cfg, jitter_key, nullptr);
}

RenderOutput render_ray_cached(const RadianceGrid& grid, const Ray& ray,
                               const SamplingConfig& cfg, uint64_t jitter_key, RayCache& cache) {
  return render_ray_impl(grid, ray, cfg, jitter_key, &cache);
}

void render_ray_backward_cached(const RadianceGrid& grid, const Ray& ray,
                                const SamplingConfig& cfg, uint64_t jitter_key,
                                const Eigen::Vector3d& upstream, const RayCache& cache,
                                GradBuffer& grads, RayGrad* ray_grad) {
  const int n = cache.evaluated;
  const double dt = (cfg.t_far - cfg.t_near) / cfg.n_samples;
  const int K = grid.sh_count();

  // Suffix composites over the evaluated range: B_j = sum_{k>j} alpha_k c_k
  // prod_{j<m<k}(1-alpha_m) (+ background), so dC/dalpha_j = T_j (c_j - B_j).
  const Eigen::Vector3d bg =
      cfg.white_background ? Eigen::Vector3d::Ones() : Eigen::Vector3d::Zero();
  std::vector<Eigen::Vector3d> suffix(n);
  Eigen::Vector3d b = bg;
  for (int j = n - 1; j >= 0; --j) {
    suffix[j] = b;
    b = cache.alpha[j] * cache.color[j] + (1.0 - cache.alpha[j]) * b;
  }

  double basis[9];
  Eigen::Vector3d basis_grad[9];
  if (ray_grad != nullptr) {
    eval_sh_basis_grad(grid.sh_degree, ray.direction, basis, basis_grad);
  } else {
    eval_sh_basis(grid.sh_degree, ray.direction, basis);
  }

  for (int j = 0; j < n; ++j) {
    const double t = sample_t(cfg, jitter_key, j, dt);
    const Eigen::Vector3d p = ray.origin + t * ray.direction;
    const Stencil st = make_stencil(grid, p, ray_grad != nullptr);
    if (!st.inside) continue;

    const double weight = cache.trans[j] * cache.alpha[j];
    const double g_alpha = upstream.dot(cache.trans[j] * (cache.color[j] - suffix[j]));
    // d alpha / d sigma = dt * exp(-sigma dt) = dt * (1 - alpha)
    const double g_sigma = g_alpha * dt * (1.0 - cache.alpha[j]);

    double raw_density = 0.0;
    for (int c = 0; c < 8; ++c) raw_density += st.w[c] * grid.density_raw[st.corner[c]];
    const double g_raw = g_sigma * sigmoid(raw_density);

    // Clamp mask: decoded channels at the clamp boundary get zero gradient.
    Eigen::Vector3d pre = Eigen::Vector3d::Zero();
    for (int k = 0; k < K; ++k) {
      for (int c = 0; c < 8; ++c) {
        const std::size_t base = grid.sh_index(st.corner[c], k, 0);
        pre.x() += st.w[c] * basis[k] * grid.sh_coeffs[base];
        pre.y() += st.w[c] * basis[k] * grid.sh_coeffs[base + 1];
        pre.z() += st.w[c] * basis[k] * grid.sh_coeffs[base + 2];
      }
    }
    Eigen::Vector3d g_color;
    for (int ch = 0; ch < 3; ++ch) {
      const bool active = pre[ch] > 0.0 && pre[ch] < 1.0;
      g_color[ch] = active ? upstream[ch] * weight : 0.0;
    }

    Eigen::Vector3d g_point = Eigen::Vector3d::Zero();
    for (int c = 0; c < 8; ++c) {
      grads.density[st.corner[c]] += g_raw * st.w[c];
      if (ray_grad != nullptr) g_point += (g_raw * grid.density_raw[st.corner[c]]) * st.dw[c];
      for (int k = 0; k < K; ++k) {
        const std::size_t base = grid.sh_index(st.corner[c], k, 0);
        const double bw = basis[k] * st.w[c];
        grads.sh[base] += g_color.x() * bw;
        grads.sh[base + 1] += g_color.y() * bw;
        grads.sh[base + 2] += g_color.z() * bw;
        if (ray_grad != nullptr) {
          const double dot = g_color.x() * grid.sh_coeffs[base] +
                             g_color.y() * grid.sh_coeffs[base + 1] +
                             g_color.z() * grid.sh_coeffs[base + 2];
          g_point += (basis[k] * dot) * st.dw[c];
        }
      }
    }

    if (ray_grad != nullptr) {
      ray_grad->d_origin += g_point;
      ray_grad->d_direction += t * g_point;
      // View dependence: color also sees the direction through the SH basis.
      for (int k = 0; k < K; ++k) {
        Eigen::Vector3d coeff = Eigen::Vector3d::Zero();
        for (int c = 0; c < 8; ++c) {
          const std::size_t base = grid.sh_index(st.corner[c], k, 0);
          coeff.x() += st.w[c] * grid.sh_coeffs[base];
          coeff.y() += st.w[c] * grid.sh_coeffs[base + 1];
          coeff.z() += st.w[c] * grid.sh_coeffs[base + 2];
        }
        ray_grad->d_direction += g_color.dot(coeff) * basis_grad[k];
      }
    }
  }
}

RenderOutput render_ray_backward(const RadianceGrid& grid, const Ray& ray,
                                 const SamplingConfig& cfg, uint64_t jitter_key,
                                 const Eigen::Vector3d& upstream, GradBuffer& grads,
                                 RayGrad* ray_grad) {
  RayCache cache;
  const RenderOutput out = render_ray_impl(grid, ray, cfg, jitter_key, &cache);
  render_ray_backward_cached(grid, ray, cfg, jitter_key, upstream, cache, grads, ray_grad);
  return out;
}

Image render_frame(const RadianceGrid& grid, const Pose& pose, const Intrinsics& intr,
                   const SamplingConfig& cfg, uint64_t seed, int threads) {
  intr.validate();
  cfg.validate();
  Image frame(intr.height, intr.width, 3);
  parallel_chunks(static_cast<std::size_t>(intr.height), threads,
                  [&](std::size_t row_begin, std::size_t row_end, int) {
                    for (std::size_t row = row_begin; row < row_end; ++row) {
                      for (int col = 0; col < intr.width; ++col) {
                        const Ray ray = generate_ray(intr, pose, static_cast<int>(row), col);
                        const uint64_t key = hash_mix(seed, row, static_cast<uint64_t>(col));
                        const RenderOutput out = render_ray(grid, ray, cfg, key);
                        for (int ch = 0; ch < 3; ++ch)
                          frame.at(static_cast<int>(row), col, ch) =
                              static_cast<float>(out.color[ch]);
                      }
                    }
                  });
  return frame;
}

}  // namespace sci3d
