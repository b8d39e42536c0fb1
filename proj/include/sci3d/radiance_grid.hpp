#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <utility>
#include <vector>

#include "sci3d/geometry.hpp"
#include "sci3d/image.hpp"

namespace sci3d {

inline int sh_coeff_count(int degree) { return (degree + 1) * (degree + 1); }

/// Real spherical-harmonic basis up to degree 2, evaluated as polynomials in
/// the components of a unit direction. out must hold (degree+1)^2 entries.
void eval_sh_basis(int degree, const Eigen::Vector3d& dir, double* out);

/// Basis values plus their gradients with respect to the direction vector.
void eval_sh_basis_grad(int degree, const Eigen::Vector3d& dir, double* basis,
                        Eigen::Vector3d* grad);

double softplus(double x);
double softplus_inverse(double y);
double sigmoid(double x);

/// Dense voxel grid of raw density and spherical-harmonic color
/// coefficients. Raw parameters are unconstrained; density activation is
/// softplus, decoded colors are clamped to [0,1] before compositing.
struct RadianceGrid {
  Eigen::Vector3i resolution = Eigen::Vector3i::Zero();  // (nx, ny, nz)
  Eigen::Vector3d bbox_min = Eigen::Vector3d::Zero();
  Eigen::Vector3d bbox_max = Eigen::Vector3d::Ones();
  int sh_degree = 0;  // in {0, 1, 2}

  std::vector<double> density_raw;  // nx*ny*nz, x-fastest
  std::vector<double> sh_coeffs;    // per voxel K*3, coefficient-major, rgb fastest

  std::size_t voxel_count() const {
    return static_cast<std::size_t>(resolution.x()) * resolution.y() * resolution.z();
  }
  int sh_count() const { return sh_coeff_count(sh_degree); }
  std::size_t voxel_index(int ix, int iy, int iz) const {
    return static_cast<std::size_t>(ix) +
           static_cast<std::size_t>(resolution.x()) *
               (static_cast<std::size_t>(iy) + static_cast<std::size_t>(resolution.y()) * iz);
  }
  std::size_t sh_index(std::size_t voxel, int k, int ch) const {
    return (voxel * sh_count() + k) * 3 + ch;
  }
  Eigen::Vector3d voxel_size() const {
    return (bbox_max - bbox_min).cwiseQuotient(resolution.cast<double>());
  }
  Eigen::Vector3d voxel_center(int ix, int iy, int iz) const {
    return bbox_min + voxel_size().cwiseProduct(
                          Eigen::Vector3d(ix + 0.5, iy + 0.5, iz + 0.5));
  }
  void validate() const;
};

/// Grid with uniform activated density init_density and constant decoded
/// color init_gray (DC coefficient only; higher-order coefficients zero).
RadianceGrid make_grid(const Eigen::Vector3i& resolution, const Eigen::Vector3d& bbox_min,
                       const Eigen::Vector3d& bbox_max, int sh_degree,
                       double init_density = 0.1, double init_gray = 0.5);

struct SamplingConfig {
  double t_near = 0.0;
  double t_far = 1.0;
  int n_samples = 64;
  bool stratified = false;
  bool white_background = false;

  void validate() const;
};

struct RenderOutput {
  Eigen::Vector3d color = Eigen::Vector3d::Zero();
  std::vector<double> weights;   // per-sample compositing weights
  double transmittance = 1.0;    // final T
};

/// Field lookup at a point: trilinearly interpolated raw parameters, then
/// activation. Points outside the bbox return (0, black).
std::pair<double, Eigen::Vector3d> sample_field(const RadianceGrid& grid,
                                                const Eigen::Vector3d& point,
                                                const Eigen::Vector3d& dir);

/// Quadrature volume rendering along the ray: alpha_j = 1 - exp(-sigma_j
/// delta_j), w_j = T_j alpha_j. Samples are midpoints of n_samples equal
/// segments of [t_near, t_far], or jittered within each segment when
/// stratified (jitter derived from jitter_key, so results are deterministic).
RenderOutput render_ray(const RadianceGrid& grid, const Ray& ray, const SamplingConfig& cfg,
                        uint64_t jitter_key = 0);

/// Gradient accumulator matching a grid's parameter layout.
struct GradBuffer {
  std::vector<double> density;
  std::vector<double> sh;

  void init_like(const RadianceGrid& grid) {
    density.assign(grid.density_raw.size(), 0.0);
    sh.assign(grid.sh_coeffs.size(), 0.0);
  }
  void clear() {
    std::fill(density.begin(), density.end(), 0.0);
    std::fill(sh.begin(), sh.end(), 0.0);
  }
};

/// Gradients of the rendered color with respect to the ray itself.
struct RayGrad {
  Eigen::Vector3d d_origin = Eigen::Vector3d::Zero();
  Eigen::Vector3d d_direction = Eigen::Vector3d::Zero();
};

/// Per-sample forward state kept for a cheap reverse pass (training renders
/// each ray once, then reuses the cache for the backward sweep).
struct RayCache {
  std::vector<double> sigma;
  std::vector<double> alpha;
  std::vector<double> trans;            // T_j before sample j
  std::vector<Eigen::Vector3d> color;   // clamped decoded colors
  int evaluated = 0;                    // samples before early termination
};

/// Forward render that fills the cache. Identical output to render_ray.
RenderOutput render_ray_cached(const RadianceGrid& grid, const Ray& ray,
                               const SamplingConfig& cfg, uint64_t jitter_key, RayCache& cache);

/// Reverse sweep over a cache produced by render_ray_cached with the same
/// inputs. Accumulates gradients of every touched raw density and SH
/// coefficient into grads; when ray_grad is non-null, also analytic
/// gradients with respect to the ray origin and direction.
void render_ray_backward_cached(const RadianceGrid& grid, const Ray& ray,
                                const SamplingConfig& cfg, uint64_t jitter_key,
                                const Eigen::Vector3d& upstream, const RayCache& cache,
                                GradBuffer& grads, RayGrad* ray_grad = nullptr);

/// Reverse pass of render_ray for a scalar loss with d(loss)/d(color) =
/// upstream. Recomputes the forward internally (must be called with the same
/// inputs and jitter_key) and accumulates gradients of every touched raw
/// density and SH coefficient into grads. When ray_grad is non-null, also
/// accumulates analytic gradients with respect to the ray origin and
/// direction. Returns the forward output.
RenderOutput render_ray_backward(const RadianceGrid& grid, const Ray& ray,
                                 const SamplingConfig& cfg, uint64_t jitter_key,
                                 const Eigen::Vector3d& upstream, GradBuffer& grads,
                                 RayGrad* ray_grad = nullptr);

/// Renders a full frame. Stratified jitter is seeded per pixel from `seed`,
/// so the result is deterministic and independent of the thread count.
Image render_frame(const RadianceGrid& grid, const Pose& pose, const Intrinsics& intr,
                   const SamplingConfig& cfg, uint64_t seed = 0, int threads = 1);

}  // namespace sci3d
