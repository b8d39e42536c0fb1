#include "sci3d/toy_scene.hpp"

#include <algorithm>
#include <cmath>

#include "sci3d/parallel.hpp"

namespace sci3d {

namespace {

double smoothstep01(double t) {
  t = std::clamp(t, 0.0, 1.0);
  return t * t * (3.0 - 2.0 * t);
}

double signed_distance(const Primitive& prim, const Eigen::Vector3d& p) {
  const Eigen::Vector3d local = p - prim.center;
  if (prim.shape == Primitive::Shape::Sphere) return local.norm() - prim.size.x();
  const Eigen::Vector3d q = local.cwiseAbs() - prim.size;
  const double outside = q.cwiseMax(0.0).norm();
  const double inside = std::min(q.maxCoeff(), 0.0);
  return outside + inside;
}

/// 1 deep inside, 0 outside, smooth ramp of width `edge` across the surface.
double occupancy(const Primitive& prim, const Eigen::Vector3d& p) {
  const double sd = signed_distance(prim, p);
  return smoothstep01(0.5 - sd / prim.edge);
}

}  // namespace

void ToyScene::validate() const {
  if (!((bbox_min.array() < bbox_max.array()).all()))
    throw Error("toy scene: bbox_min must be below bbox_max");
  for (const Primitive& prim : primitives) {
    if (!(prim.density > 0.0)) throw Error("toy scene: primitive densities must be > 0");
    if (!(prim.edge > 0.0)) throw Error("toy scene: primitive edge width must be > 0");
    if ((prim.albedo.array() < 0.0).any() || (prim.albedo.array() > 1.0).any())
      throw Error("toy scene: albedos must be in [0,1]");
    const Eigen::Vector3d extent = prim.shape == Primitive::Shape::Sphere
                                       ? Eigen::Vector3d::Constant(prim.size.x())
                                       : prim.size;
    if (((prim.center - extent).array() < bbox_min.array()).any() ||
        ((prim.center + extent).array() > bbox_max.array()).any())
      throw Error("toy scene '" + name + "': a primitive extends outside the bbox");
  }
}

double scene_density(const ToyScene& scene, const Eigen::Vector3d& point) {
  double density = 0.0;
  for (const Primitive& prim : scene.primitives) density += prim.density * occupancy(prim, point);
  return density;
}

Eigen::Vector3d scene_albedo(const ToyScene& scene, const Eigen::Vector3d& point) {
  double total = 0.0;
  Eigen::Vector3d blend = Eigen::Vector3d::Zero();
  for (const Primitive& prim : scene.primitives) {
    const double d = prim.density * occupancy(prim, point);
    total += d;
    blend += d * prim.albedo;
  }
  return total > 0.0 ? Eigen::Vector3d(blend / total) : Eigen::Vector3d::Zero();
}

RadianceGrid bake_scene(const ToyScene& scene, const Eigen::Vector3i& resolution) {
  scene.validate();
  if ((resolution.array() < 8).any()) throw Error("bake_scene: resolution must be >= 8 per axis");

  RadianceGrid grid = make_grid(resolution, scene.bbox_min, scene.bbox_max, 0, 0.0, 0.0);
  constexpr double kRawFloor = -20.0;  // softplus(-20) ~ 2e-9, effectively empty
  constexpr double kSh0 = 0.28209479177387814;

  for (int iz = 0; iz < resolution.z(); ++iz)
    for (int iy = 0; iy < resolution.y(); ++iy)
      for (int ix = 0; ix < resolution.x(); ++ix) {
        const Eigen::Vector3d p = grid.voxel_center(ix, iy, iz);
        const std::size_t v = grid.voxel_index(ix, iy, iz);
        const double density = scene_density(scene, p);
        grid.density_raw[v] = std::max(softplus_inverse(density), kRawFloor);
        const Eigen::Vector3d albedo = scene_albedo(scene, p);
        for (int ch = 0; ch < 3; ++ch) grid.sh_coeffs[grid.sh_index(v, 0, ch)] = albedo[ch] / kSh0;
      }
  return grid;
}

Image render_scene_reference(const ToyScene& scene, const Pose& pose, const Intrinsics& intr,
                             const SamplingConfig& cfg, int threads) {
  intr.validate();
  cfg.validate();
  const double dt = (cfg.t_far - cfg.t_near) / cfg.n_samples;
  Image frame(intr.height, intr.width, 3);

  parallel_chunks(static_cast<std::size_t>(intr.height), threads,
                  [&](std::size_t row_begin, std::size_t row_end, int) {
                    for (std::size_t row = row_begin; row < row_end; ++row) {
                      for (int col = 0; col < intr.width; ++col) {
                        const Ray ray = generate_ray(intr, pose, static_cast<int>(row), col);
                        Eigen::Vector3d color = Eigen::Vector3d::Zero();
                        double transmittance = 1.0;
                        for (int j = 0; j < cfg.n_samples; ++j) {
                          const double t = cfg.t_near + (j + 0.5) * dt;
                          const Eigen::Vector3d p = ray.origin + t * ray.direction;
                          const double sigma = scene_density(scene, p);
                          const double alpha = 1.0 - std::exp(-sigma * dt);
                          color += transmittance * alpha * scene_albedo(scene, p);
                          transmittance *= 1.0 - alpha;
                        }
                        if (scene.white_background || cfg.white_background)
                          color.array() += transmittance;
                        for (int ch = 0; ch < 3; ++ch)
                          frame.at(static_cast<int>(row), col, ch) = static_cast<float>(color[ch]);
                      }
                    }
                  });
  return frame;
}

ToyScene preset_scene(const std::string& name) {
  ToyScene scene;
  scene.name = name;
  using Shape = Primitive::Shape;
  auto add = [&](Shape shape, double cx, double cy, double cz, double sx, double sy, double sz,
                 double r, double g, double b, double density, double edge) {
    Primitive prim;
    prim.shape = shape;
    prim.center = Eigen::Vector3d(cx, cy, cz);
    prim.size = Eigen::Vector3d(sx, sy, sz);
    prim.albedo = Eigen::Vector3d(r, g, b);
    prim.density = density;
    prim.edge = edge;
    scene.primitives.push_back(prim);
  };

  if (name == "orbs") {
    add(Shape::Sphere, -0.35, 0.10, 0.10, 0.30, 0.30, 0.30, 0.85, 0.25, 0.20, 25.0, 0.10);
    add(Shape::Sphere, 0.40, -0.15, -0.20, 0.26, 0.26, 0.26, 0.20, 0.55, 0.90, 25.0, 0.10);
    add(Shape::Sphere, 0.05, 0.42, -0.30, 0.22, 0.22, 0.22, 0.95, 0.85, 0.25, 25.0, 0.10);
    add(Shape::Box, 0.00, -0.62, 0.00, 0.75, 0.12, 0.55, 0.45, 0.75, 0.40, 30.0, 0.10);
  } else if (name == "blocks") {
    const double albedos[9][3] = {{0.9, 0.2, 0.2}, {0.2, 0.8, 0.3}, {0.25, 0.35, 0.9},
                                  {0.9, 0.8, 0.2}, {0.8, 0.3, 0.8}, {0.2, 0.8, 0.8},
                                  {0.95, 0.55, 0.2}, {0.55, 0.3, 0.1}, {0.85, 0.85, 0.85}};
    int idx = 0;
    for (int gx = -1; gx <= 1; ++gx)
      for (int gy = -1; gy <= 1; ++gy) {
        const double z = 0.15 * ((gx + gy + 2) % 3 - 1);
        add(Shape::Box, 0.45 * gx, 0.45 * gy, z, 0.16, 0.16, 0.16, albedos[idx][0],
            albedos[idx][1], albedos[idx][2], 28.0, 0.09);
        ++idx;
      }
  } else if (name == "clutter") {
    add(Shape::Box, 0.00, -0.66, 0.00, 0.80, 0.10, 0.62, 0.50, 0.50, 0.55, 30.0, 0.09);
    add(Shape::Box, -0.45, -0.30, 0.18, 0.16, 0.26, 0.16, 0.90, 0.25, 0.20, 28.0, 0.08);
    add(Shape::Box, 0.42, -0.34, -0.12, 0.18, 0.22, 0.15, 0.20, 0.60, 0.90, 28.0, 0.08);
    add(Shape::Box, -0.05, -0.38, -0.32, 0.14, 0.18, 0.13, 0.95, 0.80, 0.25, 28.0, 0.08);
    add(Shape::Sphere, -0.30, 0.12, -0.25, 0.18, 0.18, 0.18, 0.30, 0.85, 0.45, 26.0, 0.08);
    add(Shape::Sphere, 0.28, 0.10, 0.25, 0.20, 0.20, 0.20, 0.85, 0.45, 0.85, 26.0, 0.08);
    add(Shape::Box, 0.05, 0.18, 0.02, 0.12, 0.12, 0.12, 0.95, 0.95, 0.90, 28.0, 0.08);
    add(Shape::Sphere, -0.55, 0.45, 0.22, 0.14, 0.14, 0.14, 0.95, 0.60, 0.20, 26.0, 0.08);
    add(Shape::Sphere, 0.55, 0.48, -0.18, 0.13, 0.13, 0.13, 0.25, 0.30, 0.85, 26.0, 0.08);
    add(Shape::Box, 0.02, 0.55, 0.35, 0.18, 0.10, 0.10, 0.60, 0.90, 0.85, 26.0, 0.08);
  } else {
    throw ConfigError("unknown preset scene '" + name + "' (try orbs, blocks, clutter)");
  }
  scene.validate();
  return scene;
}

std::vector<std::string> preset_scene_names() { return {"orbs", "blocks", "clutter"}; }

}  // namespace sci3d
