#pragma once

#include <Eigen/Core>
#include <string>
#include <vector>

#include "sci3d/radiance_grid.hpp"

namespace sci3d {

/// Analytic scene primitive with a smooth density falloff shell of width
/// `edge` (scene units) around the surface, so that baked grids resolve it.
struct Primitive {
  enum class Shape { Sphere, Box };
  Shape shape = Shape::Sphere;
  Eigen::Vector3d center = Eigen::Vector3d::Zero();
  Eigen::Vector3d size = Eigen::Vector3d::Constant(0.2);  // radius (x) for spheres, half-extents for boxes
  Eigen::Vector3d albedo = Eigen::Vector3d::Constant(0.5);
  double density = 20.0;
  double edge = 0.08;
};

struct ToyScene {
  std::string name = "scene";
  std::vector<Primitive> primitives;
  Eigen::Vector3d bbox_min = Eigen::Vector3d::Constant(-1.0);
  Eigen::Vector3d bbox_max = Eigen::Vector3d::Constant(1.0);
  bool white_background = false;

  void validate() const;
};

/// Analytic field of the scene: summed primitive densities and the
/// density-weighted blend of their albedos.
double scene_density(const ToyScene& scene, const Eigen::Vector3d& point);
Eigen::Vector3d scene_albedo(const ToyScene& scene, const Eigen::Vector3d& point);

/// Samples the analytic field at voxel centers into a degree-0 grid
/// (albedo stored as the DC coefficient, density through the softplus
/// inverse). Resolution must be >= 8 per axis.
RadianceGrid bake_scene(const ToyScene& scene, const Eigen::Vector3i& resolution);

/// Renders the analytic scene directly (no grid) with the same quadrature
/// as render_ray; the independent reference for bake/render fidelity tests.
Image render_scene_reference(const ToyScene& scene, const Pose& pose, const Intrinsics& intr,
                             const SamplingConfig& cfg, int threads = 1);

/// Shipped presets, increasing clutter: "orbs", "blocks", "clutter".
ToyScene preset_scene(const std::string& name);
std::vector<std::string> preset_scene_names();

}  // namespace sci3d
