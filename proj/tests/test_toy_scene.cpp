#include <doctest.h>

#include <cmath>

#include "sci3d/metrics.hpp"
#include "sci3d/toy_scene.hpp"

using namespace sci3d;

namespace {

Intrinsics test_camera(int size) {
  Intrinsics intr;
  intr.width = size;
  intr.height = size;
  intr.fx = intr.fy = 0.9 * size;
  intr.cx = size * 0.5;
  intr.cy = size * 0.5;
  return intr;
}

Pose front_camera() {
  Pose pose;
  pose.translation = Eigen::Vector3d(0, 0, -2.5);
  return pose;
}

}  // namespace

TEST_SUITE_BEGIN("toy_scene");

TEST_CASE("empty scene bakes to a zero-density grid") {
  ToyScene scene;
  const RadianceGrid grid = bake_scene(scene, Eigen::Vector3i(16, 16, 16));
  for (double raw : grid.density_raw) CHECK(softplus(raw) < 1e-8);
}

TEST_CASE("a centered sphere fills interior voxels and leaves the exterior empty") {
  ToyScene scene;
  Primitive sphere;
  sphere.shape = Primitive::Shape::Sphere;
  sphere.center = Eigen::Vector3d::Zero();
  sphere.size = Eigen::Vector3d::Constant(0.5);
  sphere.albedo = Eigen::Vector3d(0.8, 0.3, 0.1);
  sphere.density = 20.0;
  sphere.edge = 0.05;
  scene.primitives.push_back(sphere);

  const RadianceGrid grid = bake_scene(scene, Eigen::Vector3i(32, 32, 32));
  const auto [sigma_in, color_in] =
      sample_field(grid, Eigen::Vector3d::Zero(), Eigen::Vector3d::UnitZ());
  CHECK(sigma_in == doctest::Approx(20.0).epsilon(1e-6));
  CHECK(color_in.x() == doctest::Approx(0.8).epsilon(1e-6));
  CHECK(color_in.y() == doctest::Approx(0.3).epsilon(1e-6));
  const auto [sigma_out, color_out] =
      sample_field(grid, Eigen::Vector3d(0.8, 0.8, 0.8), Eigen::Vector3d::UnitZ());
  CHECK(sigma_out < 1e-8);
}

TEST_CASE("scene albedo blends primitives by partial density") {
  ToyScene scene;
  Primitive a, b;
  a.center = Eigen::Vector3d(-0.1, 0, 0);
  a.size = Eigen::Vector3d::Constant(0.3);
  a.albedo = Eigen::Vector3d(1.0, 0.0, 0.0);
  a.density = 10.0;
  b.center = Eigen::Vector3d(0.1, 0, 0);
  b.size = Eigen::Vector3d::Constant(0.3);
  b.albedo = Eigen::Vector3d(0.0, 1.0, 0.0);
  b.density = 10.0;
  scene.primitives = {a, b};
  // deep inside both spheres: equal densities blend to the average
  const Eigen::Vector3d albedo = scene_albedo(scene, Eigen::Vector3d::Zero());
  CHECK(albedo.x() == doctest::Approx(0.5));
  CHECK(albedo.y() == doctest::Approx(0.5));
}

TEST_CASE("baked render matches the analytic reference at 4x samples (>= 40 dB)") {
  ToyScene scene = preset_scene("orbs");
  // widen the falloff so the bake resolves the field cleanly
  for (Primitive& prim : scene.primitives) prim.edge = 0.14;
  const RadianceGrid grid = bake_scene(scene, Eigen::Vector3i(160, 160, 160));

  const Intrinsics intr = test_camera(48);
  SamplingConfig cfg{1.2, 4.2, 96, false};
  const Image rendered = render_frame(grid, front_camera(), intr, cfg, 0, 2);

  SamplingConfig fine = cfg;
  fine.n_samples = cfg.n_samples * 4;
  const Image reference = render_scene_reference(scene, front_camera(), intr, fine, 2);

  CHECK(psnr(reference, rendered) >= 40.0);
}

TEST_CASE("presets validate and carry increasing primitive counts") {
  std::size_t previous = 0;
  for (const std::string& name : preset_scene_names()) {
    const ToyScene scene = preset_scene(name);
    CHECK(scene.primitives.size() >= previous);
    previous = scene.primitives.size();
  }
  CHECK_THROWS_AS((void)preset_scene("nope"), ConfigError);
}

TEST_CASE("bake_scene rejects tiny resolutions") {
  CHECK_THROWS_AS((void)bake_scene(ToyScene{}, Eigen::Vector3i(4, 16, 16)), Error);
}

TEST_SUITE_END();
