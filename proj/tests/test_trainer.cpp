#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>

#include "sci3d/dataset.hpp"
#include "sci3d/metrics.hpp"
#include "sci3d/rng.hpp"
#include "sci3d/trainer.hpp"

using namespace sci3d;

namespace {

/// Small end-to-end fixture: 16x16 frames, N=3, grid 12^3.
struct SmallProblem {
  Dataset dataset;
  TrainConfig cfg;

  SmallProblem() {
    DatasetSpec spec;
    spec.scene = preset_scene("orbs");
    spec.intrinsics.width = 16;
    spec.intrinsics.height = 16;
    spec.intrinsics.fx = spec.intrinsics.fy = 14.4;
    spec.intrinsics.cx = spec.intrinsics.cy = 8.0;
    spec.trajectory_start.translation = Eigen::Vector3d(0, 0, -2.5);
    spec.trajectory_end = spec.trajectory_start;
    spec.trajectory_end.translation.x() += 0.2;
    spec.frame_count = 3;
    spec.overlap_rate = 1.0 / 3.0;
    spec.seed = 5;
    spec.bake_resolution = Eigen::Vector3i(32, 32, 32);
    spec.sampling = SamplingConfig{1.2, 4.2, 24, false};
    spec.threads = 2;
    dataset = make_dataset(spec);

    cfg.iterations = 60;
    cfg.batch_rays = 128;
    cfg.lr_scene_start = 0.1;
    cfg.lr_scene_end = 0.01;
    cfg.grid_resolution = Eigen::Vector3i(12, 12, 12);
    cfg.bbox_min = spec.scene.bbox_min;
    cfg.bbox_max = spec.scene.bbox_max;
    cfg.sampling = spec.sampling;
    cfg.seed = 3;
    cfg.threads = 2;
    cfg.tv_weight = 0.0;
    cfg.optimize_poses = false;
  }
};

std::vector<PixelCoord> random_pixels(Rng& rng, int h, int w, int count) {
  std::vector<PixelCoord> pixels(count);
  for (PixelCoord& px : pixels) {
    px.row = static_cast<int>(rng.uniform_below(h));
    px.col = static_cast<int>(rng.uniform_below(w));
  }
  return pixels;
}

}  // namespace

TEST_SUITE_BEGIN("trainer");

TEST_CASE("init_trajectory: zero sigma gives exact identity twists") {
  TrainConfig cfg;
  cfg.pose_init_trans_sigma = 0.0;
  const TrajectoryParams traj = init_trajectory(cfg);
  CHECK(traj.twist_start.rho.norm() == 0.0);
  CHECK(traj.twist_end.rho.norm() == 0.0);
  CHECK(traj.twist_start.phi.norm() == 0.0);
  CHECK(traj.twist_end.phi.norm() == 0.0);
}

TEST_CASE("init_trajectory is reproducible, rotation-free, and seed-sensitive") {
  TrainConfig cfg;
  cfg.pose_init_trans_sigma = 0.01;
  cfg.seed = 9;
  const TrajectoryParams a = init_trajectory(cfg);
  const TrajectoryParams b = init_trajectory(cfg);
  CHECK(a.twist_start.rho == b.twist_start.rho);
  CHECK(a.twist_end.rho == b.twist_end.rho);
  CHECK(a.twist_start.phi.norm() == 0.0);
  CHECK(a.twist_end.phi.norm() == 0.0);
  CHECK(a.twist_start.rho.norm() > 0.0);

  cfg.seed = 10;
  const TrajectoryParams c = init_trajectory(cfg);
  CHECK(a.twist_start.rho != c.twist_start.rho);
}

TEST_CASE("lr_schedule endpoints and geometric midpoint") {
  CHECK(lr_schedule(5e-4, 5e-5, 0, 1000) == 5e-4);
  CHECK(lr_schedule(5e-4, 5e-5, 1000, 1000) == 5e-5);
  CHECK(lr_schedule(5e-4, 5e-5, 500, 1000) ==
        doctest::Approx(std::sqrt(5e-4 * 5e-5)).epsilon(1e-12));
  CHECK(lr_schedule(5e-4, 5e-5, 500, 1000) == doctest::Approx(1.5811e-4).epsilon(1e-4));
  CHECK_THROWS_AS((void)lr_schedule(1e-3, 1e-4, 5, 4), Error);
}

TEST_CASE("adam_step: zero gradient leaves parameters unchanged") {
  std::vector<double> params = {1.0, -2.0, 0.5};
  const std::vector<double> grads = {0.0, 0.0, 0.0};
  AdamState state;
  state.init(3);
  adam_step(params, grads, state, 0.1, 0.9, 0.999, 1e-8);
  CHECK(params == std::vector<double>{1.0, -2.0, 0.5});
  CHECK(state.step == 1);
}

TEST_CASE("adam_step: first unit-gradient step moves by about lr") {
  std::vector<double> params = {1.0};
  const std::vector<double> grads = {1.0};
  AdamState state;
  state.init(1);
  adam_step(params, grads, state, 0.1, 0.9, 0.999, 1e-8);
  // bias-corrected m_hat = 1, v_hat = 1 -> step = lr / (1 + eps)
  CHECK(params[0] == doctest::Approx(1.0 - 0.1).epsilon(1e-7));
}

TEST_CASE("adam_step is bitwise deterministic across identical runs") {
  Rng rng(13);
  std::vector<double> params_a(64), grads(64);
  for (std::size_t i = 0; i < 64; ++i) {
    params_a[i] = rng.uniform();
    grads[i] = rng.uniform() - 0.5;
  }
  std::vector<double> params_b = params_a;
  AdamState sa, sb;
  sa.init(64);
  sb.init(64);
  for (int step = 0; step < 10; ++step) {
    adam_step(params_a, grads, sa, 0.01, 0.9, 0.999, 1e-8, 2);
    adam_step(params_b, grads, sb, 0.01, 0.9, 0.999, 1e-8, 1);
  }
  CHECK(params_a == params_b);
}

TEST_CASE("adam_step rejects mismatched shapes") {
  std::vector<double> params(4), grads(3);
  AdamState state;
  state.init(4);
  CHECK_THROWS_AS(adam_step(params, grads, state, 0.1, 0.9, 0.999, 1e-8), ShapeMismatch);
}

TEST_CASE("trajectory_pose endpoints follow the twists") {
  Pose reference;
  reference.translation = Eigen::Vector3d(0, 0, -2.5);
  TrajectoryParams traj;
  traj.twist_end.rho = Eigen::Vector3d(0.2, 0, 0);
  const Pose start = trajectory_pose(reference, traj, 1, 8);
  const Pose end = trajectory_pose(reference, traj, 8, 8);
  CHECK((start.translation - reference.translation).norm() < 1e-12);
  CHECK((end.translation - Eigen::Vector3d(0.2, 0, -2.5)).norm() < 1e-12);
}

TEST_CASE("pose-twist gradients match finite differences of the batch loss") {
  SmallProblem problem;
  problem.cfg.optimize_poses = true;

  RadianceGrid grid = bake_scene(problem.dataset.spec.scene, Eigen::Vector3i(16, 16, 16));
  // perturb the colors so color gradients also flow into the twist chain
  Rng rng(77);
  for (double& c : grid.sh_coeffs) c += 0.05 * (rng.uniform() - 0.5);

  TrajectoryParams traj;
  traj.twist_start.rho = Eigen::Vector3d(0.004, -0.003, 0.002);
  traj.twist_end.rho = Eigen::Vector3d(0.19, 0.004, -0.002);
  traj.twist_end.phi = Eigen::Vector3d(0.002, -0.001, 0.003);

  const auto pixels = random_pixels(rng, 16, 16, 64);
  const uint64_t salt = 99;

  GradBuffer grads;
  grads.init_like(grid);
  const BatchGradients analytic = accumulate_batch_gradients(
      grid, problem.dataset.measurement, problem.dataset.masks, problem.dataset.spec.intrinsics,
      problem.dataset.reference_pose, traj, problem.cfg, pixels, salt, grads, true);

  const double eps = 1e-5;
  double worst = 0.0;
  for (int p = 0; p < 12; ++p) {
    Eigen::Matrix<double, 12, 1> v = traj.vector();
    v[p] += eps;
    const double up = evaluate_batch_loss(grid, problem.dataset.measurement,
                                          problem.dataset.masks, problem.dataset.spec.intrinsics,
                                          problem.dataset.reference_pose,
                                          TrajectoryParams::from_vector(v), problem.cfg, pixels,
                                          salt);
    v[p] -= 2 * eps;
    const double down = evaluate_batch_loss(grid, problem.dataset.measurement,
                                            problem.dataset.masks,
                                            problem.dataset.spec.intrinsics,
                                            problem.dataset.reference_pose,
                                            TrajectoryParams::from_vector(v), problem.cfg, pixels,
                                            salt);
    const double numeric = (up - down) / (2 * eps);
    const double denom = std::max({std::abs(analytic.twist_grads[p]), std::abs(numeric), 1e-4});
    worst = std::max(worst, std::abs(analytic.twist_grads[p] - numeric) / denom);
  }
  CHECK(worst <= 1e-3);
}

TEST_CASE("train with zero iterations returns the initialized state") {
  SmallProblem problem;
  problem.cfg.iterations = 0;
  const TrainResult result =
      train(problem.dataset.measurement, problem.dataset.masks, problem.dataset.spec.intrinsics,
            problem.dataset.reference_pose, problem.cfg);
  CHECK(result.history.empty());
  const RadianceGrid fresh =
      make_grid(problem.cfg.grid_resolution, problem.cfg.bbox_min, problem.cfg.bbox_max,
                problem.cfg.sh_degree, problem.cfg.init_density, problem.cfg.init_gray);
  CHECK(result.grid.density_raw == fresh.density_raw);
  CHECK(result.grid.sh_coeffs == fresh.sh_coeffs);
  const TrajectoryParams traj = init_trajectory(problem.cfg);
  CHECK(result.trajectory.vector() == traj.vector());
}

TEST_CASE("loss decreases over training") {
  SmallProblem problem;
  problem.cfg.iterations = 400;
  const TrainResult result =
      train(problem.dataset.measurement, problem.dataset.masks, problem.dataset.spec.intrinsics,
            problem.dataset.reference_pose, problem.cfg);
  REQUIRE(result.history.size() == 400);

  auto median_of = [&](std::size_t begin, std::size_t end) {
    std::vector<double> window;
    for (std::size_t i = begin; i < end; ++i) window.push_back(result.history[i].loss);
    std::sort(window.begin(), window.end());
    return window[window.size() / 2];
  };
  const double early = median_of(0, 40);
  const double late = median_of(360, 400);
  CHECK(late < early);
}

TEST_CASE("training is deterministic for a fixed seed") {
  SmallProblem problem;
  problem.cfg.iterations = 25;
  problem.cfg.optimize_poses = true;
  problem.cfg.tv_weight = 1e-4;
  const TrainResult a =
      train(problem.dataset.measurement, problem.dataset.masks, problem.dataset.spec.intrinsics,
            problem.dataset.reference_pose, problem.cfg);
  const TrainResult b =
      train(problem.dataset.measurement, problem.dataset.masks, problem.dataset.spec.intrinsics,
            problem.dataset.reference_pose, problem.cfg);
  REQUIRE(a.history.size() == b.history.size());
  for (std::size_t i = 0; i < a.history.size(); ++i)
    CHECK(a.history[i].loss == b.history[i].loss);
  CHECK(a.grid.density_raw == b.grid.density_raw);
  CHECK(a.trajectory.vector() == b.trajectory.vector());
}

TEST_CASE("optimizer state round-trips") {
  namespace fs = std::filesystem;
  SmallProblem problem;
  problem.cfg.iterations = 5;
  TrainResult result =
      train(problem.dataset.measurement, problem.dataset.masks, problem.dataset.spec.intrinsics,
            problem.dataset.reference_pose, problem.cfg);
  const std::string path = (fs::temp_directory_path() / "sci3d_optstate.scos").string();
  write_optimizer_state(path, result);
  TrainResult loaded;
  read_optimizer_state(path, loaded);
  CHECK(loaded.adam_density.m == result.adam_density.m);
  CHECK(loaded.adam_sh.v == result.adam_sh.v);
  CHECK(loaded.adam_pose.step == result.adam_pose.step);
  CHECK(loaded.trajectory.vector() == result.trajectory.vector());
  fs::remove(path);
}

TEST_SUITE_END();
