#include "sci3d/trainer.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "sci3d/parallel.hpp"
#include "sci3d/rng.hpp"

namespace sci3d {

namespace {

constexpr uint64_t kPoseSalt = 0x706f7365ull;    // "pose"
constexpr uint64_t kRaySalt = 0x72617973ull;     // "rays"
constexpr uint64_t kTvSalt = 0x74767265ull;      // "tvre"
constexpr uint64_t kJitterSalt = 0x6a697474ull;  // "jitt"

uint64_t ray_jitter_key(uint64_t salt, int width, const PixelCoord& px, int frame) {
  return hash_mix(salt, static_cast<uint64_t>(px.row) * width + px.col,
                  static_cast<uint64_t>(frame));
}

/// Frame poses for the trajectory plus, optionally, the poses under +/-
/// epsilon perturbation of each of the 12 twist parameters.
struct FramePoses {
  std::vector<Pose> nominal;                    // [frame]
  std::vector<std::array<Pose, 24>> perturbed;  // [frame][param * 2 + side]
};

FramePoses compute_frame_poses(const Pose& reference, const TrajectoryParams& traj, int n,
                               const TrainConfig& cfg, bool with_perturbations) {
  FramePoses poses;
  poses.nominal.reserve(n);
  for (int i = 1; i <= n; ++i)
    poses.nominal.push_back(trajectory_pose(reference, traj, i, n, cfg.interp_convention));

  if (with_perturbations) {
    poses.perturbed.resize(n);
    const Eigen::Matrix<double, 12, 1> base = traj.vector();
    for (int p = 0; p < 12; ++p) {
      for (int side = 0; side < 2; ++side) {
        Eigen::Matrix<double, 12, 1> v = base;
        v[p] += side == 0 ? cfg.pose_fd_epsilon : -cfg.pose_fd_epsilon;
        const TrajectoryParams perturbed = TrajectoryParams::from_vector(v);
        for (int i = 1; i <= n; ++i)
          poses.perturbed[i - 1][p * 2 + side] =
              trajectory_pose(reference, perturbed, i, n, cfg.interp_convention);
      }
    }
  }
  return poses;
}

std::vector<std::vector<RenderedFrameValue>> render_pixels(
    const RadianceGrid& grid, const MaskStack& stack, const Intrinsics& intr,
    const FramePoses& poses, const SamplingConfig& sampling,
    const std::vector<PixelCoord>& pixels, uint64_t jitter_salt) {
  std::vector<std::vector<RenderedFrameValue>> rendered(pixels.size());
  for (std::size_t r = 0; r < pixels.size(); ++r) {
    const PixelCoord px = pixels[r];
    for (int i = 0; i < stack.n; ++i) {
      if (!stack.at(i, px.row, px.col)) continue;
      const Ray ray = generate_ray(intr, poses.nominal[i], px.row, px.col);
      const uint64_t key = ray_jitter_key(jitter_salt, stack.width, px, i);
      rendered[r].push_back({i, render_ray(grid, ray, sampling, key).color});
    }
  }
  return rendered;
}

/// Stochastic estimate of grad(tv_weight * mean-per-voxel TV of activated
/// density), accumulated into the density gradient.
void add_tv_gradient(const RadianceGrid& grid, GradBuffer& grads, const TrainConfig& cfg,
                     long iter) {
  Rng rng(hash_mix(cfg.seed, kTvSalt, static_cast<uint64_t>(iter)));
  const Eigen::Vector3i res = grid.resolution;
  const double scale = cfg.tv_weight / cfg.tv_samples;
  constexpr double kEps2 = 1e-12;

  for (int s = 0; s < cfg.tv_samples; ++s) {
    const int ix = static_cast<int>(rng.uniform_below(res.x()));
    const int iy = static_cast<int>(rng.uniform_below(res.y()));
    const int iz = static_cast<int>(rng.uniform_below(res.z()));
    const std::size_t v = grid.voxel_index(ix, iy, iz);
    const double sigma_v = softplus(grid.density_raw[v]);

    std::size_t neighbor[3];
    double diff[3];
    bool present[3] = {false, false, false};
    if (ix + 1 < res.x()) { neighbor[0] = grid.voxel_index(ix + 1, iy, iz); present[0] = true; }
    if (iy + 1 < res.y()) { neighbor[1] = grid.voxel_index(ix, iy + 1, iz); present[1] = true; }
    if (iz + 1 < res.z()) { neighbor[2] = grid.voxel_index(ix, iy, iz + 1); present[2] = true; }

    double sq = kEps2;
    for (int a = 0; a < 3; ++a) {
      diff[a] = present[a] ? softplus(grid.density_raw[neighbor[a]]) - sigma_v : 0.0;
      sq += diff[a] * diff[a];
    }
    const double energy = std::sqrt(sq);
    double center = 0.0;
    for (int a = 0; a < 3; ++a) {
      if (!present[a]) continue;
      const double d = diff[a] / energy;
      grads.density[neighbor[a]] += scale * d * sigmoid(grid.density_raw[neighbor[a]]);
      center -= d;
    }
    grads.density[v] += scale * center * sigmoid(grid.density_raw[v]);
  }
}

}  // namespace

void TrainConfig::validate() const {
  if (iterations < 0) throw Error("train: iterations must be >= 0");
  if (batch_rays < 1) throw Error("train: batch_rays must be >= 1");
  auto check_lr = [](double start, double end, const char* what) {
    if (!(end > 0.0) || !(end <= start))
      throw Error(std::string("train: require 0 < ") + what + "_end <= " + what + "_start");
  };
  check_lr(lr_scene_start, lr_scene_end, "lr_scene");
  check_lr(lr_pose_start, lr_pose_end, "lr_pose");
  if (pose_init_trans_sigma < 0.0) throw Error("train: pose_init_trans_sigma must be >= 0");
  if (sh_degree < 0 || sh_degree > 2) throw Error("train: sh_degree must be in {0,1,2}");
  if ((grid_resolution.array() < 2).any()) throw Error("train: grid resolution must be >= 2");
  if (!((bbox_min.array() < bbox_max.array()).all()))
    throw Error("train: bbox_min must be componentwise below bbox_max");
  if (tv_weight < 0.0) throw Error("train: tv_weight must be >= 0");
  if (tv_samples < 0) throw Error("train: tv_samples must be >= 0");
  if (threads < 0) throw Error("train: threads must be >= 0 (0 = auto)");
  if (!(pose_fd_epsilon > 0.0)) throw Error("train: pose_fd_epsilon must be > 0");
  sampling.validate();
}

TrajectoryParams init_trajectory(const TrainConfig& cfg) {
  TrajectoryParams traj;
  Rng rng(hash_mix(cfg.seed, kPoseSalt));
  for (int a = 0; a < 3; ++a) traj.twist_start.rho[a] = cfg.pose_init_trans_sigma * rng.normal();
  for (int a = 0; a < 3; ++a) traj.twist_end.rho[a] = cfg.pose_init_trans_sigma * rng.normal();
  return traj;
}

Pose trajectory_pose(const Pose& reference, const TrajectoryParams& traj, int frame_index,
                     int frame_count, InterpConvention convention) {
  const Pose t_start = compose(reference, se3_exp(traj.twist_start));
  const Pose t_end = compose(reference, se3_exp(traj.twist_end));
  return interpolate_pose(t_start, t_end, frame_index, frame_count, convention);
}

double lr_schedule(double start, double end, long iter, long total) {
  if (iter < 0 || iter > total) throw Error("lr_schedule: iter must be in [0, total]");
  if (iter == 0) return start;
  if (iter == total) return end;
  return start * std::pow(end / start, static_cast<double>(iter) / static_cast<double>(total));
}

void adam_step(std::span<double> params, std::span<const double> grads, AdamState& state,
               double lr, double beta1, double beta2, double eps, int threads) {
  if (params.size() != grads.size() || params.size() != state.m.size() ||
      params.size() != state.v.size())
    throw ShapeMismatch("adam_step: parameter/gradient/state sizes disagree");

  state.step += 1;
  const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(state.step));

  parallel_chunks(params.size(), threads, [&](std::size_t begin, std::size_t end, int) {
    for (std::size_t i = begin; i < end; ++i) {
      const double g = grads[i];
      state.m[i] = beta1 * state.m[i] + (1.0 - beta1) * g;
      state.v[i] = beta2 * state.v[i] + (1.0 - beta2) * g * g;
      const double m_hat = state.m[i] / bc1;
      const double v_hat = state.v[i] / bc2;
      params[i] -= lr * m_hat / (std::sqrt(v_hat) + eps);
    }
  });
}

void write_loss_csv(const std::string& path, const std::vector<LossRecord>& history) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  out << "iter,loss,lr_scene,lr_pose\n";
  char buf[128];
  for (const LossRecord& rec : history) {
    std::snprintf(buf, sizeof buf, "%ld,%.17g,%.17g,%.17g\n", rec.iter, rec.loss, rec.lr_scene,
                  rec.lr_pose);
    out << buf;
  }
  if (!out) throw IoError("write failed for '" + path + "'");
}

std::vector<std::vector<RenderedFrameValue>> render_batch(
    const RadianceGrid& grid, const MaskStack& stack, const Intrinsics& intr,
    const Pose& reference, const TrajectoryParams& traj, const TrainConfig& cfg,
    const std::vector<PixelCoord>& pixels, uint64_t jitter_salt) {
  const FramePoses poses = compute_frame_poses(reference, traj, stack.n, cfg, false);
  std::vector<std::vector<RenderedFrameValue>> rendered(pixels.size());

  const int threads = cfg.threads == 0 ? default_thread_count() : cfg.threads;
  parallel_chunks(pixels.size(), threads, [&](std::size_t begin, std::size_t end, int) {
    const std::vector<PixelCoord> span(pixels.begin() + begin, pixels.begin() + end);
    auto part = render_pixels(grid, stack, intr, poses, cfg.sampling, span, jitter_salt);
    for (std::size_t r = 0; r < part.size(); ++r) rendered[begin + r] = std::move(part[r]);
  });
  return rendered;
}

double evaluate_batch_loss(const RadianceGrid& grid, const Measurement& measurement,
                           const MaskStack& stack, const Intrinsics& intr, const Pose& reference,
                           const TrajectoryParams& traj, const TrainConfig& cfg,
                           const std::vector<PixelCoord>& pixels, uint64_t jitter_salt) {
  const auto rendered = render_batch(grid, stack, intr, reference, traj, cfg, pixels, jitter_salt);
  return sci_loss(measurement, stack, pixels, rendered, cfg.normalize_by_k).loss;
}

BatchGradients accumulate_batch_gradients(const RadianceGrid& grid,
                                          const Measurement& measurement, const MaskStack& stack,
                                          const Intrinsics& intr, const Pose& reference,
                                          const TrajectoryParams& traj, const TrainConfig& cfg,
                                          const std::vector<PixelCoord>& pixels,
                                          uint64_t jitter_salt, GradBuffer& scene_grads,
                                          bool want_pose_grads) {
  const int n = stack.n;
  const FramePoses poses = compute_frame_poses(reference, traj, n, cfg, want_pose_grads);
  const double inv_2eps = 0.5 / cfg.pose_fd_epsilon;

  const int threads = cfg.threads == 0 ? default_thread_count() : cfg.threads;
  const int chunks = std::max(
      1,
      static_cast<int>(std::min<std::size_t>(static_cast<std::size_t>(threads), pixels.size())));

  // Per-chunk buffers, merged in chunk order afterwards so the reduction is
  // deterministic under any scheduling.
  std::vector<GradBuffer> chunk_grads(chunks);
  std::vector<Eigen::Matrix<double, 12, 1>> chunk_twist(chunks,
                                                        Eigen::Matrix<double, 12, 1>::Zero());
  std::vector<double> chunk_loss(chunks, 0.0);

  parallel_chunks(pixels.size(), chunks, [&](std::size_t begin, std::size_t end, int chunk) {
    GradBuffer& grads = chunk_grads[chunk];
    grads.init_like(grid);

    std::vector<RayCache> caches(n);
    std::vector<Ray> rays(n);
    std::vector<PixelCoord> one_pixel(1);
    std::vector<std::vector<RenderedFrameValue>> one_rendered(1);

    for (std::size_t r = begin; r < end; ++r) {
      const PixelCoord px = pixels[r];
      one_pixel[0] = px;
      one_rendered[0].clear();

      for (int i = 0; i < n; ++i) {
        if (!stack.at(i, px.row, px.col)) continue;
        rays[i] = generate_ray(intr, poses.nominal[i], px.row, px.col);
        const uint64_t key = ray_jitter_key(jitter_salt, stack.width, px, i);
        const RenderOutput out = render_ray_cached(grid, rays[i], cfg.sampling, key, caches[i]);
        one_rendered[0].push_back({i, out.color});
      }

      const SciLossResult loss =
          sci_loss(measurement, stack, one_pixel, one_rendered, cfg.normalize_by_k);
      chunk_loss[chunk] += loss.loss;

      const Eigen::Vector3d d_cam = pixel_camera_direction(intr, px.row, px.col);
      for (std::size_t slot = 0; slot < one_rendered[0].size(); ++slot) {
        const int i = one_rendered[0][slot].frame;
        const Eigen::Vector3d upstream = loss.d_rendered[0][slot];
        const uint64_t key = ray_jitter_key(jitter_salt, stack.width, px, i);

        RayGrad ray_grad;
        render_ray_backward_cached(grid, rays[i], cfg.sampling, key, upstream, caches[i], grads,
                                   want_pose_grads ? &ray_grad : nullptr);

        if (want_pose_grads) {
          for (int p = 0; p < 12; ++p) {
            const Pose& plus = poses.perturbed[i][p * 2 + 0];
            const Pose& minus = poses.perturbed[i][p * 2 + 1];
            const Eigen::Vector3d d_origin = (plus.translation - minus.translation) * inv_2eps;
            const Eigen::Vector3d d_dir = ((plus.rotation * d_cam).normalized() -
                                           (minus.rotation * d_cam).normalized()) *
                                          inv_2eps;
            chunk_twist[chunk][p] +=
                ray_grad.d_origin.dot(d_origin) + ray_grad.d_direction.dot(d_dir);
          }
        }
      }
    }
  });

  // Fixed-order merge: chunk 0, 1, 2, ...
  BatchGradients out;
  for (int c = 0; c < chunks; ++c) {
    out.loss += chunk_loss[c];
    out.twist_grads += chunk_twist[c];
  }
  parallel_chunks(scene_grads.density.size(), threads,
                  [&](std::size_t begin, std::size_t end, int) {
                    for (std::size_t i = begin; i < end; ++i)
                      for (int c = 0; c < chunks; ++c)
                        scene_grads.density[i] += chunk_grads[c].density[i];
                  });
  parallel_chunks(scene_grads.sh.size(), threads, [&](std::size_t begin, std::size_t end, int) {
    for (std::size_t i = begin; i < end; ++i)
      for (int c = 0; c < chunks; ++c) scene_grads.sh[i] += chunk_grads[c].sh[i];
  });
  return out;
}

TrajectoryParams trajectory_from_endpoints(const Pose& reference, const Pose& t_start,
                                           const Pose& t_end) {
  const Pose inv_ref = inverse(reference);
  TrajectoryParams traj;
  traj.twist_start = se3_log(compose(inv_ref, t_start));
  traj.twist_end = se3_log(compose(inv_ref, t_end));
  return traj;
}

TrainResult train(const Measurement& measurement, const MaskStack& stack, const Intrinsics& intr,
                  const Pose& reference, const TrainConfig& cfg,
                  const TrajectoryParams* initial_trajectory) {
  cfg.validate();
  intr.validate();
  if (measurement.height != stack.height || measurement.width != stack.width)
    throw DimensionMismatch("train: measurement dims do not match masks");
  if (intr.height != stack.height || intr.width != stack.width)
    throw DimensionMismatch("train: intrinsics do not match mask dims");

  TrainResult result;
  result.grid = make_grid(cfg.grid_resolution, cfg.bbox_min, cfg.bbox_max, cfg.sh_degree,
                          cfg.init_density, cfg.init_gray);
  result.trajectory = initial_trajectory != nullptr ? *initial_trajectory : init_trajectory(cfg);
  result.adam_density.init(result.grid.density_raw.size());
  result.adam_sh.init(result.grid.sh_coeffs.size());
  result.adam_pose.init(12);
  result.history.reserve(cfg.iterations);

  const int threads = cfg.threads == 0 ? default_thread_count() : cfg.threads;
  const std::size_t pixel_count = static_cast<std::size_t>(stack.height) * stack.width;
  Rng ray_rng(hash_mix(cfg.seed, kRaySalt));

  GradBuffer grads;
  grads.init_like(result.grid);
  std::vector<PixelCoord> batch(cfg.batch_rays);

  for (long iter = 0; iter < cfg.iterations; ++iter) {
    for (PixelCoord& px : batch) {
      const uint64_t lin = ray_rng.uniform_below(pixel_count);
      px.row = static_cast<int>(lin / stack.width);
      px.col = static_cast<int>(lin % stack.width);
    }
    const uint64_t salt = hash_mix(cfg.seed, kJitterSalt, static_cast<uint64_t>(iter));

    grads.clear();
    const BatchGradients bg =
        accumulate_batch_gradients(result.grid, measurement, stack, intr, reference,
                                   result.trajectory, cfg, batch, salt, grads,
                                   cfg.optimize_poses);
    if (cfg.tv_weight > 0.0 && cfg.tv_samples > 0)
      add_tv_gradient(result.grid, grads, cfg, iter);

    const double lr_scene = lr_schedule(cfg.lr_scene_start, cfg.lr_scene_end, iter, cfg.iterations);
    const double lr_pose = lr_schedule(cfg.lr_pose_start, cfg.lr_pose_end, iter, cfg.iterations);

    adam_step(result.grid.density_raw, grads.density, result.adam_density, lr_scene,
              cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps, threads);
    adam_step(result.grid.sh_coeffs, grads.sh, result.adam_sh, lr_scene, cfg.adam_beta1,
              cfg.adam_beta2, cfg.adam_eps, threads);
    if (cfg.optimize_poses) {
      Eigen::Matrix<double, 12, 1> params = result.trajectory.vector();
      adam_step(std::span<double>(params.data(), 12),
                std::span<const double>(bg.twist_grads.data(), 12), result.adam_pose, lr_pose,
                cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps);
      result.trajectory = TrajectoryParams::from_vector(params);
    }
    result.history.push_back({iter, bg.loss, lr_scene, lr_pose});
  }
  return result;
}

void write_optimizer_state(const std::string& path, const TrainResult& result) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  out.write("SCOS", 4);
  auto put_u32 = [&](uint32_t v) { out.write(reinterpret_cast<const char*>(&v), 4); };
  auto put_u64 = [&](uint64_t v) { out.write(reinterpret_cast<const char*>(&v), 8); };
  auto put_f64s = [&](const std::vector<double>& v) {
    put_u64(v.size());
    out.write(reinterpret_cast<const char*>(v.data()),
              static_cast<std::streamsize>(v.size() * sizeof(double)));
  };
  put_u32(1);
  for (const AdamState* state : {&result.adam_density, &result.adam_sh, &result.adam_pose}) {
    put_u64(static_cast<uint64_t>(state->step));
    put_f64s(state->m);
    put_f64s(state->v);
  }
  const Eigen::Matrix<double, 12, 1> twists = result.trajectory.vector();
  out.write(reinterpret_cast<const char*>(twists.data()), 12 * sizeof(double));
  if (!out) throw IoError("write failed for '" + path + "'");
}

void read_optimizer_state(const std::string& path, TrainResult& result) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "' for reading");
  char magic[4];
  in.read(magic, 4);
  if (!in || std::string(magic, 4) != "SCOS") throw IoError("'" + path + "': bad magic");
  auto get_u32 = [&]() {
    uint32_t v;
    in.read(reinterpret_cast<char*>(&v), 4);
    return v;
  };
  auto get_u64 = [&]() {
    uint64_t v;
    in.read(reinterpret_cast<char*>(&v), 8);
    return v;
  };
  auto get_f64s = [&](std::vector<double>& v) {
    v.resize(get_u64());
    in.read(reinterpret_cast<char*>(v.data()),
            static_cast<std::streamsize>(v.size() * sizeof(double)));
  };
  if (get_u32() != 1) throw IoError("'" + path + "': unsupported optimizer-state version");
  for (AdamState* state : {&result.adam_density, &result.adam_sh, &result.adam_pose}) {
    state->step = static_cast<long>(get_u64());
    get_f64s(state->m);
    get_f64s(state->v);
  }
  Eigen::Matrix<double, 12, 1> twists;
  in.read(reinterpret_cast<char*>(twists.data()), 12 * sizeof(double));
  if (!in) throw IoError("'" + path + "': unexpected end of file");
  result.trajectory = TrajectoryParams::from_vector(twists);
}

}  // namespace sci3d
