#include "sci3d/dataset.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "sci3d/io.hpp"
#include "sci3d/radiance_grid.hpp"
#include "sci3d/rng.hpp"

namespace sci3d {

namespace {

namespace fs = std::filesystem;

std::string vec3_to_string(const Eigen::Vector3d& v) {
  std::ostringstream out;
  out.precision(17);
  out << v.x() << " " << v.y() << " " << v.z();
  return out.str();
}

Eigen::Vector3d vec3_from_string(const std::string& s, const std::string& what) {
  std::istringstream in(s);
  Eigen::Vector3d v;
  if (!(in >> v.x() >> v.y() >> v.z())) throw ConfigError(what + ": expected three numbers");
  return v;
}

}  // namespace

Dataset make_dataset(const DatasetSpec& spec) {
  spec.scene.validate();
  spec.intrinsics.validate();
  spec.sampling.validate();
  if (spec.frame_count < 1) throw Error("make_dataset: frame count must be >= 1");

  Dataset ds;
  ds.spec = spec;
  ds.reference_pose = spec.trajectory_start;

  const RadianceGrid baked = bake_scene(spec.scene, spec.bake_resolution);

  SamplingConfig sampling = spec.sampling;
  sampling.white_background = sampling.white_background || spec.scene.white_background;

  ds.gt_poses.reserve(spec.frame_count);
  ds.gt_frames.reserve(spec.frame_count);
  for (int i = 1; i <= spec.frame_count; ++i) {
    const Pose pose = interpolate_pose(spec.trajectory_start, spec.trajectory_end, i,
                                       spec.frame_count, spec.interp_convention);
    ds.gt_poses.push_back(pose);
    ds.gt_frames.push_back(render_frame(baked, pose, spec.intrinsics, sampling,
                                        hash_mix(spec.seed, static_cast<uint64_t>(i)),
                                        spec.threads));
  }

  ds.masks = generate_masks(spec.intrinsics.height, spec.intrinsics.width, spec.frame_count,
                            spec.overlap_rate, spec.seed, spec.mask_mode);
  ds.measurement = encode_measurement(ds.gt_frames, ds.masks, spec.noise_sigma, spec.seed);
  return ds;
}

void save_dataset(const Dataset& dataset, const std::string& dir, bool export_png) {
  fs::create_directories(dir);
  const fs::path root(dir);

  write_measurement((root / "measurement.scms").string(), dataset.measurement);
  write_masks((root / "masks.scmk").string(), dataset.masks);
  write_frames((root / "frames_gt.sctf").string(), dataset.gt_frames);
  write_poses((root / "poses_gt.txt").string(), dataset.gt_poses);
  write_poses((root / "trajectory_gt.txt").string(),
              {dataset.spec.trajectory_start, dataset.spec.trajectory_end});
  write_poses((root / "reference_pose.txt").string(), {dataset.reference_pose});

  IniConfig manifest;
  manifest.set("scene", "name", dataset.spec.scene.name);
  manifest.set("scene", "white_background", dataset.spec.scene.white_background ? "true" : "false");
  manifest.set("grid", "bbox_min", vec3_to_string(dataset.spec.scene.bbox_min));
  manifest.set("grid", "bbox_max", vec3_to_string(dataset.spec.scene.bbox_max));
  const Intrinsics& intr = dataset.spec.intrinsics;
  manifest.set("camera", "fx", std::to_string(intr.fx));
  manifest.set("camera", "fy", std::to_string(intr.fy));
  manifest.set("camera", "cx", std::to_string(intr.cx));
  manifest.set("camera", "cy", std::to_string(intr.cy));
  manifest.set("camera", "width", std::to_string(intr.width));
  manifest.set("camera", "height", std::to_string(intr.height));
  manifest.set("sci", "n", std::to_string(dataset.spec.frame_count));
  manifest.set("sci", "overlap_rate", std::to_string(dataset.spec.overlap_rate));
  manifest.set("sci", "noise_sigma", std::to_string(dataset.spec.noise_sigma));
  manifest.set("sci", "seed", std::to_string(dataset.spec.seed));
  std::ostringstream tn, tf;
  tn.precision(17);
  tf.precision(17);
  tn << dataset.spec.sampling.t_near;
  tf << dataset.spec.sampling.t_far;
  manifest.set("sampling", "t_near", tn.str());
  manifest.set("sampling", "t_far", tf.str());
  manifest.set("sampling", "n_samples", std::to_string(dataset.spec.sampling.n_samples));
  manifest.set("sampling", "stratified", dataset.spec.sampling.stratified ? "true" : "false");

  std::ofstream out(root / "manifest.ini");
  if (!out) throw IoError("cannot write dataset manifest");
  out << manifest.serialize();
  out.close();

  if (export_png) {
    for (std::size_t i = 0; i < dataset.gt_frames.size(); ++i)
      write_png((root / ("frame_gt_" + std::to_string(i) + ".png")).string(),
                dataset.gt_frames[i]);
    const Measurement& m = dataset.measurement;
    Image preview(m.height, m.width, m.channels);
    // scale the measurement into [0,1] for inspection
    double peak = 1e-6;
    for (double v : m.pixels) peak = std::max(peak, v);
    for (std::size_t i = 0; i < m.pixels.size(); ++i)
      preview.data[i] = static_cast<float>(m.pixels[i] / peak);
    write_png((root / "measurement_preview.png").string(), preview);
  }
}

DatasetSpec load_manifest(const std::string& dir) {
  const fs::path root(dir);
  const IniConfig manifest = IniConfig::load((root / "manifest.ini").string());
  DatasetSpec spec;
  spec.scene.name = manifest.get_string("scene", "name", "unknown");
  spec.scene.white_background = manifest.get_bool("scene", "white_background", false);
  spec.scene.bbox_min =
      vec3_from_string(manifest.get_required("grid", "bbox_min"), "manifest bbox_min");
  spec.scene.bbox_max =
      vec3_from_string(manifest.get_required("grid", "bbox_max"), "manifest bbox_max");
  spec.intrinsics.fx = manifest.get_double("camera", "fx", 0.0);
  spec.intrinsics.fy = manifest.get_double("camera", "fy", 0.0);
  spec.intrinsics.cx = manifest.get_double("camera", "cx", 0.0);
  spec.intrinsics.cy = manifest.get_double("camera", "cy", 0.0);
  spec.intrinsics.width = static_cast<int>(manifest.get_int("camera", "width", 0));
  spec.intrinsics.height = static_cast<int>(manifest.get_int("camera", "height", 0));
  spec.intrinsics.validate();
  spec.frame_count = static_cast<int>(manifest.get_int("sci", "n", 0));
  spec.overlap_rate = manifest.get_double("sci", "overlap_rate", 0.0);
  spec.noise_sigma = manifest.get_double("sci", "noise_sigma", 0.0);
  spec.seed = static_cast<uint64_t>(manifest.get_int("sci", "seed", 0));
  spec.sampling.t_near = manifest.get_double("sampling", "t_near", 0.0);
  spec.sampling.t_far = manifest.get_double("sampling", "t_far", 1.0);
  spec.sampling.n_samples = static_cast<int>(manifest.get_int("sampling", "n_samples", 64));
  spec.sampling.stratified = manifest.get_bool("sampling", "stratified", false);
  return spec;
}

Dataset load_dataset(const std::string& dir) {
  const fs::path root(dir);
  Dataset ds;
  ds.measurement = read_measurement((root / "measurement.scms").string());
  ds.masks = read_masks((root / "masks.scmk").string());
  ds.spec = load_manifest(dir);

  if (fs::exists(root / "frames_gt.sctf"))
    ds.gt_frames = read_frames((root / "frames_gt.sctf").string());
  if (fs::exists(root / "poses_gt.txt")) ds.gt_poses = read_poses((root / "poses_gt.txt").string());
  if (fs::exists(root / "trajectory_gt.txt")) {
    const auto endpoints = read_poses((root / "trajectory_gt.txt").string());
    if (endpoints.size() == 2) {
      ds.spec.trajectory_start = endpoints[0];
      ds.spec.trajectory_end = endpoints[1];
    }
  }
  const auto reference = read_poses((root / "reference_pose.txt").string());
  if (reference.size() != 1) throw IoError("dataset: reference_pose.txt must hold one pose");
  ds.reference_pose = reference[0];
  return ds;
}

DatasetSpec dataset_spec_from_config(const IniConfig& cfg) {
  DatasetSpec spec;
  spec.scene = preset_scene(cfg.get_string("scene", "preset", "blocks"));
  const long bake = cfg.get_int("scene", "bake_resolution", 128);
  spec.bake_resolution = Eigen::Vector3i::Constant(static_cast<int>(bake));

  spec.intrinsics.width = static_cast<int>(cfg.get_int("camera", "width", 64));
  spec.intrinsics.height = static_cast<int>(cfg.get_int("camera", "height", 64));
  spec.intrinsics.fx = cfg.get_double("camera", "fx", 88.0);
  spec.intrinsics.fy = cfg.get_double("camera", "fy", spec.intrinsics.fx);
  spec.intrinsics.cx = cfg.get_double("camera", "cx", spec.intrinsics.width * 0.5);
  spec.intrinsics.cy = cfg.get_double("camera", "cy", spec.intrinsics.height * 0.5);

  const Eigen::Vector3d position = vec3_from_string(
      cfg.get_string("camera", "position", "0 0 -2.5"), "[camera] position");
  spec.trajectory_start.translation = position;

  const Eigen::Vector3d translation = vec3_from_string(
      cfg.get_string("trajectory", "translation", "0.2 0 0"), "[trajectory] translation");
  const Eigen::Vector3d axis_angle = vec3_from_string(
      cfg.get_string("trajectory", "rotation_axis_angle", "0 0 0"),
      "[trajectory] rotation_axis_angle");
  spec.trajectory_end = spec.trajectory_start;
  spec.trajectory_end.translation += translation;
  spec.trajectory_end.rotation = se3_exp(Twist(Eigen::Vector3d::Zero(), axis_angle)).rotation *
                                 spec.trajectory_start.rotation;

  spec.frame_count = static_cast<int>(cfg.get_int("sci", "n", 8));
  spec.overlap_rate = cfg.get_double("sci", "overlap_rate", 0.25);
  spec.noise_sigma = cfg.get_double("sci", "noise_sigma", 0.0);
  spec.seed = static_cast<uint64_t>(cfg.get_int("dataset", "seed", 1));
  spec.mask_mode = cfg.get_string("sci", "mask_mode", "exact") == "bernoulli"
                       ? MaskMode::Bernoulli
                       : MaskMode::ExactCount;

  spec.sampling.t_near = cfg.get_double("sampling", "t_near", 1.2);
  spec.sampling.t_far = cfg.get_double("sampling", "t_far", 4.2);
  spec.sampling.n_samples = static_cast<int>(cfg.get_int("sampling", "n_samples", 96));
  spec.sampling.stratified = cfg.get_bool("sampling", "stratified", false);
  spec.threads = static_cast<int>(cfg.get_int("dataset", "threads", 0));
  return spec;
}

}  // namespace sci3d
