#pragma once

#include <string>
#include <vector>

#include "sci3d/config.hpp"
#include "sci3d/geometry.hpp"
#include "sci3d/sci_model.hpp"
#include "sci3d/toy_scene.hpp"

namespace sci3d {

struct DatasetSpec {
  ToyScene scene;
  Pose trajectory_start;  // ground-truth exposure endpoints
  Pose trajectory_end;
  Intrinsics intrinsics;
  int frame_count = 8;          // compression ratio N
  double overlap_rate = 0.25;
  double noise_sigma = 0.0;
  uint64_t seed = 0;
  Eigen::Vector3i bake_resolution = Eigen::Vector3i(128, 128, 128);
  SamplingConfig sampling;      // used to render the ground-truth frames
  InterpConvention interp_convention = InterpConvention::EndpointExact;
  MaskMode mask_mode = MaskMode::ExactCount;
  int threads = 1;
};

/// In-memory dataset: everything the trainer and the baseline consume, plus
/// the ground truth the evaluator compares against.
struct Dataset {
  Measurement measurement;
  MaskStack masks;
  std::vector<Image> gt_frames;
  std::vector<Pose> gt_poses;    // N interpolated poses
  Pose reference_pose;           // known rig anchor handed to the trainer
  DatasetSpec spec;
};

/// Bakes the scene, renders the N ground-truth frames at the interpolated
/// poses, and encodes the measurement.
Dataset make_dataset(const DatasetSpec& spec);

/// Persists all artifacts under dir: measurement.scms, masks.scmk,
/// frames_gt.sctf, poses_gt.txt, trajectory_gt.txt, reference_pose.txt,
/// manifest.ini (and per-frame PNGs when export_png is set).
void save_dataset(const Dataset& dataset, const std::string& dir, bool export_png = false);

/// Loads the artifacts the decoders need (measurement, masks, manifest
/// metadata and ground truth when present).
Dataset load_dataset(const std::string& dir);

/// Reads only the manifest (camera, bbox, sampling, SCI parameters) — enough
/// to render from a checkpoint without the measurement files.
DatasetSpec load_manifest(const std::string& dir);

/// Reads a DatasetSpec from a config file's [scene]/[camera]/[sci]/[sampling]
/// sections.
DatasetSpec dataset_spec_from_config(const IniConfig& cfg);

}  // namespace sci3d
