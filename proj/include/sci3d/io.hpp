#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sci3d/geometry.hpp"
#include "sci3d/image.hpp"
#include "sci3d/radiance_grid.hpp"
#include "sci3d/sci_model.hpp"

namespace sci3d {

// All binary formats are little-endian. Layouts:
//   grid        "SCGR" | u32 version | 3x u32 resolution | 6x f64 bbox (min, max)
//               | u32 sh_degree | density f32 (x-fastest) | sh coeffs f32
//   masks       "SCMK" | u32 version | u32 N, H, W | u64 seed | f32 target_or
//               | N*H*W bytes in {0,1}
//   measurement "SCMS" | u32 H, W, channels | f32 noise_sigma | f32 pixels
//   tensor      "SCTF" | u32 version | u32 rank | rank x u32 dims
//               | u32 dtype tag (1 = f32) | payload, row-major
// Pose text files carry one pose per line as 12 whitespace-separated
// decimals, the row-major 3x4 matrix [R | t].

void write_grid(const std::string& path, const RadianceGrid& grid);
RadianceGrid read_grid(const std::string& path);

void write_masks(const std::string& path, const MaskStack& stack);
MaskStack read_masks(const std::string& path);

void write_measurement(const std::string& path, const Measurement& measurement);
Measurement read_measurement(const std::string& path);

void write_tensor(const std::string& path, const std::vector<uint32_t>& dims,
                  const std::vector<float>& data);
std::vector<float> read_tensor(const std::string& path, std::vector<uint32_t>& dims);

/// Frames stored as one rank-4 tensor (N, H, W, C).
void write_frames(const std::string& path, const std::vector<Image>& frames);
std::vector<Image> read_frames(const std::string& path);

void write_poses(const std::string& path, const std::vector<Pose>& poses);
std::vector<Pose> read_poses(const std::string& path);

/// 8-bit PNG export for inspection (1 or 3 channels; values clamped to [0,1]).
void write_png(const std::string& path, const Image& image);

}  // namespace sci3d
