#pragma once

#include <Eigen/Core>

#include "sci3d/errors.hpp"

namespace sci3d {

/// Rigid transform in SE(3), world-from-camera convention.
struct Pose {
  Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
  Eigen::Vector3d translation = Eigen::Vector3d::Zero();

  static Pose identity() { return Pose{}; }
};

/// Element of se(3): translational part rho, rotational part phi (radians).
struct Twist {
  Eigen::Vector3d rho = Eigen::Vector3d::Zero();
  Eigen::Vector3d phi = Eigen::Vector3d::Zero();

  Twist() = default;
  Twist(const Eigen::Vector3d& rho_, const Eigen::Vector3d& phi_) : rho(rho_), phi(phi_) {}

  /// Packs as [rho, phi] into a 6-vector (the optimizer's parameter order).
  Eigen::Matrix<double, 6, 1> vector() const {
    Eigen::Matrix<double, 6, 1> v;
    v << rho, phi;
    return v;
  }
  static Twist from_vector(const Eigen::Matrix<double, 6, 1>& v) {
    return Twist(v.head<3>(), v.tail<3>());
  }
};

/// Pinhole camera intrinsics, pixel units.
struct Intrinsics {
  double fx = 0, fy = 0;
  double cx = 0, cy = 0;
  int width = 0, height = 0;

  void validate() const;
};

struct Ray {
  Eigen::Vector3d origin = Eigen::Vector3d::Zero();
  Eigen::Vector3d direction = Eigen::Vector3d::UnitZ();  // unit norm
  int pixel_row = 0;
  int pixel_col = 0;
};

/// Which parameter s(i) the pose interpolation uses. EndpointExact maps
/// frame 1 to T_start and frame N to T_end; LiteralIOverN uses s = i/N,
/// which reaches T_end at i = N but not T_start at i = 1 (kept selectable
/// for strict replication runs).
enum class InterpConvention { EndpointExact, LiteralIOverN };

Eigen::Matrix3d skew(const Eigen::Vector3d& v);

Pose compose(const Pose& a, const Pose& b);
Pose inverse(const Pose& p);

/// Projects the rotation back onto SO(3) (polar factor) and returns the
/// cleaned pose. Used after optimizer steps that touch stored matrices.
Pose orthonormalized(const Pose& p);

/// Closed-form exponential map se(3) -> SE(3) (Rodrigues), with a series
/// branch for small rotation angles. Total on finite input.
Pose se3_exp(const Twist& xi);

/// Inverse of se3_exp. Throws AngleNearPi when the rotation angle is
/// >= pi - 1e-6 (logarithm not unique there).
Twist se3_log(const Pose& pose);

/// Constant-velocity screw interpolation between the exposure endpoints:
/// T(s) = T_start * exp(s * log(T_start^-1 * T_end)). Frame indices are
/// 1-based; s = (i-1)/(N-1), or i/N under LiteralIOverN.
Pose interpolate_pose(const Pose& t_start, const Pose& t_end, int frame_index, int frame_count,
                      InterpConvention convention = InterpConvention::EndpointExact);

/// Camera-frame ray direction for a pixel, before rotation into the world.
/// Pixel-center convention: the ray passes through (col + 0.5, row + 0.5).
Eigen::Vector3d pixel_camera_direction(const Intrinsics& intr, int row, int col);

/// Ray through the given pixel. Origin is the camera center (pose
/// translation); the camera looks down +z. Throws PixelOutOfBounds.
Ray generate_ray(const Intrinsics& intr, const Pose& pose, int row, int col);

}  // namespace sci3d
