#include "sci3d/geometry.hpp"

#include <Eigen/LU>
#include <Eigen/SVD>
#include <cmath>

namespace sci3d {

namespace {

constexpr double kSmallAngle = 1e-3;  // below this, series expansions are used
constexpr double kLogDomainMargin = 1e-6;

// (1 - cos t) / t^2 and (t - sin t) / t^3, stable near t = 0.
double coef_one_minus_cos(double t) {
  if (t < kSmallAngle) {
    const double t2 = t * t;
    return 0.5 - t2 / 24.0 + t2 * t2 / 720.0;
  }
  return (1.0 - std::cos(t)) / (t * t);
}

double coef_t_minus_sin(double t) {
  if (t < kSmallAngle) {
    const double t2 = t * t;
    return 1.0 / 6.0 - t2 / 120.0 + t2 * t2 / 5040.0;
  }
  return (t - std::sin(t)) / (t * t * t);
}

// Coefficient of K^2 in V^-1: 1/t^2 - (1 + cos t) / (2 t sin t).
double coef_vinv(double t) {
  if (t < 1e-2) {
    const double t2 = t * t;
    return 1.0 / 12.0 + t2 / 720.0 + t2 * t2 / 30240.0;
  }
  return 1.0 / (t * t) - (1.0 + std::cos(t)) / (2.0 * t * std::sin(t));
}

}  // namespace

void Intrinsics::validate() const {
  if (!(fx > 0) || !(fy > 0)) throw Error("intrinsics: focal lengths must be positive");
  if (!(cx > 0 && cx < width) || !(cy > 0 && cy < height))
    throw Error("intrinsics: principal point must lie inside the image");
}

Eigen::Matrix3d skew(const Eigen::Vector3d& v) {
  Eigen::Matrix3d s;
  s << 0, -v.z(), v.y(),
      v.z(), 0, -v.x(),
      -v.y(), v.x(), 0;
  return s;
}

Pose compose(const Pose& a, const Pose& b) {
  Pose out;
  out.rotation = a.rotation * b.rotation;
  out.translation = a.rotation * b.translation + a.translation;
  return out;
}

Pose inverse(const Pose& p) {
  Pose out;
  out.rotation = p.rotation.transpose();
  out.translation = -(out.rotation * p.translation);
  return out;
}

Pose orthonormalized(const Pose& p) {
  Eigen::JacobiSVD<Eigen::Matrix3d> svd(p.rotation, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Eigen::Matrix3d r = svd.matrixU() * svd.matrixV().transpose();
  if (r.determinant() < 0) {
    Eigen::Matrix3d u = svd.matrixU();
    u.col(2) *= -1.0;
    r = u * svd.matrixV().transpose();
  }
  Pose out;
  out.rotation = r;
  out.translation = p.translation;
  return out;
}

Pose se3_exp(const Twist& xi) {
  const double theta = xi.phi.norm();
  const Eigen::Matrix3d k = skew(xi.phi);
  const Eigen::Matrix3d k2 = k * k;

  const double a = theta < kSmallAngle
                       ? 1.0 - theta * theta / 6.0 + theta * theta * theta * theta / 120.0
                       : std::sin(theta) / theta;  // sin t / t
  const double b = coef_one_minus_cos(theta);
  const double c = coef_t_minus_sin(theta);

  Pose out;
  out.rotation = Eigen::Matrix3d::Identity() + a * k + b * k2;
  const Eigen::Matrix3d v = Eigen::Matrix3d::Identity() + b * k + c * k2;
  out.translation = v * xi.rho;
  return out;
}

Twist se3_log(const Pose& pose) {
  const Eigen::Matrix3d& r = pose.rotation;
  const Eigen::Vector3d axis_sin(0.5 * (r(2, 1) - r(1, 2)),
                                 0.5 * (r(0, 2) - r(2, 0)),
                                 0.5 * (r(1, 0) - r(0, 1)));  // sin(t) * axis
  const double cos_t = std::min(1.0, std::max(-1.0, 0.5 * (r.trace() - 1.0)));
  const double sin_t = std::min(1.0, axis_sin.norm());
  const double theta = std::atan2(sin_t, cos_t);

  if (theta >= M_PI - kLogDomainMargin)
    throw AngleNearPi("se3_log: rotation angle within 1e-6 of pi");

  Twist xi;
  if (theta < kSmallAngle) {
    // log R ~ (R - R^T)/2 * (1 + t^2/6)
    xi.phi = axis_sin * (1.0 + theta * theta / 6.0);
  } else {
    xi.phi = axis_sin * (theta / sin_t);
  }

  const Eigen::Matrix3d k = skew(xi.phi);
  const Eigen::Matrix3d vinv =
      Eigen::Matrix3d::Identity() - 0.5 * k + coef_vinv(theta) * (k * k);
  xi.rho = vinv * pose.translation;
  return xi;
}

Pose interpolate_pose(const Pose& t_start, const Pose& t_end, int frame_index, int frame_count,
                      InterpConvention convention) {
  if (frame_count < 1) throw Error("interpolate_pose: frame count must be >= 1");
  if (frame_index < 1 || frame_index > frame_count)
    throw Error("interpolate_pose: frame index out of range");

  double s;
  if (convention == InterpConvention::LiteralIOverN) {
    s = static_cast<double>(frame_index) / frame_count;
  } else {
    s = frame_count == 1 ? 0.0
                         : static_cast<double>(frame_index - 1) / (frame_count - 1);
  }
  if (convention == InterpConvention::EndpointExact && frame_index == 1) return t_start;

  const Twist full = se3_log(compose(inverse(t_start), t_end));
  const Twist scaled(s * full.rho, s * full.phi);
  return compose(t_start, se3_exp(scaled));
}

Eigen::Vector3d pixel_camera_direction(const Intrinsics& intr, int row, int col) {
  return Eigen::Vector3d((col + 0.5 - intr.cx) / intr.fx,
                         (row + 0.5 - intr.cy) / intr.fy,
                         1.0);
}

Ray generate_ray(const Intrinsics& intr, const Pose& pose, int row, int col) {
  if (row < 0 || row >= intr.height || col < 0 || col >= intr.width)
    throw PixelOutOfBounds("generate_ray: pixel (" + std::to_string(row) + ", " +
                           std::to_string(col) + ") outside " + std::to_string(intr.height) +
                           "x" + std::to_string(intr.width));
  Ray ray;
  ray.origin = pose.translation;
  ray.direction = (pose.rotation * pixel_camera_direction(intr, row, col)).normalized();
  ray.pixel_row = row;
  ray.pixel_col = col;
  return ray;
}

}  // namespace sci3d
