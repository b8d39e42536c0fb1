#include <doctest.h>

#include <Eigen/LU>
#include <cmath>

#include "sci3d/geometry.hpp"
#include "sci3d/rng.hpp"

using namespace sci3d;

namespace {

Twist random_twist(Rng& rng, double phi_norm) {
  Twist xi;
  for (int a = 0; a < 3; ++a) {
    xi.rho[a] = 2.0 * rng.uniform() - 1.0;
    xi.phi[a] = 2.0 * rng.uniform() - 1.0;
  }
  if (xi.phi.norm() > 0.0) xi.phi *= phi_norm / xi.phi.norm();
  return xi;
}

double max_abs_diff(const Twist& a, const Twist& b) {
  return std::max((a.rho - b.rho).cwiseAbs().maxCoeff(), (a.phi - b.phi).cwiseAbs().maxCoeff());
}

double pose_diff(const Pose& a, const Pose& b) {
  return std::max((a.rotation - b.rotation).cwiseAbs().maxCoeff(),
                  (a.translation - b.translation).cwiseAbs().maxCoeff());
}

}  // namespace

TEST_SUITE_BEGIN("geometry");

TEST_CASE("se3_exp of zero twist is the identity") {
  const Pose pose = se3_exp(Twist{});
  CHECK(pose_diff(pose, Pose::identity()) == doctest::Approx(0.0));
}

TEST_CASE("se3_exp of a pure z rotation by pi/2") {
  Twist xi;
  xi.phi = Eigen::Vector3d(0, 0, M_PI / 2);
  const Pose pose = se3_exp(xi);
  Eigen::Matrix3d expected;
  expected << 0, -1, 0, 1, 0, 0, 0, 0, 1;
  CHECK((pose.rotation - expected).cwiseAbs().maxCoeff() < 1e-12);
  CHECK(pose.translation.norm() < 1e-12);
}

TEST_CASE("exp/log round-trip at phi norm 0.3") {
  Rng rng(7);
  for (int trial = 0; trial < 100; ++trial) {
    const Twist xi = random_twist(rng, 0.3);
    const Twist back = se3_log(se3_exp(xi));
    CHECK(max_abs_diff(xi, back) < 1e-9);
  }
}

TEST_CASE("exp/log round-trip over 1000 random twists up to phi norm 3") {
  Rng rng(11);
  for (int trial = 0; trial < 1000; ++trial) {
    const Twist xi = random_twist(rng, 3.0 * rng.uniform());
    const Twist back = se3_log(se3_exp(xi));
    CHECK(max_abs_diff(xi, back) < 1e-9);
  }
}

TEST_CASE("se3_log of identity is zero") {
  const Twist xi = se3_log(Pose::identity());
  CHECK(xi.rho.norm() == doctest::Approx(0.0));
  CHECK(xi.phi.norm() == doctest::Approx(0.0));
}

TEST_CASE("se3_log rejects rotations at pi") {
  Twist xi;
  xi.phi = Eigen::Vector3d(M_PI, 0, 0);
  CHECK_THROWS_AS((void)se3_log(se3_exp(xi)), AngleNearPi);
}

TEST_CASE("compose with inverse gives identity") {
  Rng rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    const Pose pose = se3_exp(random_twist(rng, 2.5 * rng.uniform()));
    CHECK(pose_diff(compose(pose, inverse(pose)), Pose::identity()) < 1e-9);
  }
}

TEST_CASE("rotations stay orthonormal over 1e4 compositions") {
  Rng rng(19);
  Pose chain = Pose::identity();
  for (int i = 0; i < 10000; ++i) chain = compose(chain, se3_exp(random_twist(rng, 0.05)));
  const Eigen::Matrix3d gram = chain.rotation.transpose() * chain.rotation;
  CHECK((gram - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff() < 1e-6);
  CHECK(chain.rotation.determinant() == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("orthonormalized repairs a drifted rotation") {
  Pose pose = se3_exp(Twist(Eigen::Vector3d(0.1, 0.2, 0.3), Eigen::Vector3d(0.4, -0.2, 0.1)));
  pose.rotation(0, 0) += 1e-4;
  const Pose fixed = orthonormalized(pose);
  const Eigen::Matrix3d gram = fixed.rotation.transpose() * fixed.rotation;
  CHECK((gram - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff() < 1e-12);
  CHECK(fixed.rotation.determinant() == doctest::Approx(1.0));
}

TEST_CASE("interpolate_pose hits the endpoints") {
  Rng rng(23);
  for (int trial = 0; trial < 20; ++trial) {
    const Pose a = se3_exp(random_twist(rng, 1.0));
    const Pose b = se3_exp(random_twist(rng, 1.0));
    const int n = 2 + static_cast<int>(rng.uniform_below(15));
    CHECK(pose_diff(interpolate_pose(a, b, 1, n), a) == doctest::Approx(0.0));
    CHECK(pose_diff(interpolate_pose(a, b, n, n), b) < 1e-9);
  }
}

TEST_CASE("interpolate_pose midpoint of a pure translation") {
  Pose b;
  b.translation = Eigen::Vector3d(1, 0, 0);
  const Pose mid = interpolate_pose(Pose::identity(), b, 5, 9);
  CHECK((mid.translation - Eigen::Vector3d(0.5, 0, 0)).norm() < 1e-12);
  CHECK((mid.rotation - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("interpolate_pose single-frame case returns the start") {
  Pose b;
  b.translation = Eigen::Vector3d(0, 2, 0);
  CHECK(pose_diff(interpolate_pose(Pose::identity(), b, 1, 1), Pose::identity()) == 0.0);
}

TEST_CASE("literal i/N convention reaches the end but not the start") {
  Pose b;
  b.translation = Eigen::Vector3d(1, 0, 0);
  const Pose at_start =
      interpolate_pose(Pose::identity(), b, 1, 8, InterpConvention::LiteralIOverN);
  const Pose at_end = interpolate_pose(Pose::identity(), b, 8, 8, InterpConvention::LiteralIOverN);
  CHECK(at_start.translation.x() == doctest::Approx(1.0 / 8.0));
  CHECK(at_end.translation.x() == doctest::Approx(1.0));
}

TEST_CASE("geodesic consistency of constant-velocity interpolation") {
  Rng rng(31);
  for (int trial = 0; trial < 20; ++trial) {
    const Pose a = se3_exp(random_twist(rng, 1.2));
    const Pose b = se3_exp(random_twist(rng, 1.2));
    // frames 3 and 7 of 9, then the midpoint between them = frame 5 of 9
    const Pose p3 = interpolate_pose(a, b, 3, 9);
    const Pose p7 = interpolate_pose(a, b, 7, 9);
    const Pose mid = interpolate_pose(p3, p7, 2, 3);
    const Pose expected = interpolate_pose(a, b, 5, 9);
    CHECK(pose_diff(mid, expected) < 1e-7);
  }
}

TEST_CASE("generate_ray at the principal point looks down +z") {
  Intrinsics intr{50.0, 50.0, 8.5, 6.5, 16, 12};
  // pixel center (col + 0.5, row + 0.5) == (cx, cy)
  const Ray ray = generate_ray(intr, Pose::identity(), 6, 8);
  CHECK((ray.direction - Eigen::Vector3d(0, 0, 1)).norm() < 1e-12);
  CHECK(ray.origin.norm() == 0.0);
  CHECK(ray.pixel_row == 6);
  CHECK(ray.pixel_col == 8);
}

TEST_CASE("generate_ray 45-degree pixel") {
  Intrinsics intr{40.0, 40.0, 32.5, 24.5, 128, 96};
  // col + 0.5 - cx = fx  ->  direction proportional to (1, 0, 1)
  const int col = static_cast<int>(intr.cx + intr.fx - 0.5);
  const int row = static_cast<int>(intr.cy - 0.5);
  REQUIRE(col + 0.5 - intr.cx == doctest::Approx(intr.fx));
  const Ray ray = generate_ray(intr, Pose::identity(), row, col);
  const Eigen::Vector3d expected = Eigen::Vector3d(1, 0, 1).normalized();
  CHECK((ray.direction - expected).norm() < 1e-12);
}

TEST_CASE("generate_ray translation moves only the origin") {
  Intrinsics intr{40.0, 40.0, 32.0, 24.0, 64, 48};
  Pose pose;
  pose.translation = Eigen::Vector3d(0, 0, -4);
  const Ray moved = generate_ray(intr, pose, 10, 20);
  const Ray base = generate_ray(intr, Pose::identity(), 10, 20);
  CHECK((moved.origin - Eigen::Vector3d(0, 0, -4)).norm() == 0.0);
  CHECK((moved.direction - base.direction).norm() == 0.0);
}

TEST_CASE("generate_ray bounds checking") {
  Intrinsics intr{40.0, 40.0, 32.0, 24.0, 64, 48};
  CHECK_THROWS_AS((void)generate_ray(intr, Pose::identity(), -1, 0), PixelOutOfBounds);
  CHECK_THROWS_AS((void)generate_ray(intr, Pose::identity(), 0, 64), PixelOutOfBounds);
}

TEST_CASE("every generated ray direction is unit norm") {
  Intrinsics intr{33.0, 41.0, 15.5, 17.5, 32, 36};
  Rng rng(41);
  for (int trial = 0; trial < 200; ++trial) {
    const Pose pose = se3_exp(random_twist(rng, 2.0 * rng.uniform()));
    const int row = static_cast<int>(rng.uniform_below(intr.height));
    const int col = static_cast<int>(rng.uniform_below(intr.width));
    const Ray ray = generate_ray(intr, pose, row, col);
    CHECK(std::abs(ray.direction.norm() - 1.0) < 1e-9);
  }
}

TEST_CASE("intrinsics validation") {
  Intrinsics bad{0.0, 40.0, 32.0, 24.0, 64, 48};
  CHECK_THROWS_AS(bad.validate(), Error);
  Intrinsics outside{40.0, 40.0, 70.0, 24.0, 64, 48};
  CHECK_THROWS_AS(outside.validate(), Error);
}

TEST_SUITE_END();
