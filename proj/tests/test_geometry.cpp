#include <doctest.h>

#include <random>

#include "stella/geometry.hpp"
#include "test_helpers.hpp"

using namespace stella;
using namespace stella::geometry;
using namespace stella::test;

namespace {

double conic_residual(const ConicMatrix& conic, const Vector2d& pt) {
  const Vector3d q(pt.x(), pt.y(), 1.0);
  return std::abs(q.transpose() * conic.m * q) /
         (q.squaredNorm() * conic.m.norm());
}

}  // namespace

TEST_CASE("intrinsic matrix layout") {
  CameraIntrinsics cam{100.0, {10.0, 20.0}};
  const Matrix3d k = intrinsic_matrix(cam);
  CHECK(k(0, 0) == 100.0);
  CHECK(k(1, 1) == 100.0);
  CHECK(k(0, 2) == 10.0);
  CHECK(k(1, 2) == 20.0);
  CHECK(k(2, 2) == 1.0);
  CHECK(k(1, 0) == 0.0);
}

TEST_CASE("project_point matches the homogeneous chain") {
  std::mt19937_64 rng(11);
  int checked = 0;
  for (int trial = 0; trial < 500; ++trial) {
    auto disc = random_disc(rng);
    auto pose = camera_over(disc, rng);
    auto cam = random_camera(rng);
    const Vector3d p = rim_point(disc, 2.0 * kPi * trial / 500.0);
    auto proj = project_point(p, pose, cam);
    if (!proj) continue;
    ++checked;

    // Independent oracle: 4x4 homogeneous transform then explicit divide.
    Eigen::Matrix4d world_to_cam = Eigen::Matrix4d::Identity();
    world_to_cam.topLeftCorner<3, 3>() = pose.rotation.transpose();
    world_to_cam.topRightCorner<3, 1>() =
        -pose.rotation.transpose() * pose.position;
    const Eigen::Vector4d pc = world_to_cam * p.homogeneous();
    const Vector2d expect(
        cam.focal_length * pc.x() / pc.z() + cam.principal_point.x(),
        cam.focal_length * pc.y() / pc.z() + cam.principal_point.y());
    CHECK((proj.value() - expect).norm() < 1e-9 * expect.norm());
  }
  CHECK(checked > 400);
}

TEST_CASE("points behind the camera are rejected") {
  Pose pose;  // camera at origin looking along +z
  CameraIntrinsics cam{1000.0, {512.0, 512.0}};
  CHECK(project_point({0.0, 0.0, 10.0}, pose, cam).ok());
  auto behind = project_point({0.0, 0.0, -10.0}, pose, cam);
  REQUIRE(!behind.ok());
  CHECK(behind.error() == GeomError::kBehindCamera);
  auto at_inf = project_point({1.0, 0.0, 0.0}, pose, cam);
  REQUIRE(!at_inf.ok());
  CHECK(at_inf.error() == GeomError::kAtInfinity);
}

TEST_CASE("projected conic contains the projected rim") {
  std::mt19937_64 rng(7);
  int checked = 0;
  for (int trial = 0; trial < 200; ++trial) {
    auto disc = random_disc(rng);
    auto pose = camera_over(disc, rng);
    auto cam = random_camera(rng);
    auto conic = project_crater_conic(disc, pose, cam);
    if (!conic) continue;
    ++checked;
    for (int k = 0; k < 32; ++k) {
      const Vector3d p = rim_point(disc, 2.0 * kPi * k / 32.0);
      auto img = project_point(p, pose, cam);
      REQUIRE(img.ok());
      CHECK(conic_residual(conic.value(), img.value()) < 1e-8);
    }
    // Interior point evaluates negative.
    auto center_img = project_point(disc.center_world, pose, cam);
    REQUIRE(center_img.ok());
    const Vector3d c(center_img.value().x(), center_img.value().y(), 1.0);
    CHECK((c.transpose() * conic.value().m * c)(0) < 0.0);
  }
  CHECK(checked > 150);
}

TEST_CASE("conic_to_ellipse on worked examples") {
  SUBCASE("unit circle") {
    ConicMatrix unit;  // x^2 + y^2 - 1 = 0
    unit.m = Matrix3d::Identity();
    unit.m(2, 2) = -1.0;
    auto e = conic_to_ellipse(unit);
    REQUIRE(e.ok());
    CHECK(e.value().center.norm() < 1e-12);
    CHECK(e.value().semi_major == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(e.value().semi_minor == doctest::Approx(1.0).epsilon(1e-12));
  }
  SUBCASE("axis-aligned 2:1 ellipse") {
    ConicMatrix m;  // x^2/4 + y^2 - 1 = 0
    m.m = Matrix3d::Zero();
    m.m(0, 0) = 0.25;
    m.m(1, 1) = 1.0;
    m.m(2, 2) = -1.0;
    auto e = conic_to_ellipse(m);
    REQUIRE(e.ok());
    CHECK(e.value().semi_major == doctest::Approx(2.0).epsilon(1e-12));
    CHECK(e.value().semi_minor == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(e.value().orientation == doctest::Approx(0.0));
  }
  SUBCASE("hyperbola is rejected") {
    ConicMatrix m;  // x^2 - y^2 - 1 = 0
    m.m = Matrix3d::Zero();
    m.m(0, 0) = 1.0;
    m.m(1, 1) = -1.0;
    m.m(2, 2) = -1.0;
    auto e = conic_to_ellipse(m);
    REQUIRE(!e.ok());
    CHECK(e.error() == GeomError::kNotAnEllipse);
  }
}

TEST_CASE("conic <-> ellipse round trip") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  for (int trial = 0; trial < 1000; ++trial) {
    EllipseParams e;
    e.center = {2000.0 * uni(rng) - 1000.0, 2000.0 * uni(rng) - 1000.0};
    e.semi_minor = 0.5 + 200.0 * uni(rng);
    e.semi_major = e.semi_minor * (1.0 + 3.0 * uni(rng));
    e.orientation = uni(rng) * kPi;
    auto back = conic_to_ellipse(ellipse_to_conic(e));
    REQUIRE(back.ok());
    CHECK((back.value().center - e.center).norm() < 1e-9 * (1.0 + e.center.norm()));
    CHECK(back.value().semi_major ==
          doctest::Approx(e.semi_major).epsilon(1e-9));
    CHECK(back.value().semi_minor ==
          doctest::Approx(e.semi_minor).epsilon(1e-9));
    if (e.semi_major / e.semi_minor > 1.0 + 1e-6) {
      double dt = std::abs(back.value().orientation - e.orientation);
      dt = std::min(dt, kPi - dt);
      CHECK(dt < 1e-9);
    }
  }
}

TEST_CASE("projected ellipse equals sampled-rim least squares shape") {
  // The extracted ellipse centre must stay inside the projected rim hull.
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 50; ++trial) {
    auto disc = random_disc(rng);
    auto pose = camera_over(disc, rng);
    auto cam = random_camera(rng);
    auto ell = project_crater(disc, pose, cam);
    if (!ell) continue;
    Vector2d lo(1e300, 1e300), hi(-1e300, -1e300);
    for (int k = 0; k < 64; ++k) {
      auto img = project_point(rim_point(disc, 2.0 * kPi * k / 64.0), pose, cam);
      REQUIRE(img.ok());
      lo = lo.cwiseMin(img.value());
      hi = hi.cwiseMax(img.value());
    }
    CHECK(ell.value().center.x() > lo.x());
    CHECK(ell.value().center.x() < hi.x());
    CHECK(ell.value().center.y() > lo.y());
    CHECK(ell.value().center.y() < hi.y());
    // The bounding box half-diagonal bounds the semi-major axis.
    CHECK(ell.value().semi_major <= (hi - lo).norm());
    CHECK(ell.value().semi_major >= (hi - lo).maxCoeff() / 2.0 - 1e-6);
  }
}

TEST_CASE("enu frame is right-handed and radial") {
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  for (int trial = 0; trial < 100; ++trial) {
    const double lat = 180.0 * uni(rng) - 90.0;
    const double lon = 360.0 * uni(rng) - 180.0;
    const Matrix3d enu = enu_frame(lat, lon);
    CHECK((enu * enu.transpose() - Matrix3d::Identity()).norm() < 1e-12);
    CHECK(enu.determinant() == doctest::Approx(1.0).epsilon(1e-12));
    // Up is the radial direction.
    const Vector3d up(std::cos(lat * kDegToRad) * std::cos(lon * kDegToRad),
                      std::cos(lat * kDegToRad) * std::sin(lon * kDegToRad),
                      std::sin(lat * kDegToRad));
    CHECK((enu.col(2) - up).norm() < 1e-12);
    // East has no z component.
    CHECK(std::abs(enu.col(0).z()) < 1e-12);
  }
}

TEST_CASE("surface intersection satisfies the sphere and the ray") {
  std::mt19937_64 rng(13);
  for (int trial = 0; trial < 200; ++trial) {
    auto disc = random_disc(rng);
    auto pose = camera_over(disc, rng);
    auto hit = surface_intersection(pose, {}, kMoonRadiusM);
    if (!hit) continue;
    CHECK(hit.value().norm() == doctest::Approx(kMoonRadiusM).epsilon(1e-10));
    const Vector3d d = hit.value() - pose.position;
    CHECK(d.normalized().dot(pose.boresight()) ==
          doctest::Approx(1.0).epsilon(1e-10));
    // Nearest root: the chord to the far intersection is longer.
    CHECK(d.norm() < pose.position.norm());
  }

  // Boresight pointing away from the Moon.
  Pose away;
  away.position = Vector3d(2.0 * kMoonRadiusM, 0.0, 0.0);
  away.rotation.col(2) = Vector3d::UnitX();
  away.rotation.col(0) = Vector3d::UnitY();
  away.rotation.col(1) = Vector3d::UnitZ();
  CHECK(!surface_intersection(away, {}, kMoonRadiusM).ok());
}

TEST_CASE("angular error agrees with the quaternion oracle") {
  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 200; ++trial) {
    const Matrix3d r1 = random_rotation(rng);
    const Matrix3d r2 = random_rotation(rng);
    const double got = angular_error(r1, r2);
    const Eigen::Quaterniond q1(r1), q2(r2);
    const double expect =
        2.0 * std::acos(std::min(1.0, std::abs(q1.dot(q2)))) * kRadToDeg;
    CHECK(got == doctest::Approx(expect).epsilon(1e-6));
  }
  const Matrix3d r = random_rotation(rng);
  CHECK(angular_error(r, r) == doctest::Approx(0.0));
}

TEST_CASE("solar angle basics") {
  const Vector3d p(kMoonRadiusM, 0.0, 0.0);
  CHECK(solar_angle(p, Vector3d::UnitX()) == doctest::Approx(0.0));
  CHECK(solar_angle(p, Vector3d::UnitZ()) == doctest::Approx(90.0));
  CHECK(solar_angle(p, -Vector3d::UnitX()) == doctest::Approx(180.0));
}

TEST_CASE("pose validity") {
  Pose p;
  CHECK(p.valid());
  p.rotation(0, 0) = 1.1;
  CHECK(!p.valid());
}
