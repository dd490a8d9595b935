#pragma once

#include <Eigen/Dense>

#include "stella/constants.hpp"
#include "stella/result.hpp"

namespace stella::geometry {

using Eigen::Matrix3d;
using Eigen::Vector2d;
using Eigen::Vector3d;
using Matrix34d = Eigen::Matrix<double, 3, 4>;
using Matrix43d = Eigen::Matrix<double, 4, 3>;

enum class GeomError {
  kBehindCamera,
  kAtInfinity,
  kDegenerateHomography,
  kDegenerateConic,
  kNotAnEllipse,
  kNoIntersection,
};

// Pinhole camera with square pixels and no distortion.
struct CameraIntrinsics {
  double focal_length = 1.0;     // [px]
  Vector2d principal_point{0.0, 0.0};  // (x_I, y_I) [px]

  bool valid() const {
    return focal_length > 0.0 && principal_point.allFinite();
  }
};

// 6DoF camera pose in the world (Moon-fixed) frame. `rotation` maps camera
// frame vectors to world frame vectors, so its third column is the boresight
// direction expressed in the world frame.
struct Pose {
  Matrix3d rotation = Matrix3d::Identity();  // CRF -> WRF
  Vector3d position = Vector3d::Zero();      // [m], WRF

  bool valid(double tol = 1e-10) const;
  Vector3d boresight() const { return rotation.col(2); }
};

// Symmetric 3x3 conic, acting as a quadratic form: a homogeneous image point
// q satisfies q^T M q = 0 iff it lies on the conic. Off-diagonal entries are
// stored as written (entry (0,1) is the full xy coefficient of the form).
struct ConicMatrix {
  Matrix3d m = Matrix3d::Identity();

  bool symmetric(double tol = 1e-12) const;
  // Discriminant test for a (possibly degenerate) ellipse: negative for a
  // real ellipse, using the polynomial coefficients read off the form.
  double discriminant() const;
};

// Image ellipse {x, y, a, b, theta} with a >= b and theta in [0, pi).
struct EllipseParams {
  Vector2d center{0.0, 0.0};  // [px]
  double semi_major = 1.0;    // [px]
  double semi_minor = 1.0;    // [px]
  double orientation = 0.0;   // [rad], in [0, pi)

  bool valid() const {
    return semi_major >= semi_minor && semi_minor > 0.0 &&
           center.allFinite();
  }
  Eigen::Matrix<double, 5, 1> as_vector() const {
    Eigen::Matrix<double, 5, 1> v;
    v << center.x(), center.y(), semi_major, semi_minor, orientation;
    return v;
  }
};

// Catalogued 3D crater rim: an elliptical disc in a local ENU frame.
struct CraterDisc {
  Vector3d center_world = Vector3d::Zero();  // c_W [m]
  Matrix3d enu_frame = Matrix3d::Identity(); // columns East, North, Up
  Vector2d semi_axes{1.0, 1.0};              // [m], major >= minor
  double rim_orientation = 0.0;              // [rad], in-plane rotation
  ConicMatrix local_conic;                   // disc ellipse in ENU plane
};

// ENU frame on the spherical Moon at selenographic latitude/longitude [deg].
Matrix3d enu_frame(double lat_deg, double lon_deg);

// Builds a disc with a consistent local conic from its geometric parameters.
CraterDisc make_disc(const Vector3d& center_world, const Matrix3d& enu,
                     const Vector2d& semi_axes, double rim_orientation);

Matrix3d intrinsic_matrix(const CameraIntrinsics& cam);

// 3x4 world-to-image projection matrix K * [R^T | -R^T t].
Matrix34d projection_matrix(const Pose& pose, const CameraIntrinsics& cam);

Result<Vector2d, GeomError> project_point(const Vector3d& p_world,
                                          const Pose& pose,
                                          const CameraIntrinsics& cam);

// Homography from the disc's local plane (homogeneous ENU coordinates with
// zero Up component) to the image plane.
Result<Matrix3d, GeomError> crater_homography(const CraterDisc& disc,
                                              const Pose& pose,
                                              const CameraIntrinsics& cam);

// Projects the disc rim to an image conic. The result is symmetric,
// normalized by its largest-magnitude entry, with sign chosen so interior
// points evaluate negative.
Result<ConicMatrix, GeomError> project_crater_conic(const CraterDisc& disc,
                                                    const Pose& pose,
                                                    const CameraIntrinsics& cam);

Result<EllipseParams, GeomError> conic_to_ellipse(const ConicMatrix& conic);

ConicMatrix ellipse_to_conic(const EllipseParams& e);

Result<EllipseParams, GeomError> project_crater(const CraterDisc& disc,
                                                const Pose& pose,
                                                const CameraIntrinsics& cam);

// Nearest intersection of the optical axis with the sphere of given radius.
Result<Vector3d, GeomError> surface_intersection(const Pose& pose,
                                                 const CameraIntrinsics& cam,
                                                 double moon_radius);

// Angle [deg] between the outward surface normal at `surface_point` and the
// Sun direction.
double solar_angle(const Vector3d& surface_point, const Vector3d& sun_direction);

// Geodesic distance on SO(3) [deg].
double angular_error(const Matrix3d& r1, const Matrix3d& r2);

}  // namespace stella::geometry
