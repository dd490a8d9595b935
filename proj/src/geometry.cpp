#include "stella/geometry.hpp"

#include <algorithm>
#include <cmath>

namespace stella::geometry {

namespace {

double wrap_to_half_pi_interval(double theta) {
  // Maps into [0, pi).
  theta = std::fmod(theta, kPi);
  if (theta < 0.0) theta += kPi;
  if (theta >= kPi) theta -= kPi;
  return theta;
}

// 3x3 adjugate; proportional to the inverse and stable for near-singular
// inputs where only the projective class matters.
Matrix3d adjugate(const Matrix3d& m) {
  Matrix3d a;
  a(0, 0) = m(1, 1) * m(2, 2) - m(1, 2) * m(2, 1);
  a(0, 1) = m(0, 2) * m(2, 1) - m(0, 1) * m(2, 2);
  a(0, 2) = m(0, 1) * m(1, 2) - m(0, 2) * m(1, 1);
  a(1, 0) = m(1, 2) * m(2, 0) - m(1, 0) * m(2, 2);
  a(1, 1) = m(0, 0) * m(2, 2) - m(0, 2) * m(2, 0);
  a(1, 2) = m(0, 2) * m(1, 0) - m(0, 0) * m(1, 2);
  a(2, 0) = m(1, 0) * m(2, 1) - m(1, 1) * m(2, 0);
  a(2, 1) = m(0, 1) * m(2, 0) - m(0, 0) * m(2, 1);
  a(2, 2) = m(0, 0) * m(1, 1) - m(0, 1) * m(1, 0);
  return a;
}

}  // namespace

bool Pose::valid(double tol) const {
  if (!rotation.allFinite() || !position.allFinite()) return false;
  const Matrix3d gram = rotation.transpose() * rotation;
  if ((gram - Matrix3d::Identity()).cwiseAbs().maxCoeff() > tol) return false;
  return std::abs(rotation.determinant() - 1.0) <= tol;
}

bool ConicMatrix::symmetric(double tol) const {
  return (m - m.transpose()).cwiseAbs().maxCoeff() <= tol;
}

double ConicMatrix::discriminant() const {
  // Polynomial coefficients: A = m00, B = 2*m01, C = m11.
  const double a = m(0, 0), b = 2.0 * m(0, 1), c = m(1, 1);
  return b * b - 4.0 * a * c;
}

Matrix3d enu_frame(double lat_deg, double lon_deg) {
  const double lat = lat_deg * kDegToRad;
  const double lon = lon_deg * kDegToRad;
  const double clat = std::cos(lat), slat = std::sin(lat);
  const double clon = std::cos(lon), slon = std::sin(lon);
  Matrix3d enu;
  enu.col(0) = Vector3d(-slon, clon, 0.0);                 // East
  enu.col(1) = Vector3d(-slat * clon, -slat * slon, clat); // North
  enu.col(2) = Vector3d(clat * clon, clat * slon, slat);   // Up
  return enu;
}

CraterDisc make_disc(const Vector3d& center_world, const Matrix3d& enu,
                     const Vector2d& semi_axes, double rim_orientation) {
  CraterDisc disc;
  disc.center_world = center_world;
  disc.enu_frame = enu;
  disc.semi_axes = semi_axes;
  disc.rim_orientation = rim_orientation;
  EllipseParams local;
  local.center = Vector2d::Zero();
  local.semi_major = semi_axes.x();
  local.semi_minor = semi_axes.y();
  local.orientation = rim_orientation;
  disc.local_conic = ellipse_to_conic(local);
  return disc;
}

Matrix3d intrinsic_matrix(const CameraIntrinsics& cam) {
  Matrix3d k = Matrix3d::Identity();
  k(0, 0) = cam.focal_length;
  k(1, 1) = cam.focal_length;
  k(0, 2) = cam.principal_point.x();
  k(1, 2) = cam.principal_point.y();
  return k;
}

Matrix34d projection_matrix(const Pose& pose, const CameraIntrinsics& cam) {
  Matrix34d ext;
  const Matrix3d r_wc = pose.rotation.transpose();  // WRF -> CRF
  ext.leftCols<3>() = r_wc;
  ext.col(3) = -r_wc * pose.position;
  return intrinsic_matrix(cam) * ext;
}

Result<Vector2d, GeomError> project_point(const Vector3d& p_world,
                                          const Pose& pose,
                                          const CameraIntrinsics& cam) {
  const Matrix34d p = projection_matrix(pose, cam);
  const Vector3d q = p * p_world.homogeneous();
  if (std::abs(q.z()) < 1e-12) return GeomError::kAtInfinity;
  if (q.z() <= 0.0) return GeomError::kBehindCamera;
  return Vector2d(q.x() / q.z(), q.y() / q.z());
}

Result<Matrix3d, GeomError> crater_homography(const CraterDisc& disc,
                                              const Pose& pose,
                                              const CameraIntrinsics& cam) {
  Matrix43d plane;  // [B; k^T]
  plane.block<3, 2>(0, 0) = disc.enu_frame.leftCols<2>();
  plane.block<3, 1>(0, 2) = disc.center_world;
  plane.row(3) << 0.0, 0.0, 1.0;
  Matrix3d h = projection_matrix(pose, cam) * plane;
  // Scale-invariant rank test: column norms differ by orders of magnitude
  // (unit plane axes vs a metric translation), so normalize per column
  // before judging the determinant.
  const Vector3d norms = h.colwise().norm();
  if (norms.minCoeff() <= 0.0) return GeomError::kDegenerateHomography;
  const double det_scaled = h.determinant() / norms.prod();
  if (!std::isfinite(det_scaled) || std::abs(det_scaled) < 1e-12) {
    return GeomError::kDegenerateHomography;
  }
  return h;
}

Result<ConicMatrix, GeomError> project_crater_conic(const CraterDisc& disc,
                                                    const Pose& pose,
                                                    const CameraIntrinsics& cam) {
  // The rim crosses the image plane (and the projection is no longer an
  // ellipse) whenever any part of the disc reaches the camera; reject the
  // whole disc when its centre is not strictly in front.
  const Vector3d in_cam =
      pose.rotation.transpose() * (disc.center_world - pose.position);
  if (in_cam.z() <= 0.0) return GeomError::kDegenerateConic;

  auto h = crater_homography(disc, pose, cam);
  if (!h) return h.error();

  const Matrix3d dual = h.value() * adjugate(disc.local_conic.m).transpose() *
                        h.value().transpose();
  Matrix3d e = adjugate(dual).transpose();
  e = 0.5 * (e + e.transpose());

  const double scale = e.cwiseAbs().maxCoeff();
  if (!(scale > 0.0) || !e.allFinite()) return GeomError::kDegenerateConic;
  e /= scale;

  // Interior point: image of the disc centre.
  const Vector3d c_img = h.value() * Vector3d(0.0, 0.0, 1.0);
  if (c_img.transpose() * e * c_img > 0.0) e = -e;

  ConicMatrix conic{e};
  if (conic.discriminant() >= 0.0) return GeomError::kDegenerateConic;
  return conic;
}

Result<EllipseParams, GeomError> conic_to_ellipse(const ConicMatrix& conic) {
  // Polynomial coefficients of Ax^2 + Bxy + Cy^2 + Dx + Ey + F = 0.
  const double a = conic.m(0, 0);
  const double b = 2.0 * conic.m(0, 1);
  const double c = conic.m(1, 1);
  const double d = 2.0 * conic.m(0, 2);
  const double e = 2.0 * conic.m(1, 2);
  const double f = conic.m(2, 2);

  const double disc = b * b - 4.0 * a * c;
  if (disc >= 0.0) return GeomError::kNotAnEllipse;

  EllipseParams out;
  out.center.x() = (2.0 * c * d - b * e) / disc;
  out.center.y() = (2.0 * a * e - b * d) / disc;

  const double q = 2.0 * (a * e * e + c * d * d - b * d * e + disc * f);
  const double root = std::sqrt((a - c) * (a - c) + b * b);
  const double major_arg = q * (a + c + root);
  const double minor_arg = q * (a + c - root);
  if (major_arg <= 0.0 || minor_arg <= 0.0) return GeomError::kNotAnEllipse;
  out.semi_major = -std::sqrt(major_arg) / disc;
  out.semi_minor = -std::sqrt(minor_arg) / disc;

  // With the interior-negative sign convention (a + c > 0 for an ellipse),
  // B = -k sin(2theta) and A - C = -k cos(2theta) for some k > 0 when theta
  // is the major-axis angle, so a single atan2 recovers it in every quadrant.
  const double sign = (a + c) < 0.0 ? -1.0 : 1.0;
  const double theta = 0.5 * (std::atan2(sign * b, sign * (a - c)) + kPi);

  if (out.semi_major < out.semi_minor) {
    std::swap(out.semi_major, out.semi_minor);
  }
  out.orientation = wrap_to_half_pi_interval(theta);
  return out;
}

ConicMatrix ellipse_to_conic(const EllipseParams& el) {
  const double ct = std::cos(el.orientation), st = std::sin(el.orientation);
  const double ia2 = 1.0 / (el.semi_major * el.semi_major);
  const double ib2 = 1.0 / (el.semi_minor * el.semi_minor);
  const double a = ct * ct * ia2 + st * st * ib2;
  const double c = st * st * ia2 + ct * ct * ib2;
  const double b = ct * st * (ia2 - ib2);  // off-diagonal of the form
  const double x0 = el.center.x(), y0 = el.center.y();

  Matrix3d m;
  m(0, 0) = a;
  m(0, 1) = m(1, 0) = b;
  m(1, 1) = c;
  m(0, 2) = m(2, 0) = -(a * x0 + b * y0);
  m(1, 2) = m(2, 1) = -(b * x0 + c * y0);
  m(2, 2) = a * x0 * x0 + 2.0 * b * x0 * y0 + c * y0 * y0 - 1.0;
  return ConicMatrix{m};
}

Result<EllipseParams, GeomError> project_crater(const CraterDisc& disc,
                                                const Pose& pose,
                                                const CameraIntrinsics& cam) {
  auto conic = project_crater_conic(disc, pose, cam);
  if (!conic) return conic.error();
  return conic_to_ellipse(conic.value());
}

Result<Vector3d, GeomError> surface_intersection(const Pose& pose,
                                                 const CameraIntrinsics& cam,
                                                 double moon_radius) {
  (void)cam;  // optical axis only; intrinsics do not move the boresight
  const Vector3d w = pose.boresight();
  const Vector3d& t = pose.position;
  const double b = t.dot(w);
  const double c = t.squaredNorm() - moon_radius * moon_radius;
  const double disc = b * b - c;
  if (disc < 0.0) return GeomError::kNoIntersection;
  const double lambda = -b - std::sqrt(disc);  // nearest of the two roots
  if (lambda <= 0.0) return GeomError::kNoIntersection;
  return Vector3d(t + lambda * w);
}

double solar_angle(const Vector3d& surface_point, const Vector3d& sun_direction) {
  const double cosang = surface_point.normalized().dot(sun_direction.normalized());
  return std::acos(std::clamp(cosang, -1.0, 1.0)) * kRadToDeg;
}

double angular_error(const Matrix3d& r1, const Matrix3d& r2) {
  const double tr = (r1 * r2.transpose()).trace();
  return std::acos(std::clamp((tr - 1.0) / 2.0, -1.0, 1.0)) * kRadToDeg;
}

}  // namespace stella::geometry
