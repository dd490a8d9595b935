#include "stella/mission_sim.hpp"

#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace stella::mission_sim {

namespace {

using Eigen::Matrix3d;
using Eigen::Vector3d;

// Camera axes from the inertial state: boresight rotated off-nadir from the
// nadir direction toward velocity, image rows along cross-track.
Matrix3d attitude_inertial(const Vector3d& r, const Vector3d& v,
                           double off_nadir_rad) {
  const Vector3d nadir = -r.normalized();
  const Vector3d cross_track = r.cross(v).normalized();
  const Vector3d along_track = cross_track.cross(-nadir).normalized();
  const Vector3d boresight =
      std::cos(off_nadir_rad) * nadir + std::sin(off_nadir_rad) * along_track;

  Matrix3d rot;
  rot.col(0) = cross_track;
  rot.col(2) = boresight.normalized();
  rot.col(1) = rot.col(2).cross(rot.col(0)).normalized();
  return rot;
}

}  // namespace

Eigen::Matrix3d moon_spin(double epoch) {
  const double angle = 2.0 * kPi * epoch / kMoonSiderealPeriodS;
  return Eigen::AngleAxisd(angle, Vector3d::UnitZ()).toRotationMatrix();
}

Eigen::Vector3d sun_direction(const SunModel& sun, double epoch) {
  const double phase =
      sun.initial_phase * kDegToRad + 2.0 * kPi * epoch / kSolarPeriodS;
  const Vector3d inertial =
      Eigen::AngleAxisd(sun.plane_inclination * kDegToRad, Vector3d::UnitX()) *
      Vector3d(std::cos(phase), std::sin(phase), 0.0);
  return moon_spin(epoch).transpose() * inertial;
}

std::vector<MissionFrame> generate_schedule(const MissionConfig& cfg, double mu,
                                            int* raw_count) {
  if (!cfg.valid()) throw std::invalid_argument("invalid mission config");
  const od::StateVector sv0 =
      od::koe_to_state(cfg.orbit, mu, cfg.start_epoch);
  const int n_frames =
      static_cast<int>(cfg.duration_days * 86400.0 / cfg.cadence);
  if (raw_count) *raw_count = n_frames;
  const double off_nadir_rad = cfg.off_nadir * kDegToRad;

  geometry::CameraIntrinsics cam;  // boresight-only use below

  std::vector<MissionFrame> out;
  out.reserve(n_frames);
  for (int k = 0; k < n_frames; ++k) {
    const double t = cfg.start_epoch + k * cfg.cadence;
    auto prop = od::propagate(sv0, t - cfg.start_epoch, mu);
    if (!prop) throw std::runtime_error("mission orbit propagation failed");

    const Matrix3d to_fixed = moon_spin(t).transpose();
    MissionFrame frame;
    frame.timestamp = t;
    frame.truth_pose.position = to_fixed * prop.value().position * 1000.0;
    frame.truth_pose.rotation =
        to_fixed *
        attitude_inertial(prop.value().position, prop.value().velocity,
                          off_nadir_rad);

    auto ground = geometry::surface_intersection(frame.truth_pose, cam,
                                                 kMoonRadiusM);
    if (!ground) continue;
    frame.solar_angle = geometry::solar_angle(
        ground.value(), sun_direction(cfg.sun, t));
    if (frame.solar_angle > 90.0) continue;
    out.push_back(frame);
  }
  return out;
}

void save_frames(const std::vector<MissionFrame>& frames,
                 const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write frames file: " + path);
  out << "t_s,qw,qx,qy,qz,x_m,y_m,z_m,solar_deg\n";
  out.precision(17);
  for (const auto& f : frames) {
    Eigen::Quaterniond q(f.truth_pose.rotation);
    if (q.w() < 0.0) q.coeffs() = -q.coeffs();
    out << f.timestamp << ',' << q.w() << ',' << q.x() << ',' << q.y() << ','
        << q.z() << ',' << f.truth_pose.position.x() << ','
        << f.truth_pose.position.y() << ',' << f.truth_pose.position.z() << ','
        << f.solar_angle << '\n';
  }
}

std::vector<MissionFrame> load_frames(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open frames file: " + path);
  std::string line;
  std::getline(in, line);  // header
  std::vector<MissionFrame> out;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    double vals[9];
    char comma;
    ss >> vals[0];
    for (int i = 1; i < 9; ++i) ss >> comma >> vals[i];
    if (!ss) throw std::runtime_error("bad frames line: " + line);
    MissionFrame f;
    f.timestamp = vals[0];
    Eigen::Quaterniond q(vals[1], vals[2], vals[3], vals[4]);
    f.truth_pose.rotation = q.normalized().toRotationMatrix();
    f.truth_pose.position = Vector3d(vals[5], vals[6], vals[7]);
    f.solar_angle = vals[8];
    out.push_back(f);
  }
  return out;
}

}  // namespace stella::mission_sim
