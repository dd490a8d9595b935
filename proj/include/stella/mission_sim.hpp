#pragma once

#include <string>
#include <vector>

#include "stella/geometry.hpp"
#include "stella/od.hpp"

namespace stella::mission_sim {

using geometry::Pose;
using od::KeplerianElements;

// Analytic Sun stand-in: circular path of period 365.25 d in a plane tilted
// `plane_inclination` degrees from the lunar equator, starting at
// `initial_phase` degrees past the ascending node.
struct SunModel {
  double plane_inclination = 1.5;  // [deg]
  double initial_phase = 0.0;      // [deg]
};

struct MissionConfig {
  KeplerianElements orbit{1837.7, 3.8e-4, 90.0, 227.0, 295.0, 91.0};
  double start_epoch = 0.0;    // [s]
  double duration_days = 365.0;
  double cadence = 1200.0;     // [s]
  double off_nadir = 40.0;     // [deg], tilted along-track
  SunModel sun;

  bool valid() const {
    return cadence > 0.0 && off_nadir >= 0.0 && off_nadir < 90.0 &&
           duration_days > 0.0;
  }
};

struct MissionFrame {
  double timestamp = 0.0;  // [s] since epoch
  Pose truth_pose;         // camera pose in the Moon-fixed frame
  double solar_angle = 0.0;  // [deg] at the observed surface point
};

// Uniform lunar spin about +Z: rotates Moon-fixed coordinates into the
// inertial frame at `epoch` seconds (r_inertial = moon_spin(t) * r_fixed).
Eigen::Matrix3d moon_spin(double epoch);

// Sun direction in the Moon-fixed frame at `epoch` seconds: the inertial
// circular path composed with the uniform lunar spin.
Eigen::Vector3d sun_direction(const SunModel& sun, double epoch);

// Propagates the orbit at fixed cadence, builds the off-nadir attitude, and
// drops frames whose solar angle exceeds 90 degrees. `raw_count`, when
// non-null, receives the pre-filter frame total.
std::vector<MissionFrame> generate_schedule(const MissionConfig& cfg,
                                            double mu = kMuMoon,
                                            int* raw_count = nullptr);

// frames-CSV (t_s,qw,qx,qy,qz,x_m,y_m,z_m,solar_deg) round trip, scalar-first
// unit quaternion for the attitude.
void save_frames(const std::vector<MissionFrame>& frames,
                 const std::string& path);
std::vector<MissionFrame> load_frames(const std::string& path);

}  // namespace stella::mission_sim
