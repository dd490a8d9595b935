#pragma once

#include <vector>

#include <Eigen/Dense>

#include "stella/constants.hpp"
#include "stella/result.hpp"

namespace stella::od {

using Eigen::Vector3d;

enum class OdError {
  kDegenerate,
  kKeplerNoConvergence,
  kNotCoplanar,
  kTooClose,
  kInitializationFailed,
  kNoConvergence,
};

// Classical elements, elliptic orbits only. Angles in degrees, [0, 360).
struct KeplerianElements {
  double semi_major_axis = 0.0;  // a [km]
  double eccentricity = 0.0;     // e, in [0, 1)
  double inclination = 0.0;      // i [deg]
  double raan = 0.0;             // Omega [deg]
  double arg_periapsis = 0.0;    // omega [deg]
  double true_anomaly = 0.0;     // nu [deg]
};

struct StateVector {
  Vector3d position = Vector3d::Zero();  // [km]
  Vector3d velocity = Vector3d::Zero();  // [km/s]
  double epoch = 0.0;                    // [s]
};

struct TimedPosition {
  double timestamp = 0.0;                // [s]
  Vector3d position = Vector3d::Zero();  // [m]
};

// Perifocal-to-inertial conversion of classical elements.
StateVector koe_to_state(const KeplerianElements& koe, double mu = kMuMoon,
                         double epoch = 0.0);

// Inverse conversion. Canonical angles on the singular sets: raan = 0 for
// equatorial orbits (i < 1e-9 deg), arg_periapsis = 0 for circular orbits
// (e < 1e-12), with downstream angles measured from the substituted axes.
Result<KeplerianElements, OdError> state_to_koe(const StateVector& sv,
                                                double mu = kMuMoon);

// Two-body propagation by Kepler's-equation solve on the eccentric anomaly.
Result<StateVector, OdError> propagate(const StateVector& sv, double dt,
                                       double mu = kMuMoon);

// Gibbs velocity determination at the middle of three coplanar, sequential
// position vectors [km].
Result<Vector3d, OdError> gibbs_velocity(const Vector3d& r1, const Vector3d& r2,
                                         const Vector3d& r3, double mu = kMuMoon);

// Least-squares orbit fit to timestamped positions. The returned elements
// are valid at the epoch of the first observation.
Result<KeplerianElements, OdError> fit_orbit(const std::vector<TimedPosition>& obs,
                                             double mu = kMuMoon);

std::vector<TimedPosition> propagate_to_timestamps(
    const KeplerianElements& koe, double epoch, const std::vector<double>& times,
    double mu = kMuMoon);

// Specific orbital energy [km^2/s^2]; conserved under two-body motion.
double specific_energy(const StateVector& sv, double mu = kMuMoon);

double orbital_period(double semi_major_axis_km, double mu = kMuMoon);

// positions-CSV (t_s,x_m,y_m,z_m) round trip.
void save_positions(const std::vector<TimedPosition>& positions,
                    const std::string& path);
std::vector<TimedPosition> load_positions(const std::string& path);

}  // namespace stella::od
