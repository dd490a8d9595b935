#pragma once

namespace stella {

// Spherical-Moon reference radius [m].
inline constexpr double kMoonRadiusM = 1'737'400.0;

// Lunar gravitational parameter [km^3/s^2].
inline constexpr double kMuMoon = 4902.800066;

// Sidereal rotation period of the Moon [s].
inline constexpr double kMoonSiderealPeriodS = 27.321661 * 86400.0;

// Sidereal period of the simplified Sun model [s].
inline constexpr double kSolarPeriodS = 365.25 * 86400.0;

inline constexpr double kPi = 3.14159265358979323846;
inline constexpr double kDegToRad = kPi / 180.0;
inline constexpr double kRadToDeg = 180.0 / kPi;

}  // namespace stella
