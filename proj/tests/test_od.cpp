#include <doctest.h>

#include <filesystem>
#include <random>

#include "stella/od.hpp"

using namespace stella;
using namespace stella::od;
using Eigen::Vector3d;

namespace {

KeplerianElements random_elliptic(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  KeplerianElements koe;
  koe.semi_major_axis = 1800.0 + 2000.0 * uni(rng);
  koe.eccentricity = 0.5 * uni(rng);
  koe.inclination = 179.0 * uni(rng) + 0.5;
  koe.raan = 360.0 * uni(rng);
  koe.arg_periapsis = 360.0 * uni(rng);
  koe.true_anomaly = 360.0 * uni(rng);
  return koe;
}

double angle_diff(double a, double b) {
  double d = std::fmod(std::abs(a - b), 360.0);
  return std::min(d, 360.0 - d);
}

}  // namespace

TEST_CASE("koe -> state -> koe round trip") {
  std::mt19937_64 rng(31);
  for (int trial = 0; trial < 500; ++trial) {
    const auto koe = random_elliptic(rng);
    auto back = state_to_koe(koe_to_state(koe));
    REQUIRE(back.ok());
    CHECK(back.value().semi_major_axis ==
          doctest::Approx(koe.semi_major_axis).epsilon(1e-10));
    CHECK(back.value().eccentricity ==
          doctest::Approx(koe.eccentricity).epsilon(1e-8));
    CHECK(angle_diff(back.value().inclination, koe.inclination) < 1e-9);
    CHECK(angle_diff(back.value().raan, koe.raan) < 1e-7);
    CHECK(angle_diff(back.value().arg_periapsis, koe.arg_periapsis) < 1e-5);
    CHECK(angle_diff(back.value().true_anomaly, koe.true_anomaly) < 1e-5);
  }
}

TEST_CASE("state vector magnitudes match vis-viva") {
  std::mt19937_64 rng(37);
  for (int trial = 0; trial < 100; ++trial) {
    const auto koe = random_elliptic(rng);
    const auto sv = koe_to_state(koe);
    const double r = sv.position.norm();
    const double expect_v =
        std::sqrt(kMuMoon * (2.0 / r - 1.0 / koe.semi_major_axis));
    CHECK(sv.velocity.norm() == doctest::Approx(expect_v).epsilon(1e-12));
    // Radius from the conic equation.
    const double p = koe.semi_major_axis * (1.0 - koe.eccentricity * koe.eccentricity);
    const double expect_r =
        p / (1.0 + koe.eccentricity * std::cos(koe.true_anomaly * kDegToRad));
    CHECK(r == doctest::Approx(expect_r).epsilon(1e-12));
  }
}

TEST_CASE("canonical angles on singular orbits") {
  SUBCASE("equatorial") {
    KeplerianElements koe{2000.0, 0.3, 0.0, 123.0, 45.0, 10.0};
    auto back = state_to_koe(koe_to_state(koe));
    REQUIRE(back.ok());
    CHECK(back.value().raan == 0.0);
    CHECK(back.value().inclination < 1e-9);
    // The in-plane anomaly sum is preserved even though raan collapses.
    CHECK(angle_diff(back.value().raan + back.value().arg_periapsis +
                         back.value().true_anomaly,
                     123.0 + 45.0 + 10.0) < 1e-5);
  }
  SUBCASE("circular") {
    KeplerianElements koe{2000.0, 0.0, 45.0, 10.0, 77.0, 30.0};
    auto back = state_to_koe(koe_to_state(koe));
    REQUIRE(back.ok());
    CHECK(back.value().arg_periapsis == 0.0);
    CHECK(angle_diff(back.value().arg_periapsis + back.value().true_anomaly,
                     77.0 + 30.0) < 1e-5);
  }
}

TEST_CASE("hyperbolic and degenerate states are rejected") {
  StateVector sv;
  sv.position = Vector3d(2000.0, 0.0, 0.0);
  sv.velocity = Vector3d(0.0, 10.0, 0.0);  // far above escape speed
  auto koe = state_to_koe(sv);
  REQUIRE(!koe.ok());
  CHECK(koe.error() == OdError::kDegenerate);

  sv.velocity = Vector3d(1.0, 0.0, 0.0);  // radial: zero angular momentum
  auto rad = state_to_koe(sv);
  REQUIRE(!rad.ok());
}

TEST_CASE("propagation conserves energy and angular momentum") {
  std::mt19937_64 rng(41);
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  for (int trial = 0; trial < 1000; ++trial) {
    const auto koe = random_elliptic(rng);
    const auto sv = koe_to_state(koe);
    const double dt = (uni(rng) - 0.3) * 5.0e5;
    auto prop = propagate(sv, dt);
    REQUIRE(prop.ok());
    const double e0 = specific_energy(sv);
    const double e1 = specific_energy(prop.value());
    CHECK(std::abs(e1 - e0) / std::abs(e0) < 1e-10);
    const Vector3d h0 = sv.position.cross(sv.velocity);
    const Vector3d h1 = prop.value().position.cross(prop.value().velocity);
    CHECK((h1 - h0).norm() / h0.norm() < 1e-10);
  }
}

TEST_CASE("period return closes the orbit") {
  std::mt19937_64 rng(43);
  for (int trial = 0; trial < 200; ++trial) {
    const auto koe = random_elliptic(rng);
    const auto sv = koe_to_state(koe);
    const double period = orbital_period(koe.semi_major_axis);
    auto prop = propagate(sv, period);
    REQUIRE(prop.ok());
    CHECK((prop.value().position - sv.position).norm() < 1e-6);
    CHECK((prop.value().velocity - sv.velocity).norm() < 1e-9);
  }
}

TEST_CASE("propagation composes") {
  KeplerianElements koe{1837.7, 3.8e-4, 90.0, 227.0, 295.0, 91.0};
  const auto sv = koe_to_state(koe);
  auto one = propagate(sv, 700.0).value();
  auto two = propagate(one, 500.0).value();
  auto direct = propagate(sv, 1200.0).value();
  CHECK((two.position - direct.position).norm() < 1e-8);
  CHECK(two.epoch == doctest::Approx(direct.epoch));
}

TEST_CASE("gibbs velocity matches the propagator") {
  std::mt19937_64 rng(47);
  for (int trial = 0; trial < 100; ++trial) {
    const auto koe = random_elliptic(rng);
    const auto sv1 = koe_to_state(koe);
    const double period = orbital_period(koe.semi_major_axis);
    auto sv2 = propagate(sv1, 0.03 * period).value();
    auto sv3 = propagate(sv1, 0.07 * period).value();
    auto v2 = gibbs_velocity(sv1.position, sv2.position, sv3.position);
    REQUIRE(v2.ok());
    CHECK((v2.value() - sv2.velocity).norm() < 1e-6 * sv2.velocity.norm());
  }
}

TEST_CASE("gibbs rejects bad geometry") {
  KeplerianElements koe{1837.7, 3.8e-4, 90.0, 227.0, 295.0, 91.0};
  const auto sv1 = koe_to_state(koe);
  SUBCASE("non-coplanar") {
    auto sv2 = propagate(sv1, 200.0).value();
    auto sv3 = propagate(sv1, 400.0).value();
    Vector3d lifted = sv3.position + 300.0 * sv1.position.cross(sv1.velocity).normalized();
    auto v = gibbs_velocity(sv1.position, sv2.position, lifted);
    REQUIRE(!v.ok());
    CHECK(v.error() == OdError::kNotCoplanar);
  }
  SUBCASE("too close") {
    auto sv2 = propagate(sv1, 0.5).value();
    auto sv3 = propagate(sv1, 400.0).value();
    auto v = gibbs_velocity(sv1.position, sv2.position, sv3.position);
    REQUIRE(!v.ok());
    CHECK(v.error() == OdError::kTooClose);
  }
}

TEST_CASE("orbit fit recovers the generating elements") {
  KeplerianElements koe{1837.7, 3.8e-4, 90.0, 227.0, 295.0, 91.0};
  const auto sv0 = koe_to_state(koe);
  const double period = orbital_period(koe.semi_major_axis);
  std::vector<TimedPosition> obs;
  for (int k = 0; k < 40; ++k) {
    const double t = 4.0 * period * k / 39.0;
    obs.push_back({t, propagate(sv0, t).value().position * 1000.0});
  }
  auto fit = fit_orbit(obs);
  REQUIRE(fit.ok());
  CHECK(std::abs(fit.value().semi_major_axis - koe.semi_major_axis) /
            koe.semi_major_axis < 1e-9);
  CHECK(std::abs(fit.value().eccentricity - koe.eccentricity) < 1e-9);
  CHECK(angle_diff(fit.value().inclination, koe.inclination) < 1e-6);
  CHECK(angle_diff(fit.value().raan, koe.raan) < 1e-6);
}

TEST_CASE("orbit fit needs at least three observations") {
  std::vector<TimedPosition> obs = {{0.0, Vector3d(1.8e6, 0, 0)},
                                    {100.0, Vector3d(1.8e6, 1e5, 0)}};
  auto fit = fit_orbit(obs);
  REQUIRE(!fit.ok());
  CHECK(fit.error() == OdError::kInitializationFailed);
}

TEST_CASE("fit tolerates unsorted observations") {
  KeplerianElements koe{1900.0, 0.01, 60.0, 10.0, 20.0, 30.0};
  const auto sv0 = koe_to_state(koe);
  const double period = orbital_period(koe.semi_major_axis);
  std::vector<TimedPosition> obs;
  for (int k : {7, 2, 9, 0, 5, 3, 8, 1, 6, 4}) {
    const double t = 2.0 * period * k / 9.0;
    obs.push_back({t, propagate(sv0, t).value().position * 1000.0});
  }
  auto fit = fit_orbit(obs);
  REQUIRE(fit.ok());
  CHECK(std::abs(fit.value().semi_major_axis - koe.semi_major_axis) /
            koe.semi_major_axis < 1e-8);
}

TEST_CASE("propagate_to_timestamps covers every request in order") {
  KeplerianElements koe{1837.7, 3.8e-4, 90.0, 227.0, 295.0, 91.0};
  std::vector<double> times = {0.0, 600.0, 1200.0, 50'000.0};
  auto out = propagate_to_timestamps(koe, 0.0, times);
  REQUIRE(out.size() == times.size());
  for (size_t k = 0; k < times.size(); ++k) {
    CHECK(out[k].timestamp == times[k]);
    CHECK(out[k].position.norm() > 1.7e6);  // metres
  }
}

TEST_CASE("positions CSV round trip") {
  std::vector<TimedPosition> pos = {
      {0.0, Vector3d(1.0, -2.5, 3.75e6)},
      {1200.0, Vector3d(-1.7e6, 42.0, 0.125)},
  };
  const auto path =
      (std::filesystem::temp_directory_path() / "pos_roundtrip.csv").string();
  save_positions(pos, path);
  auto back = load_positions(path);
  REQUIRE(back.size() == 2);
  for (size_t k = 0; k < 2; ++k) {
    CHECK(back[k].timestamp == pos[k].timestamp);
    CHECK((back[k].position - pos[k].position).norm() == doctest::Approx(0.0));
  }
  std::filesystem::remove(path);
}
