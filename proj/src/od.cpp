#include "stella/od.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace stella::od {

namespace {

using Eigen::Matrix3d;
using Eigen::MatrixXd;
using Eigen::VectorXd;
using Vector6d = Eigen::Matrix<double, 6, 1>;

double wrap_deg(double angle) {
  angle = std::fmod(angle, 360.0);
  if (angle < 0.0) angle += 360.0;
  return angle;
}

// Newton solve of E - e sin E = M; elliptic orbits converge in a handful of
// iterations from E = M.
Result<double, OdError> solve_kepler(double mean_anomaly, double e) {
  double big_e = mean_anomaly + e * std::sin(mean_anomaly);
  for (int i = 0; i < 50; ++i) {
    const double g = big_e - e * std::sin(big_e) - mean_anomaly;
    const double dg = 1.0 - e * std::cos(big_e);
    const double step = g / dg;
    big_e -= step;
    if (std::abs(step) < 1e-12) return big_e;
  }
  return OdError::kKeplerNoConvergence;
}

}  // namespace

StateVector koe_to_state(const KeplerianElements& koe, double mu, double epoch) {
  const double a = koe.semi_major_axis;
  const double e = koe.eccentricity;
  const double i = koe.inclination * kDegToRad;
  const double raan = koe.raan * kDegToRad;
  const double argp = koe.arg_periapsis * kDegToRad;
  const double nu = koe.true_anomaly * kDegToRad;

  const double p = a * (1.0 - e * e);
  const double r = p / (1.0 + e * std::cos(nu));
  const Vector3d r_pf(r * std::cos(nu), r * std::sin(nu), 0.0);
  const double vs = std::sqrt(mu / p);
  const Vector3d v_pf(-vs * std::sin(nu), vs * (e + std::cos(nu)), 0.0);

  const Matrix3d rot =
      (Eigen::AngleAxisd(raan, Vector3d::UnitZ()) *
       Eigen::AngleAxisd(i, Vector3d::UnitX()) *
       Eigen::AngleAxisd(argp, Vector3d::UnitZ()))
          .toRotationMatrix();

  StateVector sv;
  sv.position = rot * r_pf;
  sv.velocity = rot * v_pf;
  sv.epoch = epoch;
  return sv;
}

Result<KeplerianElements, OdError> state_to_koe(const StateVector& sv, double mu) {
  const Vector3d& r = sv.position;
  const Vector3d& v = sv.velocity;
  const double rn = r.norm();
  const Vector3d h = r.cross(v);
  const double hn = h.norm();
  if (rn < 1e-12 || hn < 1e-9) return OdError::kDegenerate;

  const Vector3d e_vec = ((v.squaredNorm() - mu / rn) * r - r.dot(v) * v) / mu;
  const double e = e_vec.norm();
  if (e > 1.0 - 1e-9) return OdError::kDegenerate;
  const double energy = v.squaredNorm() / 2.0 - mu / rn;
  const double a = -mu / (2.0 * energy);

  KeplerianElements koe;
  koe.semi_major_axis = a;
  koe.eccentricity = e;

  const Vector3d h_hat = h / hn;
  const double inc = std::acos(std::clamp(h_hat.z(), -1.0, 1.0));
  koe.inclination = inc * kRadToDeg;

  Vector3d node = Vector3d::UnitZ().cross(h);
  if (koe.inclination < 1e-9) {
    koe.raan = 0.0;
    node = Vector3d::UnitX();
  } else {
    node.normalize();
    koe.raan = wrap_deg(std::atan2(node.y(), node.x()) * kRadToDeg);
  }

  Vector3d periapsis;
  if (e < 1e-12) {
    koe.arg_periapsis = 0.0;
    periapsis = node;
  } else {
    periapsis = e_vec / e;
    const double w =
        std::atan2(node.cross(periapsis).dot(h_hat), node.dot(periapsis));
    koe.arg_periapsis = wrap_deg(w * kRadToDeg);
  }

  const Vector3d r_hat = r / rn;
  const double nu =
      std::atan2(periapsis.cross(r_hat).dot(h_hat), periapsis.dot(r_hat));
  koe.true_anomaly = wrap_deg(nu * kRadToDeg);
  return koe;
}

Result<StateVector, OdError> propagate(const StateVector& sv, double dt,
                                       double mu) {
  auto koe = state_to_koe(sv, mu);
  if (!koe) return koe.error();
  const double a = koe.value().semi_major_axis;
  const double e = koe.value().eccentricity;

  const double nu0 = koe.value().true_anomaly * kDegToRad;
  const double e0 = 2.0 * std::atan2(std::sqrt(1.0 - e) * std::sin(nu0 / 2.0),
                                     std::sqrt(1.0 + e) * std::cos(nu0 / 2.0));
  const double m0 = e0 - e * std::sin(e0);
  const double n = std::sqrt(mu / (a * a * a));
  const double m = std::remainder(m0 + n * dt, 2.0 * kPi);

  auto big_e = solve_kepler(m, e);
  if (!big_e) return big_e.error();
  const double nu =
      2.0 * std::atan2(std::sqrt(1.0 + e) * std::sin(big_e.value() / 2.0),
                       std::sqrt(1.0 - e) * std::cos(big_e.value() / 2.0));

  KeplerianElements out = koe.value();
  out.true_anomaly = wrap_deg(nu * kRadToDeg);
  return koe_to_state(out, mu, sv.epoch + dt);
}

Result<Vector3d, OdError> gibbs_velocity(const Vector3d& r1, const Vector3d& r2,
                                         const Vector3d& r3, double mu) {
  const Vector3d u1 = r1.normalized(), u2 = r2.normalized(), u3 = r3.normalized();

  const double sep12 = std::acos(std::clamp(u1.dot(u2), -1.0, 1.0));
  const double sep23 = std::acos(std::clamp(u2.dot(u3), -1.0, 1.0));
  const double min_sep = 0.1 * kDegToRad;
  if (sep12 < min_sep || sep23 < min_sep) return OdError::kTooClose;

  const Vector3d plane = u2.cross(u3);
  if (plane.norm() < 1e-12) return OdError::kNotCoplanar;
  const double out_of_plane = std::asin(std::clamp(
      std::abs(u1.dot(plane.normalized())), 0.0, 1.0));
  if (out_of_plane > 1.0 * kDegToRad) return OdError::kNotCoplanar;

  const double n1 = r1.norm(), n2 = r2.norm(), n3 = r3.norm();
  const Vector3d big_n = n1 * r2.cross(r3) + n2 * r3.cross(r1) + n3 * r1.cross(r2);
  const Vector3d big_d = r1.cross(r2) + r2.cross(r3) + r3.cross(r1);
  const Vector3d big_s = (n2 - n3) * r1 + (n3 - n1) * r2 + (n1 - n2) * r3;
  const double nd = big_n.norm() * big_d.norm();
  if (nd < 1e-12 || big_n.dot(big_d) <= 0.0) return OdError::kNotCoplanar;

  return Vector3d(std::sqrt(mu / nd) * (big_d.cross(r2) / n2 + big_s));
}

Result<KeplerianElements, OdError> fit_orbit(const std::vector<TimedPosition>& obs,
                                             double mu) {
  if (obs.size() < 3) return OdError::kInitializationFailed;
  std::vector<TimedPosition> sorted = obs;
  std::sort(sorted.begin(), sorted.end(),
            [](const TimedPosition& a, const TimedPosition& b) {
              return a.timestamp < b.timestamp;
            });
  const int m_count = static_cast<int>(sorted.size());
  const double t_ref = sorted.front().timestamp;

  auto km_pos = [&](int idx) { return Vector3d(sorted[idx].position / 1000.0); };

  // Initialization: Gibbs velocity on a triple from the leading observations
  // (short arcs keep the rewind to the first epoch well-conditioned), then
  // the state is rewound to the first observation epoch.
  const int w0 = std::min(m_count, 8);
  StateVector init;
  bool initialized = false;
  const std::vector<std::array<int, 3>> triples = {
      {0, w0 / 2, w0 - 1},
      {0, m_count / 2, m_count - 1},
      {0, 1, 2},
  };
  for (const auto& tri : triples) {
    if (tri[0] >= tri[1] || tri[1] >= tri[2]) continue;
    auto v2 = gibbs_velocity(km_pos(tri[0]), km_pos(tri[1]), km_pos(tri[2]), mu);
    if (!v2) continue;
    StateVector mid{km_pos(tri[1]), v2.value(), sorted[tri[1]].timestamp};
    auto rewound = propagate(mid, t_ref - mid.epoch, mu);
    if (!rewound) continue;
    init = rewound.value();
    initialized = true;
    break;
  }
  if (!initialized) return OdError::kInitializationFailed;

  // Levenberg-Marquardt over the state vector at t_ref; the classical
  // elements are recovered at the end. The state parameterization avoids the
  // ill-conditioning of near-circular element sets.
  auto residuals = [&](const Vector6d& x, int count, VectorXd& r) {
    StateVector sv{x.head<3>(), x.tail<3>(), t_ref};
    for (int k = 0; k < count; ++k) {
      auto prop = propagate(sv, sorted[k].timestamp - t_ref, mu);
      if (!prop) return false;
      r.segment<3>(3 * k) = prop.value().position - km_pos(k);
    }
    return true;
  };

  auto lm_fit = [&](Vector6d& x, int count) {
    VectorXd r(3 * count);
    if (!residuals(x, count, r)) return false;
    double cost = r.squaredNorm() / count;

    double lambda = 1e-8;
    for (int iter = 0; iter < 200; ++iter) {
      MatrixXd jac(3 * count, 6);
      bool ok = true;
      for (int p = 0; p < 6 && ok; ++p) {
        const double h = p < 3 ? 1e-4 : 1e-7;  // [km], [km/s]
        Vector6d xp = x, xm = x;
        xp[p] += h;
        xm[p] -= h;
        VectorXd rp(3 * count), rm(3 * count);
        ok = residuals(xp, count, rp) && residuals(xm, count, rm);
        if (ok) jac.col(p) = (rp - rm) / (2.0 * h);
      }
      if (!ok) break;

      const Eigen::Matrix<double, 6, 6> jtj = jac.transpose() * jac;
      const Vector6d g = jac.transpose() * r;
      bool accepted = false;
      for (int attempt = 0; attempt < 10 && !accepted; ++attempt) {
        Eigen::Matrix<double, 6, 6> damped = jtj;
        damped.diagonal() += lambda * jtj.diagonal().cwiseMax(1e-12);
        const Vector6d step = damped.ldlt().solve(-g);
        VectorXd r_new(3 * count);
        if (residuals(x + step, count, r_new)) {
          const double cost_new = r_new.squaredNorm() / count;
          if (cost_new < cost) {
            const double rel = (cost - cost_new) / std::max(cost, 1e-300);
            x += step;
            r = std::move(r_new);
            cost = cost_new;
            lambda = std::max(lambda * 0.3, 1e-14);
            accepted = true;
            if (rel < 1e-10) iter = 200;
          }
        }
        if (!accepted) lambda *= 10.0;
      }
      if (!accepted || cost < 1e-24) break;
    }
    return std::isfinite(cost);
  };

  // Arc extension: converge on a short leading window first, then double it.
  // Long multi-orbit arcs are period-aliased when fit in one shot from a
  // rough initial state; each doubling keeps the next window in the basin.
  Vector6d x;
  x << init.position, init.velocity;
  for (int window = w0;; window = std::min(m_count, 2 * window)) {
    if (!lm_fit(x, window)) return OdError::kNoConvergence;
    if (window == m_count) break;
  }

  StateVector fitted{x.head<3>(), x.tail<3>(), t_ref};
  auto koe = state_to_koe(fitted, mu);
  if (!koe) return koe.error();
  return koe.value();
}

std::vector<TimedPosition> propagate_to_timestamps(
    const KeplerianElements& koe, double epoch, const std::vector<double>& times,
    double mu) {
  const StateVector sv = koe_to_state(koe, mu, epoch);
  std::vector<TimedPosition> out;
  out.reserve(times.size());
  for (double t : times) {
    auto prop = propagate(sv, t - epoch, mu);
    if (!prop) throw std::runtime_error("two-body propagation failed");
    out.push_back({t, prop.value().position * 1000.0});
  }
  return out;
}

double specific_energy(const StateVector& sv, double mu) {
  return sv.velocity.squaredNorm() / 2.0 - mu / sv.position.norm();
}

double orbital_period(double semi_major_axis_km, double mu) {
  return 2.0 * kPi *
         std::sqrt(semi_major_axis_km * semi_major_axis_km *
                   semi_major_axis_km / mu);
}

void save_positions(const std::vector<TimedPosition>& positions,
                    const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write positions file: " + path);
  out << "t_s,x_m,y_m,z_m\n";
  out.precision(17);
  for (const auto& p : positions) {
    out << p.timestamp << ',' << p.position.x() << ',' << p.position.y() << ','
        << p.position.z() << '\n';
  }
}

std::vector<TimedPosition> load_positions(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open positions file: " + path);
  std::string line;
  std::getline(in, line);  // header
  std::vector<TimedPosition> out;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    TimedPosition p;
    char comma;
    ss >> p.timestamp >> comma >> p.position.x() >> comma >> p.position.y() >>
        comma >> p.position.z();
    if (!ss) throw std::runtime_error("bad positions line: " + line);
    out.push_back(p);
  }
  return out;
}

}  // namespace stella::od
