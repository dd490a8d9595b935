#include "stella/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <bit>
#include <chrono>
#include <cmath>
#include <fstream>
#include <functional>
#include <iomanip>
#include <limits>
#include <random>
#include <sstream>
#include <thread>

#include <json.hpp>

namespace stella::pipeline {

namespace {

using geometry::Matrix3d;
using geometry::Vector3d;

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t frame_seed(std::uint64_t run_seed, double timestamp) {
  return splitmix64(run_seed ^ std::bit_cast<std::uint64_t>(timestamp));
}

double surface_error(const Pose& estimate, const Pose& truth,
                     const CameraIntrinsics& cam) {
  auto est = geometry::surface_intersection(estimate, cam, kMoonRadiusM);
  auto ref = geometry::surface_intersection(truth, cam, kMoonRadiusM);
  if (!est || !ref) return std::numeric_limits<double>::infinity();
  return (est.value() - ref.value()).norm();
}

}  // namespace

std::string to_string(FrameStatus s) {
  switch (s) {
    case FrameStatus::kOk: return "OK";
    case FrameStatus::kNoResultCda: return "NoResultCDA";
    case FrameStatus::kNoResultCid: return "NoResultCID";
    case FrameStatus::kNoResultGate: return "NoResultGate";
  }
  return "?";
}

std::optional<FrameStatus> status_from_string(const std::string& s) {
  if (s == "OK") return FrameStatus::kOk;
  if (s == "NoResultCDA") return FrameStatus::kNoResultCda;
  if (s == "NoResultCID") return FrameStatus::kNoResultCid;
  if (s == "NoResultGate") return FrameStatus::kNoResultGate;
  return std::nullopt;
}

Pose init_prior(const Pose& truth, double pos_sigma, double att_sigma_deg,
                std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);

  Pose prior;
  for (int k = 0; k < 3; ++k) {
    prior.position[k] = truth.position[k] + pos_sigma * unit(rng);
  }
  const double s = att_sigma_deg * kDegToRad;
  const double ax = s * unit(rng), ay = s * unit(rng), az = s * unit(rng);
  prior.rotation = (Eigen::AngleAxisd(ax, Vector3d::UnitX()) *
                    Eigen::AngleAxisd(ay, Vector3d::UnitY()) *
                    Eigen::AngleAxisd(az, Vector3d::UnitZ()))
                       .toRotationMatrix() *
                   truth.rotation;
  return prior;
}

FrameReport run_core(const MissionFrame& frame, const FrameDetections& dets,
                     const Catalogue& cat, const RunConfig& cfg) {
  const auto t_start = std::chrono::steady_clock::now();
  const CameraIntrinsics cam = cfg.camera.intrinsics();
  const std::uint64_t fseed = frame_seed(cfg.seed, frame.timestamp);

  FrameReport report;
  report.timestamp = frame.timestamp;
  auto finish = [&](FrameStatus status) {
    report.status = status;
    report.runtime = std::chrono::duration<double>(
                         std::chrono::steady_clock::now() - t_start)
                         .count();
    return report;
  };

  if (dets.detections.empty()) return finish(FrameStatus::kNoResultCda);

  const Pose prior = init_prior(frame.truth_pose, cfg.prior_pos_sigma,
                                cfg.prior_att_sigma, splitmix64(fseed));

  auto subcat = catalogue::visibility_subcatalogue(
      cat, prior, cfg.cid.pos_uncertainty, cfg.cid.att_uncertainty, cam);
  if (!subcat) return finish(FrameStatus::kNoResultCid);

  auto corr = cid::pecan_match(dets, subcat.value(), prior, cam, cfg.cid);
  if (!corr) return finish(FrameStatus::kNoResultCid);

  // The identified position replaces the prior position only when it stays
  // inside the original initialisation box.
  Pose refined_prior = prior;
  if ((corr.value().position_estimate - prior.position).cwiseAbs().maxCoeff() <=
      cfg.pnc.gamma) {
    refined_prior.position = corr.value().position_estimate;
  }

  auto pnc = cbpe::pnc_solve(dets, corr.value(), subcat.value(), refined_prior,
                             cam, cfg.pnc);
  if (!pnc) return finish(FrameStatus::kNoResultCid);

  // Re-association pass: correspondences extracted at the refined pose are
  // far more reliable than those at the coarse identification position, so
  // one more solve from there removes most mis-association bias.
  auto corr2 = cid::extract_correspondences(dets, subcat.value(),
                                            pnc.value().pose, cam,
                                            cfg.cid.epsilon);
  const Pose pass1_pose = pnc.value().pose;
  if (auto pnc2 = cbpe::pnc_solve(dets, corr2, subcat.value(), refined_prior,
                                  cam, cfg.pnc, &pass1_pose);
      pnc2 && pnc2.value().inlier_count >= pnc.value().inlier_count) {
    pnc = pnc2;
  }
  report.inlier_count = pnc.value().inlier_count;

  auto gated = cbpe::gate_result(pnc.value(), cfg.min_inliers);
  if (!gated) return finish(FrameStatus::kNoResultGate);

  report.pose_estimate = gated.value();
  report.position_error =
      (gated.value().position - frame.truth_pose.position).norm();
  report.angular_error = geometry::angular_error(gated.value().rotation,
                                                 frame.truth_pose.rotation);
  report.observed_surface_error =
      surface_error(gated.value(), frame.truth_pose, cam);
  return finish(FrameStatus::kOk);
}

FrameReport run_core(const MissionFrame& frame, const Catalogue& cat,
                     const RunConfig& cfg) {
  detector_sim::NoiseConfig noise = cfg.noise;
  noise.seed = frame_seed(cfg.seed, frame.timestamp);
  const auto dets = detector_sim::simulate_detections(
      frame.truth_pose, cat, cfg.camera.intrinsics(), noise,
      cfg.camera.image_size,
      mission_sim::sun_direction(cfg.mission.sun, frame.timestamp),
      frame.timestamp);
  return run_core(frame, dets, cat, cfg);
}

std::vector<FrameReport> run_batch(const std::vector<MissionFrame>& frames,
                                   const Catalogue& cat, const RunConfig& cfg,
                                   int n_threads) {
  if (n_threads <= 0) {
    n_threads = std::max(1u, std::thread::hardware_concurrency());
  }
  std::vector<FrameReport> reports(frames.size());
  std::atomic<size_t> next{0};
  auto worker = [&] {
    for (size_t i = next.fetch_add(1); i < frames.size();
         i = next.fetch_add(1)) {
      reports[i] = run_core(frames[i], cat, cfg);
    }
  };
  std::vector<std::thread> pool;
  for (int k = 1; k < n_threads; ++k) pool.emplace_back(worker);
  worker();
  for (auto& th : pool) th.join();
  return reports;
}

Result<std::vector<od::TimedPosition>, od::OdError> run_od(
    const std::vector<FrameReport>& reports, const std::vector<double>& all_times,
    double mu) {
  // Pose estimates live in the Moon-fixed frame; two-body dynamics hold in
  // the inertial one, so de-rotate the uniform lunar spin before fitting and
  // re-apply it to the propagated output.
  std::vector<od::TimedPosition> obs;
  for (const auto& rep : reports) {
    if (rep.status == FrameStatus::kOk && rep.pose_estimate) {
      obs.push_back({rep.timestamp, mission_sim::moon_spin(rep.timestamp) *
                                        rep.pose_estimate->position});
    }
  }
  auto fit = od::fit_orbit(obs, mu);
  if (!fit) return fit.error();
  const double epoch =
      std::min_element(obs.begin(), obs.end(),
                       [](const auto& a, const auto& b) {
                         return a.timestamp < b.timestamp;
                       })
          ->timestamp;
  auto refined = od::propagate_to_timestamps(fit.value(), epoch, all_times, mu);
  for (auto& tp : refined) {
    tp.position = mission_sim::moon_spin(tp.timestamp).transpose() * tp.position;
  }
  return refined;
}

MetricStats compute_stats(std::vector<double> values) {
  MetricStats st;
  st.count = static_cast<int>(values.size());
  if (values.empty()) return st;
  std::sort(values.begin(), values.end());
  const size_t n = values.size();
  st.median = n % 2 ? values[n / 2]
                    : (values[n / 2 - 1] + values[n / 2]) / 2.0;
  double sum = 0.0, sq = 0.0;
  for (double v : values) {
    sum += v;
    sq += v * v;
  }
  st.average = sum / n;
  st.rms = std::sqrt(sq / n);
  double var = 0.0;
  for (double v : values) var += (v - st.average) * (v - st.average);
  st.std_dev = std::sqrt(var / n);
  return st;
}

Summary summarize(const std::vector<FrameReport>& reports,
                  const std::vector<MissionFrame>& frames,
                  const std::vector<od::TimedPosition>& refined) {
  Summary s;
  s.n_frames = static_cast<int>(reports.size());

  std::vector<double> pos_err, ang_err, surf_err, runtimes;
  for (const auto& rep : reports) {
    runtimes.push_back(rep.runtime);
    switch (rep.status) {
      case FrameStatus::kOk:
        ++s.n_ok;
        pos_err.push_back(rep.position_error);
        ang_err.push_back(rep.angular_error);
        surf_err.push_back(rep.observed_surface_error);
        break;
      case FrameStatus::kNoResultCda: ++s.n_no_cda; break;
      case FrameStatus::kNoResultCid: ++s.n_no_cid; break;
      case FrameStatus::kNoResultGate: ++s.n_no_gate; break;
    }
  }
  s.position_error = compute_stats(pos_err);
  s.angular_error = compute_stats(ang_err);
  s.observed_surface_error = compute_stats(surf_err);
  s.runtime = compute_stats(runtimes);

  s.solar_bins.resize(9);
  std::vector<std::vector<double>> bin_surf(9);
  for (int b = 0; b < 9; ++b) {
    s.solar_bins[b].lo = 10.0 * b;
    s.solar_bins[b].hi = 10.0 * (b + 1);
  }
  const size_t paired = std::min(frames.size(), reports.size());
  for (size_t i = 0; i < paired; ++i) {
    int b = static_cast<int>(frames[i].solar_angle / 10.0);
    b = std::clamp(b, 0, 8);
    ++s.solar_bins[b].total_count;
    if (reports[i].status == FrameStatus::kOk) {
      ++s.solar_bins[b].ok_count;
      bin_surf[b].push_back(reports[i].observed_surface_error);
    }
  }
  for (int b = 0; b < 9; ++b) {
    s.solar_bins[b].surface_error = compute_stats(std::move(bin_surf[b]));
  }

  if (!refined.empty() && refined.size() == frames.size()) {
    std::vector<double> errs;
    errs.reserve(refined.size());
    for (size_t i = 0; i < refined.size(); ++i) {
      errs.push_back(
          (refined[i].position - frames[i].truth_pose.position).norm());
    }
    s.refined_position_error = compute_stats(std::move(errs));
  }
  return s;
}

namespace {

nlohmann::json stats_json(const MetricStats& st) {
  return {{"average", st.average},
          {"median", st.median},
          {"std", st.std_dev},
          {"rms", st.rms},
          {"count", st.count}};
}

}  // namespace

void save_summary(const Summary& summary, const std::string& path) {
  nlohmann::json j;
  j["n_frames"] = summary.n_frames;
  j["status_counts"] = {{"OK", summary.n_ok},
                        {"NoResultCDA", summary.n_no_cda},
                        {"NoResultCID", summary.n_no_cid},
                        {"NoResultGate", summary.n_no_gate}};
  j["position_error_m"] = stats_json(summary.position_error);
  j["angular_error_deg"] = stats_json(summary.angular_error);
  j["observed_surface_error_m"] = stats_json(summary.observed_surface_error);
  j["runtime_s"] = stats_json(summary.runtime);
  if (summary.refined_position_error) {
    j["refined_position_error_m"] = stats_json(*summary.refined_position_error);
  }
  j["attitude_perturbation"] = "per-axis uniform Euler offsets";
  auto& bins = j["solar_bins"];
  bins = nlohmann::json::array();
  for (const auto& b : summary.solar_bins) {
    bins.push_back({{"lo_deg", b.lo},
                    {"hi_deg", b.hi},
                    {"total", b.total_count},
                    {"ok", b.ok_count},
                    {"surface_error_m", stats_json(b.surface_error)}});
  }
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write summary file: " + path);
  out << j.dump(2) << '\n';
}

void save_reports(const std::vector<FrameReport>& reports,
                  const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write reports file: " + path);
  out << "t_s,status,inliers,pos_err_m,ang_err_deg,surf_err_m,runtime_s,"
         "qw,qx,qy,qz,x_m,y_m,z_m\n";
  out.precision(17);
  for (const auto& rep : reports) {
    out << rep.timestamp << ',' << to_string(rep.status) << ','
        << rep.inlier_count << ',' << rep.position_error << ','
        << rep.angular_error << ',' << rep.observed_surface_error << ','
        << rep.runtime << ',';
    if (rep.pose_estimate) {
      Eigen::Quaterniond q(rep.pose_estimate->rotation);
      if (q.w() < 0.0) q.coeffs() = -q.coeffs();
      out << q.w() << ',' << q.x() << ',' << q.y() << ',' << q.z() << ','
          << rep.pose_estimate->position.x() << ','
          << rep.pose_estimate->position.y() << ','
          << rep.pose_estimate->position.z();
    } else {
      out << ",,,,,,";
    }
    out << '\n';
  }
}

std::vector<FrameReport> load_reports(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open reports file: " + path);
  std::string line;
  std::getline(in, line);  // header
  std::vector<FrameReport> out;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string field;
    while (std::getline(ss, field, ',')) fields.push_back(field);
    while (fields.size() < 14) fields.emplace_back();
    FrameReport rep;
    rep.timestamp = std::stod(fields[0]);
    auto status = status_from_string(fields[1]);
    if (!status) throw std::runtime_error("bad status in line: " + line);
    rep.status = *status;
    rep.inlier_count = std::stoi(fields[2]);
    rep.position_error = std::stod(fields[3]);
    rep.angular_error = std::stod(fields[4]);
    rep.observed_surface_error = std::stod(fields[5]);
    rep.runtime = std::stod(fields[6]);
    if (!fields[7].empty()) {
      Eigen::Quaterniond q(std::stod(fields[7]), std::stod(fields[8]),
                           std::stod(fields[9]), std::stod(fields[10]));
      Pose pose;
      pose.rotation = q.normalized().toRotationMatrix();
      pose.position = Vector3d(std::stod(fields[11]), std::stod(fields[12]),
                               std::stod(fields[13]));
      rep.pose_estimate = pose;
    }
    out.push_back(rep);
  }
  return out;
}

namespace {

struct ConfigField {
  std::string section, key;
  std::function<void(RunConfig&, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
};

std::string fmt(double v) {
  std::ostringstream ss;
  ss.precision(17);
  ss << v;
  return ss.str();
}

const std::vector<ConfigField>& config_fields() {
  auto dbl = [](auto member) {
    return std::pair{
        std::function<void(RunConfig&, const std::string&)>(
            [member](RunConfig& c, const std::string& v) {
              member(c) = std::stod(v);
            }),
        std::function<std::string(const RunConfig&)>(
            [member](const RunConfig& c) {
              return fmt(member(const_cast<RunConfig&>(c)));
            })};
  };
  auto field = [&](const char* sec, const char* key, auto member) {
    auto [set, get] = dbl(member);
    return ConfigField{sec, key, set, get};
  };

  static const std::vector<ConfigField> fields = [&] {
    std::vector<ConfigField> f;
    f.push_back(field("mission", "semi_major_axis_km",
                      [](RunConfig& c) -> double& { return c.mission.orbit.semi_major_axis; }));
    f.push_back(field("mission", "eccentricity",
                      [](RunConfig& c) -> double& { return c.mission.orbit.eccentricity; }));
    f.push_back(field("mission", "inclination_deg",
                      [](RunConfig& c) -> double& { return c.mission.orbit.inclination; }));
    f.push_back(field("mission", "raan_deg",
                      [](RunConfig& c) -> double& { return c.mission.orbit.raan; }));
    f.push_back(field("mission", "arg_periapsis_deg",
                      [](RunConfig& c) -> double& { return c.mission.orbit.arg_periapsis; }));
    f.push_back(field("mission", "true_anomaly_deg",
                      [](RunConfig& c) -> double& { return c.mission.orbit.true_anomaly; }));
    f.push_back(field("mission", "start_epoch_s",
                      [](RunConfig& c) -> double& { return c.mission.start_epoch; }));
    f.push_back(field("mission", "duration_days",
                      [](RunConfig& c) -> double& { return c.mission.duration_days; }));
    f.push_back(field("mission", "cadence_s",
                      [](RunConfig& c) -> double& { return c.mission.cadence; }));
    f.push_back(field("mission", "off_nadir_deg",
                      [](RunConfig& c) -> double& { return c.mission.off_nadir; }));
    f.push_back(field("mission", "sun_plane_inclination_deg",
                      [](RunConfig& c) -> double& { return c.mission.sun.plane_inclination; }));
    f.push_back(field("mission", "sun_initial_phase_deg",
                      [](RunConfig& c) -> double& { return c.mission.sun.initial_phase; }));
    f.push_back(field("noise", "center_sigma_px",
                      [](RunConfig& c) -> double& { return c.noise.center_sigma; }));
    f.push_back(field("noise", "axis_sigma_frac",
                      [](RunConfig& c) -> double& { return c.noise.axis_sigma_frac; }));
    f.push_back(field("noise", "angle_sigma_rad",
                      [](RunConfig& c) -> double& { return c.noise.angle_sigma; }));
    f.push_back(field("noise", "miss_rate",
                      [](RunConfig& c) -> double& { return c.noise.miss_rate; }));
    f.push_back(field("noise", "clutter_rate",
                      [](RunConfig& c) -> double& { return c.noise.clutter_rate; }));
    f.push_back(field("noise", "confidence_threshold",
                      [](RunConfig& c) -> double& { return c.noise.confidence_threshold; }));
    f.push_back(field("cid", "epsilon",
                      [](RunConfig& c) -> double& { return c.cid.epsilon; }));
    f.push_back(field("cid", "termination_fraction",
                      [](RunConfig& c) -> double& { return c.cid.termination_fraction; }));
    f.push_back(field("cid", "pos_uncertainty_m",
                      [](RunConfig& c) -> double& { return c.cid.pos_uncertainty; }));
    f.push_back(field("cid", "att_uncertainty_deg",
                      [](RunConfig& c) -> double& { return c.cid.att_uncertainty; }));
    f.push_back(ConfigField{
        "cid", "max_hypotheses",
        [](RunConfig& c, const std::string& v) { c.cid.max_hypotheses = std::stoi(v); },
        [](const RunConfig& c) { return std::to_string(c.cid.max_hypotheses); }});
    f.push_back(field("pnc", "alpha",
                      [](RunConfig& c) -> double& { return c.pnc.alpha; }));
    f.push_back(field("pnc", "delta_deg",
                      [](RunConfig& c) -> double& { return c.pnc.delta; }));
    f.push_back(field("pnc", "gamma_m",
                      [](RunConfig& c) -> double& { return c.pnc.gamma; }));
    f.push_back(ConfigField{
        "pnc", "max_irls_iters",
        [](RunConfig& c, const std::string& v) { c.pnc.max_irls_iters = std::stoi(v); },
        [](const RunConfig& c) { return std::to_string(c.pnc.max_irls_iters); }});
    f.push_back(field("pnc", "convergence_tol",
                      [](RunConfig& c) -> double& { return c.pnc.convergence_tol; }));
    f.push_back(field("camera", "focal_length_px",
                      [](RunConfig& c) -> double& { return c.camera.focal_length; }));
    f.push_back(field("camera", "image_width_px",
                      [](RunConfig& c) -> double& { return c.camera.image_size.x(); }));
    f.push_back(field("camera", "image_height_px",
                      [](RunConfig& c) -> double& { return c.camera.image_size.y(); }));
    f.push_back(ConfigField{
        "run", "min_inliers",
        [](RunConfig& c, const std::string& v) { c.min_inliers = std::stoi(v); },
        [](const RunConfig& c) { return std::to_string(c.min_inliers); }});
    f.push_back(field("run", "prior_pos_sigma_m",
                      [](RunConfig& c) -> double& { return c.prior_pos_sigma; }));
    f.push_back(field("run", "prior_att_sigma_deg",
                      [](RunConfig& c) -> double& { return c.prior_att_sigma; }));
    f.push_back(ConfigField{
        "run", "seed",
        [](RunConfig& c, const std::string& v) { c.seed = std::stoull(v); },
        [](const RunConfig& c) { return std::to_string(c.seed); }});
    f.push_back(ConfigField{
        "run", "catalogue_path",
        [](RunConfig& c, const std::string& v) { c.catalogue_path = v; },
        [](const RunConfig& c) { return c.catalogue_path; }});
    return f;
  }();
  return fields;
}

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

}  // namespace

void apply_config_file(const std::string& path, RunConfig& cfg) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file: " + path);
  std::string line, section;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[' && line.back() == ']') {
      section = trim(line.substr(1, line.size() - 2));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw std::runtime_error("config line " + std::to_string(lineno) +
                               ": expected key = value");
    }
    const std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    if (value.size() >= 2 && value.front() == '"' && value.back() == '"') {
      value = value.substr(1, value.size() - 2);
    }
    bool found = false;
    for (const auto& f : config_fields()) {
      if (f.section == section && f.key == key) {
        f.set(cfg, value);
        found = true;
        break;
      }
    }
    if (!found) {
      throw std::runtime_error("config line " + std::to_string(lineno) +
                               ": unknown key [" + section + "] " + key);
    }
  }
}

std::string serialize_config(const RunConfig& cfg) {
  std::ostringstream out;
  std::string section;
  for (const auto& f : config_fields()) {
    if (f.section != section) {
      section = f.section;
      out << '[' << section << "]\n";
    }
    out << f.key << " = " << f.get(cfg) << '\n';
  }
  return out.str();
}

std::string config_hash(const RunConfig& cfg) {
  const std::string text = serialize_config(cfg);
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  std::ostringstream out;
  out << std::hex << std::setw(16) << std::setfill('0') << h;
  return out.str();
}

}  // namespace stella::pipeline
