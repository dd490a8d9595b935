#include "stella/detector_sim.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>

#include <json.hpp>

namespace stella::detector_sim {

namespace {

using json = nlohmann::json;

double beta_sample(std::mt19937_64& rng, double a, double b) {
  std::gamma_distribution<double> ga(a, 1.0), gb(b, 1.0);
  const double x = ga(rng);
  const double y = gb(rng);
  return x / (x + y);
}

// Miss probability ramps linearly from the nominal rate at <= 60 deg solar
// angle to 3x at 90 deg, capped at 0.95.
double effective_miss_rate(double miss_rate, double solar_deg) {
  if (solar_deg <= 60.0) return miss_rate;
  const double frac = std::min((solar_deg - 60.0) / 30.0, 1.0);
  return std::min(miss_rate * (1.0 + 2.0 * frac), 0.95);
}

double wrap_angle(double theta) {
  theta = std::fmod(theta, kPi);
  if (theta < 0.0) theta += kPi;
  return theta;
}

}  // namespace

bool apparent_size_filter(const EllipseParams& ellipse, double min_semi_minor,
                          const Vector2d& image_size) {
  if (ellipse.semi_minor < min_semi_minor) return false;
  // Half-extents of the axis-aligned bounding box of a rotated ellipse.
  const double ct = std::cos(ellipse.orientation);
  const double st = std::sin(ellipse.orientation);
  const double a = ellipse.semi_major, b = ellipse.semi_minor;
  const double hx = std::sqrt(a * a * ct * ct + b * b * st * st);
  const double hy = std::sqrt(a * a * st * st + b * b * ct * ct);
  return ellipse.center.x() - hx >= 0.0 && ellipse.center.y() - hy >= 0.0 &&
         ellipse.center.x() + hx <= image_size.x() &&
         ellipse.center.y() + hy <= image_size.y();
}

FrameDetections simulate_detections(const Pose& truth_pose, const Catalogue& cat,
                                    const CameraIntrinsics& cam,
                                    const NoiseConfig& noise,
                                    const Vector2d& image_size,
                                    const Vector3d& sun_direction,
                                    double timestamp) {
  FrameDetections frame;
  frame.timestamp = timestamp;
  frame.ground_truth_ids.emplace();

  double solar_deg;
  if (auto hit = geometry::surface_intersection(truth_pose, cam,
                                                cat.moon_radius())) {
    solar_deg = geometry::solar_angle(hit.value(), sun_direction);
  } else {
    solar_deg = geometry::solar_angle(truth_pose.position, sun_direction);
  }
  const double miss = effective_miss_rate(noise.miss_rate, solar_deg);

  const double r = truth_pose.position.norm();
  const double horizon = std::acos(
      std::clamp(cat.moon_radius() / std::max(r, cat.moon_radius()), -1.0, 1.0));
  std::vector<int> candidates =
      cat.index().query_cone(truth_pose.position, horizon + 0.02);
  std::sort(candidates.begin(), candidates.end());

  std::mt19937_64 rng(noise.seed);
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  std::normal_distribution<double> gauss(0.0, 1.0);

  for (int i : candidates) {
    auto proj = geometry::project_crater(cat.disc(i), truth_pose, cam);
    if (!proj) continue;
    if (!apparent_size_filter(proj.value(), kMinSemiMinorPx, image_size)) {
      continue;
    }
    if (uni(rng) < miss) continue;

    EllipseParams e = proj.value();
    e.center.x() += noise.center_sigma * gauss(rng);
    e.center.y() += noise.center_sigma * gauss(rng);
    e.semi_major *= 1.0 + noise.axis_sigma_frac * gauss(rng);
    e.semi_minor *= 1.0 + noise.axis_sigma_frac * gauss(rng);
    e.semi_minor = std::max(e.semi_minor, 0.1);
    e.semi_major = std::max(e.semi_major, e.semi_minor);
    e.orientation = wrap_angle(e.orientation + noise.angle_sigma * gauss(rng));

    Detection det;
    det.ellipse = e;
    det.confidence = beta_sample(rng, 9.0, 3.0);
    if (det.confidence < noise.confidence_threshold) continue;
    frame.detections.push_back(det);
    frame.ground_truth_ids->push_back(cat.entries()[i].id);
  }

  if (noise.clutter_rate > 0.0) {
    std::poisson_distribution<int> poisson(noise.clutter_rate);
    const int n_clutter = poisson(rng);
    const double min_a = 2.0 * kMinSemiMinorPx;
    const double max_a = image_size.x() / 4.0;
    for (int k = 0; k < n_clutter; ++k) {
      EllipseParams e;
      e.center.x() = uni(rng) * image_size.x();
      e.center.y() = uni(rng) * image_size.y();
      e.semi_major = min_a * std::exp(uni(rng) * std::log(max_a / min_a));
      e.semi_minor = e.semi_major * (0.5 + 0.5 * uni(rng));
      e.orientation = uni(rng) * kPi;
      Detection det;
      det.ellipse = e;
      det.confidence = beta_sample(rng, 3.0, 6.0);
      if (det.confidence < noise.confidence_threshold) continue;
      frame.detections.push_back(det);
      frame.ground_truth_ids->push_back(kClutterId);
    }
  }
  return frame;
}

void save_detections(const FrameDetections& frame, const std::string& path) {
  json arr = json::array();
  for (size_t i = 0; i < frame.detections.size(); ++i) {
    const Detection& d = frame.detections[i];
    json rec = {
        {"t", frame.timestamp},
        {"x", d.ellipse.center.x()},
        {"y", d.ellipse.center.y()},
        {"a", d.ellipse.semi_major},
        {"b", d.ellipse.semi_minor},
        {"theta", d.ellipse.orientation},
        {"conf", d.confidence},
    };
    if (frame.ground_truth_ids) rec["gt_id"] = (*frame.ground_truth_ids)[i];
    arr.push_back(std::move(rec));
  }
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write detections file: " + path);
  out << arr.dump(2) << '\n';
}

FrameDetections load_detections(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open detections file: " + path);
  json arr = json::parse(in);
  FrameDetections frame;
  bool any_gt = false;
  std::vector<std::string> gt;
  for (const auto& rec : arr) {
    frame.timestamp = rec.value("t", 0.0);
    Detection d;
    d.ellipse.center.x() = rec.at("x").get<double>();
    d.ellipse.center.y() = rec.at("y").get<double>();
    d.ellipse.semi_major = rec.at("a").get<double>();
    d.ellipse.semi_minor = rec.at("b").get<double>();
    d.ellipse.orientation = rec.at("theta").get<double>();
    d.confidence = rec.value("conf", 1.0);
    frame.detections.push_back(d);
    if (rec.contains("gt_id")) any_gt = true;
    gt.push_back(rec.value("gt_id", std::string{}));
  }
  if (any_gt) frame.ground_truth_ids = std::move(gt);
  return frame;
}

}  // namespace stella::detector_sim
