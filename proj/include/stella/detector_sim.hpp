#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "stella/catalogue.hpp"
#include "stella/geometry.hpp"

namespace stella::detector_sim {

using catalogue::Catalogue;
using geometry::CameraIntrinsics;
using geometry::EllipseParams;
using geometry::Pose;
using geometry::Vector2d;
using geometry::Vector3d;

// Placeholder ground-truth label for spurious detections.
inline constexpr const char* kClutterId = "CLUTTER";

// Smallest apparent semi-minor axis [px] a projected crater must have to be
// considered detectable.
inline constexpr double kMinSemiMinorPx = 3.0;

struct Detection {
  EllipseParams ellipse;
  double confidence = 1.0;  // in [0, 1]
};

struct NoiseConfig {
  double center_sigma = 1.0;        // [px]
  double axis_sigma_frac = 0.03;    // fraction of the axis length
  double angle_sigma = 0.02;        // [rad]
  double miss_rate = 0.3;           // in [0, 1)
  double clutter_rate = 8.0;        // expected spurious detections per frame
  double confidence_threshold = 0.5;
  std::uint64_t seed = 0;
};

struct FrameDetections {
  double timestamp = 0.0;  // [s]
  std::vector<Detection> detections;
  // One label per detection (catalogue id or kClutterId), when ground truth
  // is known.
  std::optional<std::vector<std::string>> ground_truth_ids;
};

// True iff the ellipse clears the minimum size and its axis-aligned bounding
// box lies inside [0, image_size.x] x [0, image_size.y].
bool apparent_size_filter(const EllipseParams& ellipse, double min_semi_minor,
                          const Vector2d& image_size);

// Stand-in for a learned crater detector: projects all visible catalogue
// craters, drops a solar-angle-dependent fraction, perturbs the survivors,
// and adds confidence-scored clutter. Deterministic for a given config.
FrameDetections simulate_detections(const Pose& truth_pose, const Catalogue& cat,
                                    const CameraIntrinsics& cam,
                                    const NoiseConfig& noise,
                                    const Vector2d& image_size,
                                    const Vector3d& sun_direction,
                                    double timestamp = 0.0);

// detections-JSON round trip (array of {t, x, y, a, b, theta, conf, gt_id}).
void save_detections(const FrameDetections& frame, const std::string& path);
FrameDetections load_detections(const std::string& path);

}  // namespace stella::detector_sim
