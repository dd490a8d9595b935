#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "stella/catalogue.hpp"
#include "stella/cbpe.hpp"
#include "stella/cid.hpp"
#include "stella/detector_sim.hpp"
#include "stella/mission_sim.hpp"
#include "stella/od.hpp"

namespace stella::pipeline {

using catalogue::Catalogue;
using detector_sim::FrameDetections;
using geometry::CameraIntrinsics;
using geometry::Pose;
using geometry::Vector2d;
using mission_sim::MissionFrame;

enum class FrameStatus { kOk, kNoResultCda, kNoResultCid, kNoResultGate };

std::string to_string(FrameStatus s);
std::optional<FrameStatus> status_from_string(const std::string& s);

struct CameraConfig {
  double focal_length = 1000.0;        // [px]
  Vector2d image_size{1024.0, 1024.0}; // [px]

  // Principal point at the image centre.
  CameraIntrinsics intrinsics() const {
    return CameraIntrinsics{focal_length, image_size / 2.0};
  }
};

struct RunConfig {
  mission_sim::MissionConfig mission;
  detector_sim::NoiseConfig noise;
  cid::CidConfig cid;
  cbpe::PncConfig pnc;
  CameraConfig camera;
  int min_inliers = 0;            // 0 = plain core, 6 = core-6
  double prior_pos_sigma = 11'000.0;  // [m]
  double prior_att_sigma = 0.02;      // [deg]
  std::uint64_t seed = 0;
  std::string catalogue_path;
};

struct FrameReport {
  double timestamp = 0.0;
  FrameStatus status = FrameStatus::kNoResultCda;
  std::optional<Pose> pose_estimate;
  int inlier_count = 0;
  // Error fields are meaningful iff status is kOk.
  double position_error = 0.0;          // [m]
  double angular_error = 0.0;           // [deg]
  double observed_surface_error = 0.0;  // [m]
  double runtime = 0.0;                 // [s]
};

// Truth pose perturbed componentwise: position uniform in +-pos_sigma per
// axis, attitude by independent uniform per-axis Euler offsets in
// +-att_sigma degrees. Deterministic per seed.
Pose init_prior(const Pose& truth, double pos_sigma, double att_sigma_deg,
                std::uint64_t seed);

// Single-frame core pass: detect, identify, refine, gate. Failures become
// statuses, never exceptions.
FrameReport run_core(const MissionFrame& frame, const Catalogue& cat,
                     const RunConfig& cfg);

// Same pass over externally supplied detections (real-detector ingestion).
FrameReport run_core(const MissionFrame& frame, const FrameDetections& dets,
                     const Catalogue& cat, const RunConfig& cfg);

// Parallel core pass over a batch; the catalogue is shared read-only.
// n_threads = 0 picks the hardware concurrency.
std::vector<FrameReport> run_batch(const std::vector<MissionFrame>& frames,
                                   const Catalogue& cat, const RunConfig& cfg,
                                   int n_threads = 0);

// Orbit fit over OK reports, then propagation to every requested timestamp
// (failed frames receive the orbit fallback). Estimates are de-rotated into
// the inertial frame for the fit and the output is returned Moon-fixed.
Result<std::vector<od::TimedPosition>, od::OdError> run_od(
    const std::vector<FrameReport>& reports, const std::vector<double>& all_times,
    double mu = kMuMoon);

struct MetricStats {
  double average = 0.0;
  double median = 0.0;
  double std_dev = 0.0;
  double rms = 0.0;
  int count = 0;
};

MetricStats compute_stats(std::vector<double> values);

struct SolarBin {
  double lo = 0.0, hi = 0.0;  // [deg]
  int ok_count = 0;
  int total_count = 0;
  MetricStats surface_error;
};

struct Summary {
  int n_frames = 0;
  int n_ok = 0, n_no_cda = 0, n_no_cid = 0, n_no_gate = 0;
  MetricStats position_error;          // over OK frames [m]
  MetricStats angular_error;           // over OK frames [deg]
  MetricStats observed_surface_error;  // over OK frames [m]
  MetricStats runtime;                 // over all frames [s]
  // Refined (orbit-fitted) position error over all frames, when OD ran.
  std::optional<MetricStats> refined_position_error;
  std::vector<SolarBin> solar_bins;  // decades [0,10) .. [80,90]
};

// Aggregates core metrics, status counts and solar-angle decade bins;
// refined errors are computed against the frame truths when `refined` is
// non-empty (matched by timestamp order).
Summary summarize(const std::vector<FrameReport>& reports,
                  const std::vector<MissionFrame>& frames,
                  const std::vector<od::TimedPosition>& refined = {});

void save_summary(const Summary& summary, const std::string& path);

// reports-CSV round trip (status, metrics and the estimated pose per frame).
void save_reports(const std::vector<FrameReport>& reports,
                  const std::string& path);
std::vector<FrameReport> load_reports(const std::string& path);

// Flat key=value / [section] config file (TOML subset). Unknown keys throw.
void apply_config_file(const std::string& path, RunConfig& cfg);
std::string serialize_config(const RunConfig& cfg);

// FNV-1a over the canonical serialization; used to key run directories.
std::string config_hash(const RunConfig& cfg);

}  // namespace stella::pipeline
