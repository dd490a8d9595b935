#pragma once

#include <cstdint>
#include <vector>

#include "stella/catalogue.hpp"
#include "stella/detector_sim.hpp"
#include "stella/geometry.hpp"

namespace stella::cid {

using catalogue::Catalogue;
using detector_sim::FrameDetections;
using geometry::CameraIntrinsics;
using geometry::CraterDisc;
using geometry::EllipseParams;
using geometry::Matrix3d;
using geometry::Pose;
using geometry::Vector3d;

enum class CidError { kNoConvergence, kNoResult };

struct CidConfig {
  double epsilon = 20.0;              // ellipse-distance match threshold
  double termination_fraction = 0.6;  // early-exit score fraction
  double pos_uncertainty = 11'000.0;  // [m]
  double att_uncertainty = 0.02;      // [deg]
  int max_hypotheses = 20'000;
};

struct CorrespondenceSet {
  // (detection index, catalogue index) with detection indices unique.
  std::vector<std::pair<int, int>> pairs;
  Vector3d position_estimate = Vector3d::Zero();  // [m]
  int score = 0;
};

// Algebraic ellipse distance: L2 norm over the 5-vector of parameter
// differences between the detection and the projected catalogue crater, with
// the orientation difference wrapped to (-pi/2, pi/2]. Near-circular shapes
// (axis ratio > 0.95) contribute no orientation residual. Returns +inf for
// degenerate projections.
double ellipse_distance(const EllipseParams& d, const CraterDisc& c,
                        const Pose& pose, const CameraIntrinsics& cam);

// Parameter-space residual used by the solvers; same conventions as
// ellipse_distance.
Eigen::Matrix<double, 5, 1> ellipse_residual(const EllipseParams& d,
                                             const EllipseParams& projected);

// Perspective-1-Ellipsoid stand-in: fixed-attitude 3DoF least squares for
// the camera position that reproduces detection `d` from crater `c`,
// initialized on the back-projected ray at an apparent-size range estimate.
Result<Vector3d, CidError> p1e_position(const EllipseParams& d,
                                        const CraterDisc& c,
                                        const Matrix3d& attitude,
                                        const CameraIntrinsics& cam,
                                        double epsilon = 20.0,
                                        int max_iters = 100);

// Number of detections whose best catalogue crater lies within `eps` at
// position `t` (attitude fixed).
int score_position(const Vector3d& t, const FrameDetections& frame,
                   const Catalogue& subcat, const Matrix3d& attitude,
                   const CameraIntrinsics& cam, double eps);

// Correspondences at a fixed pose: each detection keeps its lowest-residual
// catalogue crater within `eps`; unmatched detections are omitted.
CorrespondenceSet extract_correspondences(const FrameDetections& frame,
                                          const Catalogue& subcat,
                                          const Pose& pose,
                                          const CameraIntrinsics& cam,
                                          double eps);

// Descriptor-less crater identification: searches candidate camera positions
// generated from (detection, crater) hypothesis pairs for the one maximising
// the match count, then extracts the correspondence set at that position.
Result<CorrespondenceSet, CidError> pecan_match(const FrameDetections& frame,
                                                const Catalogue& subcat,
                                                const Pose& prior,
                                                const CameraIntrinsics& cam,
                                                const CidConfig& cfg);

}  // namespace stella::cid
