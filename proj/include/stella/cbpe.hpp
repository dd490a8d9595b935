#pragma once

#include <optional>
#include <vector>

#include "stella/catalogue.hpp"
#include "stella/cid.hpp"
#include "stella/detector_sim.hpp"
#include "stella/geometry.hpp"

namespace stella::cbpe {

using catalogue::Catalogue;
using cid::CorrespondenceSet;
using detector_sim::FrameDetections;
using geometry::CameraIntrinsics;
using geometry::Pose;

enum class PncError { kInsufficientCorrespondences, kDegenerate };

struct PncConfig {
  double alpha = 20.0;          // Tukey scale, aligned with the CID threshold
  double delta = 0.02;          // [deg] attitude box half-width
  double gamma = 11'000.0;      // [m] position box radius
  int max_irls_iters = 50;
  double convergence_tol = 1e-10;
};

struct PncResult {
  Pose pose;
  int inlier_count = 0;
  std::vector<double> residuals;  // per correspondence, at the final pose
  bool converged = false;
  double objective = 0.0;         // robust objective at the final pose
};

// Tukey's biweight loss: (a^2/6)(1 - [1 - (f/a)^2]^3) inside |f| <= a,
// constant a^2/6 outside.
double tukey_loss(double f, double alpha);

// IRLS weight consistent with the loss: [1 - (f/a)^2]^2 inside, 0 outside.
double tukey_weight(double f, double alpha);

// Robust 6DoF refinement of the pose over the box around the prior:
// attitude within `delta` degrees, position within `gamma` metres.
// IRLS over Tukey weights with a damped Gauss-Newton inner step; monotone in
// the robust objective.
// `init`, when given, is the starting iterate (clamped into the box); the
// box itself always stays centred on `prior`.
Result<PncResult, PncError> pnc_solve(const FrameDetections& frame,
                                      const CorrespondenceSet& corr,
                                      const Catalogue& cat, const Pose& prior,
                                      const CameraIntrinsics& cam,
                                      const PncConfig& cfg,
                                      const Pose* init = nullptr);

// STELLA-core-X gate: pass the pose through iff the inlier support reaches
// `min_inliers`.
std::optional<Pose> gate_result(const PncResult& res, int min_inliers);

}  // namespace stella::cbpe
