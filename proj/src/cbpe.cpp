#include "stella/cbpe.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace stella::cbpe {

namespace {

using Eigen::Matrix3d;
using Eigen::MatrixXd;
using Eigen::Vector3d;
using Eigen::VectorXd;
using Vector6d = Eigen::Matrix<double, 6, 1>;

Matrix3d exp_so3(const Vector3d& w) {
  const double angle = w.norm();
  if (angle < 1e-14) return Matrix3d::Identity();
  return Eigen::AngleAxisd(angle, w / angle).toRotationMatrix();
}

// Tangent update followed by projection back into the componentwise
// constraint box around the prior: rotation-vector components clamped to
// +-delta, position components to +-gamma. The prior itself was drawn from a
// componentwise box around the truth, so this box is guaranteed to contain
// the truth (to second order in delta on the attitude side).
Pose apply_and_project(const Pose& pose, const Vector6d& step, const Pose& prior,
                       double delta_rad, double gamma) {
  Pose out;
  out.rotation = exp_so3(step.head<3>()) * pose.rotation;
  out.position = pose.position + step.tail<3>();

  const Eigen::AngleAxisd rel(out.rotation * prior.rotation.transpose());
  Vector3d rvec = rel.angle() * rel.axis();
  bool clamped = false;
  for (int k = 0; k < 3; ++k) {
    if (std::abs(rvec[k]) > delta_rad) {
      rvec[k] = std::clamp(rvec[k], -delta_rad, delta_rad);
      clamped = true;
    }
  }
  if (clamped) out.rotation = exp_so3(rvec) * prior.rotation;
  for (int k = 0; k < 3; ++k) {
    out.position[k] = std::clamp(out.position[k], prior.position[k] - gamma,
                                 prior.position[k] + gamma);
  }

  // Re-orthonormalize to keep SO(3) drift below validity tolerances.
  Eigen::JacobiSVD<Matrix3d> svd(out.rotation,
                                 Eigen::ComputeFullU | Eigen::ComputeFullV);
  Matrix3d u = svd.matrixU(), v = svd.matrixV();
  if ((u * v.transpose()).determinant() < 0.0) u.col(2) = -u.col(2);
  out.rotation = u * v.transpose();
  return out;
}

}  // namespace

double tukey_loss(double f, double alpha) {
  const double cap = alpha * alpha / 6.0;
  if (std::abs(f) > alpha) return cap;
  const double u = 1.0 - (f / alpha) * (f / alpha);
  return cap * (1.0 - u * u * u);
}

double tukey_weight(double f, double alpha) {
  if (std::abs(f) > alpha) return 0.0;
  const double u = 1.0 - (f / alpha) * (f / alpha);
  return u * u;
}

Result<PncResult, PncError> pnc_solve(const FrameDetections& frame,
                                      const CorrespondenceSet& corr,
                                      const Catalogue& cat, const Pose& prior,
                                      const CameraIntrinsics& cam,
                                      const PncConfig& cfg, const Pose* init) {
  const int n = static_cast<int>(corr.pairs.size());
  if (n < 3) return PncError::kInsufficientCorrespondences;
  const double delta_rad = cfg.delta * kDegToRad;

  // Residual norms per correspondence; degenerate projections count as
  // out-of-band (constant loss, zero weight).
  auto residual_norms = [&](const Pose& pose, std::vector<double>& f) {
    f.resize(n);
    for (int k = 0; k < n; ++k) {
      const auto& [i, j] = corr.pairs[k];
      f[k] = cid::ellipse_distance(frame.detections[i].ellipse, cat.disc(j),
                                   pose, cam);
    }
  };
  auto robust_objective = [&](const std::vector<double>& f) {
    double obj = 0.0;
    for (double fk : f) {
      obj += std::isfinite(fk) ? tukey_loss(fk, cfg.alpha)
                               : cfg.alpha * cfg.alpha / 6.0;
    }
    return obj;
  };
  // Plain squared objective used while every weight is zero: the robust loss
  // is flat beyond alpha, so far-off starts need an unweighted surrogate to
  // descend into the loss band.
  auto squared_objective = [&](const std::vector<double>& f) {
    double obj = 0.0;
    for (double fk : f) {
      obj += std::isfinite(fk) ? fk * fk : 1e30;
    }
    return obj;
  };
  // Stacked 5-vector residuals for the weighted Gauss-Newton subproblem.
  auto stacked_residuals = [&](const Pose& pose, const std::vector<int>& active,
                               VectorXd& r) {
    for (size_t a = 0; a < active.size(); ++a) {
      const auto& [i, j] = corr.pairs[active[a]];
      auto proj = geometry::project_crater(cat.disc(j), pose, cam);
      if (!proj) return false;
      r.segment<5>(5 * a) =
          cid::ellipse_residual(frame.detections[i].ellipse, proj.value());
    }
    return true;
  };

  PncResult res;
  res.pose = apply_and_project(init ? *init : prior, Vector6d::Zero(), prior,
                               delta_rad, cfg.gamma);

  std::vector<double> f;
  residual_norms(res.pose, f);

  const double h_rot = 1e-7;  // [rad]
  const double h_pos = 0.5;   // [m]
  double lambda = 1e-6;

  for (int iter = 0; iter < cfg.max_irls_iters; ++iter) {
    std::vector<int> active;
    std::vector<double> weights;
    for (int k = 0; k < n; ++k) {
      const double w = std::isfinite(f[k]) ? tukey_weight(f[k], cfg.alpha) : 0.0;
      if (w > 0.0) {
        active.push_back(k);
        weights.push_back(w);
      }
    }
    const bool fallback = active.empty();
    if (fallback) {
      for (int k = 0; k < n; ++k) {
        if (std::isfinite(f[k])) {
          active.push_back(k);
          weights.push_back(1.0);
        }
      }
      if (active.empty()) break;
    }
    auto objective = [&](const std::vector<double>& fv) {
      return fallback ? squared_objective(fv) : robust_objective(fv);
    };
    double obj = objective(f);

    const int m = static_cast<int>(active.size());
    VectorXd r(5 * m);
    if (!stacked_residuals(res.pose, active, r)) break;

    MatrixXd jac(5 * m, 6);
    bool ok = true;
    for (int p = 0; p < 6 && ok; ++p) {
      const double h = p < 3 ? h_rot : h_pos;
      Vector6d dp = Vector6d::Zero(), dm = Vector6d::Zero();
      dp[p] = h;
      dm[p] = -h;
      Pose pose_p = res.pose, pose_m = res.pose;
      pose_p.rotation = exp_so3(dp.head<3>()) * res.pose.rotation;
      pose_p.position = res.pose.position + dp.tail<3>();
      pose_m.rotation = exp_so3(dm.head<3>()) * res.pose.rotation;
      pose_m.position = res.pose.position + dm.tail<3>();
      VectorXd rp(5 * m), rm(5 * m);
      ok = stacked_residuals(pose_p, active, rp) &&
           stacked_residuals(pose_m, active, rm);
      if (ok) jac.col(p) = (rp - rm) / (2.0 * h);
    }
    if (!ok) break;

    // Row weighting by sqrt(w).
    for (int a = 0; a < m; ++a) {
      const double sw = std::sqrt(weights[a]);
      r.segment<5>(5 * a) *= sw;
      jac.middleRows<5>(5 * a) *= sw;
    }

    const Eigen::Matrix<double, 6, 6> jtj = jac.transpose() * jac;
    const Vector6d g = jac.transpose() * r;

    bool accepted = false;
    for (int attempt = 0; attempt < 10 && !accepted; ++attempt) {
      Eigen::Matrix<double, 6, 6> damped = jtj;
      damped.diagonal() += lambda * jtj.diagonal().cwiseMax(1e-12);
      const Vector6d step = damped.ldlt().solve(-g);
      // Backtrack on the active objective so each phase stays monotone.
      for (double scale = 1.0; scale >= 1.0 / 64.0; scale *= 0.5) {
        const Pose cand = apply_and_project(res.pose, scale * step, prior,
                                            delta_rad, cfg.gamma);
        std::vector<double> f_new;
        residual_norms(cand, f_new);
        const double obj_new = objective(f_new);
        if (obj_new < obj) {
          const double rel = (obj - obj_new) / std::max(obj, 1e-300);
          res.pose = cand;
          f = std::move(f_new);
          obj = obj_new;
          lambda = std::max(lambda * 0.3, 1e-12);
          accepted = true;
          if (rel < cfg.convergence_tol && !fallback) {
            res.converged = true;
            iter = cfg.max_irls_iters;
          }
          break;
        }
      }
      if (!accepted) lambda *= 10.0;
    }
    if (!accepted || obj < 1e-18) {
      if (!fallback) {
        res.converged = true;
        break;
      }
      // A stalled fallback phase cannot recover: no pair ever entered the
      // loss band.
      if (!accepted) break;
    }
  }

  res.residuals = f;
  res.objective = robust_objective(f);
  res.inlier_count = 0;
  for (double fk : f) {
    if (std::isfinite(fk) && std::abs(fk) <= cfg.alpha) ++res.inlier_count;
  }
  if (res.inlier_count == 0) return PncError::kDegenerate;
  return res;
}

std::optional<Pose> gate_result(const PncResult& res, int min_inliers) {
  if (res.inlier_count < min_inliers) return std::nullopt;
  return res.pose;
}

}  // namespace stella::cbpe
