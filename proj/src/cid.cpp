#include "stella/cid.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>

namespace stella::cid {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kCircularAxisRatio = 0.95;

double wrap_half_pi(double dtheta) {
  // Maps into (-pi/2, pi/2]; ellipse orientation is pi-periodic.
  while (dtheta > kPi / 2.0) dtheta -= kPi;
  while (dtheta <= -kPi / 2.0) dtheta += kPi;
  return dtheta;
}

Pose pose_at(const Matrix3d& attitude, const Vector3d& t) {
  Pose p;
  p.rotation = attitude;
  p.position = t;
  return p;
}

}  // namespace

Eigen::Matrix<double, 5, 1> ellipse_residual(const EllipseParams& d,
                                             const EllipseParams& projected) {
  Eigen::Matrix<double, 5, 1> r;
  r[0] = d.center.x() - projected.center.x();
  r[1] = d.center.y() - projected.center.y();
  r[2] = d.semi_major - projected.semi_major;
  r[3] = d.semi_minor - projected.semi_minor;
  const bool circular =
      d.semi_minor / d.semi_major > kCircularAxisRatio ||
      projected.semi_minor / projected.semi_major > kCircularAxisRatio;
  r[4] = circular ? 0.0 : wrap_half_pi(d.orientation - projected.orientation);
  return r;
}

double ellipse_distance(const EllipseParams& d, const CraterDisc& c,
                        const Pose& pose, const CameraIntrinsics& cam) {
  auto proj = geometry::project_crater(c, pose, cam);
  if (!proj) return kInf;
  return ellipse_residual(d, proj.value()).norm();
}

Result<Vector3d, CidError> p1e_position(const EllipseParams& d,
                                        const CraterDisc& c,
                                        const Matrix3d& attitude,
                                        const CameraIntrinsics& cam,
                                        double epsilon, int max_iters) {
  // Back-projected ray through the detected centre; range from the ratio of
  // metric to apparent semi-major axis.
  const Vector3d dir_cam =
      geometry::intrinsic_matrix(cam)
          .inverse()
          .eval()
          .lazyProduct(Vector3d(d.center.x(), d.center.y(), 1.0))
          .normalized();
  const Vector3d dir_world = attitude * dir_cam;
  const double range = cam.focal_length * c.semi_axes.x() / d.semi_major;
  Vector3d t = c.center_world - range * dir_world;

  auto residual = [&](const Vector3d& pos, Eigen::Matrix<double, 5, 1>& r) {
    auto proj = geometry::project_crater(c, pose_at(attitude, pos), cam);
    if (!proj) return false;
    r = ellipse_residual(d, proj.value());
    return true;
  };

  Eigen::Matrix<double, 5, 1> r;
  if (!residual(t, r)) return CidError::kNoConvergence;
  double cost = r.squaredNorm();

  double lambda = 1e-6;
  const double h = std::max(0.5, 1e-7 * range);  // [m] central-diff step
  for (int iter = 0; iter < max_iters; ++iter) {
    Eigen::Matrix<double, 5, 3> jac;
    bool ok = true;
    for (int k = 0; k < 3 && ok; ++k) {
      Vector3d tp = t, tm = t;
      tp[k] += h;
      tm[k] -= h;
      Eigen::Matrix<double, 5, 1> rp, rm;
      ok = residual(tp, rp) && residual(tm, rm);
      if (ok) jac.col(k) = (rp - rm) / (2.0 * h);
    }
    if (!ok) break;

    const Eigen::Matrix3d jtj = jac.transpose() * jac;
    const Vector3d g = jac.transpose() * r;
    bool accepted = false;
    for (int attempt = 0; attempt < 8; ++attempt) {
      const Vector3d step =
          (jtj + lambda * Eigen::Matrix3d(jtj.diagonal().asDiagonal()))
              .ldlt()
              .solve(-g);
      Eigen::Matrix<double, 5, 1> r_new;
      if (residual(t + step, r_new) && r_new.squaredNorm() < cost) {
        t += step;
        const double new_cost = r_new.squaredNorm();
        const double rel = (cost - new_cost) / std::max(cost, 1e-300);
        r = r_new;
        cost = new_cost;
        lambda = std::max(lambda * 0.3, 1e-12);
        accepted = true;
        if (rel < 1e-8) iter = max_iters;  // converged
        break;
      }
      lambda *= 10.0;
    }
    if (!accepted) break;
  }

  if (std::sqrt(cost) > epsilon) return CidError::kNoConvergence;
  return t;
}

namespace {

// One projection per catalogue crater, shared across detections.
std::vector<std::optional<EllipseParams>> project_all(const Catalogue& subcat,
                                                      const Pose& pose,
                                                      const CameraIntrinsics& cam) {
  std::vector<std::optional<EllipseParams>> proj(subcat.size());
  for (int j = 0; j < subcat.size(); ++j) {
    if (auto p = geometry::project_crater(subcat.disc(j), pose, cam)) {
      proj[j] = p.value();
    }
  }
  return proj;
}

}  // namespace

int score_position(const Vector3d& t, const FrameDetections& frame,
                   const Catalogue& subcat, const Matrix3d& attitude,
                   const CameraIntrinsics& cam, double eps) {
  const Pose pose = pose_at(attitude, t);
  const auto proj = project_all(subcat, pose, cam);
  int score = 0;
  for (const auto& det : frame.detections) {
    for (int j = 0; j < subcat.size(); ++j) {
      if (!proj[j]) continue;
      if (ellipse_residual(det.ellipse, *proj[j]).norm() <= eps) {
        ++score;
        break;
      }
    }
  }
  return score;
}

Result<CorrespondenceSet, CidError> pecan_match(const FrameDetections& frame,
                                                const Catalogue& subcat,
                                                const Pose& prior,
                                                const CameraIntrinsics& cam,
                                                const CidConfig& cfg) {
  const int n_det = static_cast<int>(frame.detections.size());
  if (n_det == 0 || subcat.empty()) return CidError::kNoResult;
  const Matrix3d& attitude = prior.rotation;

  // Hypothesis pairs ordered by apparent-size compatibility at the prior.
  struct Hypothesis {
    int i, j;
    double badness;  // |log(size ratio)|
  };
  std::vector<Hypothesis> hypotheses;
  for (int j = 0; j < subcat.size(); ++j) {
    auto proj = geometry::project_crater(subcat.disc(j), prior, cam);
    if (!proj) continue;
    for (int i = 0; i < n_det; ++i) {
      const double ratio =
          proj.value().semi_major / frame.detections[i].ellipse.semi_major;
      if (ratio < 0.5 || ratio > 2.0) continue;
      hypotheses.push_back({i, j, std::abs(std::log(ratio))});
    }
  }
  std::stable_sort(hypotheses.begin(), hypotheses.end(),
                   [](const Hypothesis& a, const Hypothesis& b) {
                     if (a.badness != b.badness) return a.badness < b.badness;
                     return std::pair(a.i, a.j) < std::pair(b.i, b.j);
                   });
  if (static_cast<int>(hypotheses.size()) > cfg.max_hypotheses) {
    hypotheses.resize(cfg.max_hypotheses);
  }

  int best_score = 0;
  Vector3d best_t = Vector3d::Zero();
  bool have_best = false;
  const double exit_score = cfg.termination_fraction * n_det;

  for (const Hypothesis& hyp : hypotheses) {
    auto cand = p1e_position(frame.detections[hyp.i].ellipse,
                             subcat.disc(hyp.j), attitude, cam, cfg.epsilon);
    if (!cand) continue;
    if (((cand.value() - prior.position).cwiseAbs().maxCoeff()) >
        cfg.pos_uncertainty) {
      continue;
    }
    const int score = score_position(cand.value(), frame, subcat, attitude,
                                     cam, cfg.epsilon);
    if (score > best_score) {
      best_score = score;
      best_t = cand.value();
      have_best = true;
    }
    if (have_best && best_score > exit_score) break;
  }

  if (!have_best || best_score <= exit_score) return CidError::kNoResult;

  CorrespondenceSet out =
      extract_correspondences(frame, subcat, pose_at(attitude, best_t), cam,
                              cfg.epsilon);
  out.position_estimate = best_t;
  out.score = best_score;
  return out;
}

CorrespondenceSet extract_correspondences(const FrameDetections& frame,
                                          const Catalogue& subcat,
                                          const Pose& pose,
                                          const CameraIntrinsics& cam,
                                          double eps) {
  CorrespondenceSet out;
  out.position_estimate = pose.position;
  const auto proj = project_all(subcat, pose, cam);
  for (int i = 0; i < static_cast<int>(frame.detections.size()); ++i) {
    double best_dist = eps;
    int best_j = -1;
    for (int j = 0; j < subcat.size(); ++j) {
      if (!proj[j]) continue;
      const double dist =
          ellipse_residual(frame.detections[i].ellipse, *proj[j]).norm();
      if (dist <= best_dist) {
        best_dist = dist;
        best_j = j;
      }
    }
    if (best_j >= 0) out.pairs.emplace_back(i, best_j);
  }
  out.score = static_cast<int>(out.pairs.size());
  return out;
}

}  // namespace stella::cid
