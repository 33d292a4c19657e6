#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <span>
#include <vector>

#include "rotip/errors.hpp"
#include "rotip/rng.hpp"
#include "rotip/sensor.hpp"
#include "rotip/transform.hpp"

namespace rotip {

struct PlaneEstimate {
  UnitVector3 normal;
  double d = 0.0;  // n . p = d
  int inlier_count = 0;
  double rms_residual = 0.0;

  Plane3 plane() const { return Plane3{normal, d}; }
};

namespace detail {

// Orthonormal basis of the plane orthogonal to n, deterministic in n.
inline std::pair<Vec3, Vec3> orthogonal_basis(const Vec3& n) {
  Vec3 ref = std::abs(n.x()) < 0.9 ? Vec3::UnitX() : Vec3::UnitY();
  Vec3 e1 = (ref - n * n.dot(ref)).normalized();
  return {e1, n.cross(e1)};
}

}  // namespace detail

// Total-least-squares plane through a point set: centroid plus the smallest
// eigenvector of the scatter matrix. The normal is flipped, if needed, to
// face the view origin (the camera centre for sensor-frame clouds).
inline PlaneEstimate fit_plane_tls(std::span<const Vec3> points,
                                   const Vec3& view_origin = Vec3::Zero()) {
  if (points.size() < 3)
    throw PreconditionViolation("fit_plane_tls: need at least 3 points");
  Vec3 centroid = Vec3::Zero();
  for (const Vec3& p : points) centroid += p;
  centroid /= static_cast<double>(points.size());

  Mat3 scatter = Mat3::Zero();
  for (const Vec3& p : points) {
    Vec3 q = p - centroid;
    scatter += q * q.transpose();
  }
  Eigen::SelfAdjointEigenSolver<Mat3> eig(scatter);
  Vec3 n = eig.eigenvectors().col(0);
  if (n.dot(view_origin - centroid) < 0.0) n = -n;

  PlaneEstimate est{UnitVector3(n), n.dot(centroid), 0, 0.0};
  double ss = 0.0;
  for (const Vec3& p : points) {
    double r = est.normal.vec().dot(p) - est.d;
    ss += r * r;
  }
  est.inlier_count = static_cast<int>(points.size());
  est.rms_residual = std::sqrt(ss / static_cast<double>(points.size()));
  return est;
}

// Seeded RANSAC over a contact point cloud, refined by a total-least-squares
// fit of the best consensus set. Ties in consensus size keep the earlier
// hypothesis, so a fixed seed always reproduces the same plane.
inline PlaneEstimate ransac_plane(const ContactPointCloud& cloud, int iters,
                                  double tol, std::uint64_t seed,
                                  const Vec3& view_origin = Vec3::Zero()) {
  const std::vector<Vec3>& pts = cloud.points;
  const std::size_t n = pts.size();
  if (n < 3)
    throw PreconditionViolation("ransac_plane: need at least 3 points");
  if (iters < 1 || tol <= 0.0)
    throw PreconditionViolation("ransac_plane: iters >= 1 and tol > 0 required");

  // a cloud within tol of a single line supports every plane through that
  // line equally well; refuse instead of returning an arbitrary winner
  {
    Vec3 centroid = Vec3::Zero();
    for (const Vec3& p : pts) centroid += p;
    centroid /= static_cast<double>(n);
    Mat3 scatter = Mat3::Zero();
    for (const Vec3& p : pts) {
      Vec3 q = p - centroid;
      scatter += q * q.transpose();
    }
    Eigen::SelfAdjointEigenSolver<Mat3> eig(scatter);
    Vec3 axis = eig.eigenvectors().col(2);
    double max_off = 0.0;
    for (const Vec3& p : pts) {
      Vec3 q = p - centroid;
      max_off = std::max(max_off, (q - axis * axis.dot(q)).norm());
    }
    if (max_off <= tol)
      throw DegenerateCloud("ransac_plane: points are collinear within tol");
  }

  Rng rng(seed);
  int best_count = -1;
  Vec3 best_n = Vec3::UnitZ();
  double best_d = 0.0;
  for (int it = 0; it < iters; ++it) {
    std::size_t i = rng.index(n);
    std::size_t j = rng.index(n);
    std::size_t k = rng.index(n);
    if (i == j || j == k || i == k) continue;
    Vec3 nv = (pts[j] - pts[i]).cross(pts[k] - pts[i]);
    double nn = nv.norm();
    if (nn < 1e-12) continue;
    nv /= nn;
    double d = nv.dot(pts[i]);
    int count = 0;
    for (const Vec3& p : pts)
      if (std::abs(nv.dot(p) - d) <= tol) ++count;
    if (count > best_count) {
      best_count = count;
      best_n = nv;
      best_d = d;
    }
  }
  if (best_count < 3)
    throw DegenerateCloud("ransac_plane: no hypothesis reached 3 inliers");

  std::vector<Vec3> inliers;
  inliers.reserve(n);
  for (const Vec3& p : pts)
    if (std::abs(best_n.dot(p) - best_d) <= tol) inliers.push_back(p);

  PlaneEstimate est = fit_plane_tls(inliers, view_origin);

  // report support of the refined plane
  int count = 0;
  double ss = 0.0;
  for (const Vec3& p : pts) {
    double r = est.normal.vec().dot(p) - est.d;
    if (std::abs(r) <= tol) {
      ++count;
      ss += r * r;
    }
  }
  est.inlier_count = count;
  est.rms_residual = count > 0 ? std::sqrt(ss / count) : 0.0;
  return est;
}

// Stand-in for an external plane estimate (vision or wrist force): the true
// plane's normal tilted about a random in-plane axis by a folded-normal
// angle whose mean equals `mean_err_deg`.
inline PlaneEstimate perturbed_plane_estimate(const Plane3& truth,
                                              double mean_err_deg,
                                              std::uint64_t seed) {
  if (mean_err_deg < 0.0)
    throw PreconditionViolation("perturbed_plane_estimate: negative error");
  Rng rng(seed);
  double ang = rng.folded_normal_with_mean(mean_err_deg) * M_PI / 180.0;
  double phi = rng.uniform(0.0, 2.0 * M_PI);
  auto [e1, e2] = detail::orthogonal_basis(truth.n.vec());
  Vec3 axis = std::cos(phi) * e1 + std::sin(phi) * e2;
  Mat3 rot = detail::so3_exp(axis * ang);
  UnitVector3 n(rot * truth.n.vec());
  return PlaneEstimate{n, truth.d, 0, 0.0};
}

inline PlaneEstimate vision_plane_baseline(const Plane3& truth,
                                           double mean_err_deg,
                                           std::uint64_t seed) {
  return perturbed_plane_estimate(truth, mean_err_deg,
                                  stream_seed(seed, /*tag=*/0x76697369));
}

inline PlaneEstimate force_plane_baseline(const Plane3& truth,
                                          double mean_err_deg,
                                          std::uint64_t seed) {
  return perturbed_plane_estimate(truth, mean_err_deg,
                                  stream_seed(seed, /*tag=*/0x666f7263));
}

}  // namespace rotip
