#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <optional>
#include <span>
#include <vector>

#include "rotip/errors.hpp"
#include "rotip/transform.hpp"

namespace rotip {

// Pinhole model of the camera looking along +z from inside the fingertip.
struct CameraIntrinsics {
  double fx = 500.0;
  double fy = 500.0;
  double cx = 320.0;
  double cy = 240.0;
  int width = 640;
  int height = 480;

  void validate() const {
    if (fx <= 0.0 || fy <= 0.0 || width <= 0 || height <= 0)
      throw PreconditionViolation("CameraIntrinsics: non-positive parameter");
  }
};

// Fingertip surface in the sensor frame: a hemisphere of radius r centred at
// (ox, oy, oz) for z > oz, continued by a cylinder of the same radius and
// axis for z <= oz. The lateral centre offset must stay inside the radius or
// the camera would sit outside the shell.
struct SensorGeometry {
  double r = 8.0;
  double ox = 0.0;
  double oy = 0.0;
  double oz = 10.0;

  void validate() const {
    if (r <= 0.0) throw PreconditionViolation("SensorGeometry: r must be > 0");
    if (oz <= 0.0)
      throw PreconditionViolation("SensorGeometry: oz must be > 0");
    if (ox * ox + oy * oy >= r * r)
      throw PreconditionViolation(
          "SensorGeometry: lateral centre offset exceeds radius");
  }

  Vec3 centre() const { return Vec3(ox, oy, oz); }
  Vec3 apex() const { return Vec3(ox, oy, oz + r); }
};

enum class SurfaceRegion { Hemisphere, Cylinder };

struct SurfacePoint {
  Vec3 position = Vec3::Zero();
  SurfaceRegion region = SurfaceRegion::Hemisphere;
};

struct Pixel {
  double u = 0.0;
  double v = 0.0;
};

enum class CloudFrame { Sensor, World };

struct ContactPointCloud {
  std::vector<Vec3> points;
  CloudFrame frame = CloudFrame::Sensor;
  int dropped = 0;  // contour pixels whose rays missed the surface
};

// Viewing ray through pixel (u, v): direction ((u-cx)/fx, (v-cy)/fy, 1),
// normalized. Pixels outside the image rectangle are rejected.
inline UnitVector3 pixel_to_ray(double u, double v, const CameraIntrinsics& k) {
  k.validate();
  if (u < 0.0 || v < 0.0 || u >= k.width || v >= k.height)
    throw OutOfBounds("pixel_to_ray: pixel outside image bounds");
  return UnitVector3(Vec3((u - k.cx) / k.fx, (v - k.cy) / k.fy, 1.0));
}

// Signed residual of the surface equation for the branch that owns p's z:
// zero iff p lies on the shell. Positive outside.
inline double surface_residual(const Vec3& p, const SensorGeometry& g) {
  if (p.z() > g.oz) return (p - g.centre()).norm() - g.r;
  return std::hypot(p.x() - g.ox, p.y() - g.oy) - g.r;
}

// First intersection of the forward ray k*d (k > 0) with the fingertip
// shell. The hemisphere root is tested first and accepted only when its z
// lies above oz; otherwise the cylinder root is used, accepted when its z
// lies at or below oz. A sub-nanometre band around the seam counts as
// Cylinder so the z == oz tie-break stays stable under rounding.
inline std::optional<SurfacePoint> try_ray_surface_intersect(
    const UnitVector3& ray, const SensorGeometry& g) {
  constexpr double kSeamEps = 1e-9;
  g.validate();
  const Vec3& d = ray.vec();
  if (d.z() <= 0.0)
    throw PreconditionViolation(
        "ray_surface_intersect: ray must point forward (z > 0)");

  // sphere: |k d - o|^2 = r^2
  Vec3 o = g.centre();
  double b = d.dot(o);
  double disc = b * b - (o.squaredNorm() - g.r * g.r);
  if (disc >= 0.0) {
    double root = std::sqrt(disc);
    for (double k : {b - root, b + root}) {
      if (k > 0.0 && k * d.z() > g.oz + kSeamEps)
        return SurfacePoint{k * d, SurfaceRegion::Hemisphere};
    }
  }

  // cylinder: (k dx - ox)^2 + (k dy - oy)^2 = r^2
  double a = d.x() * d.x() + d.y() * d.y();
  if (a > 1e-300) {
    double bc = d.x() * g.ox + d.y() * g.oy;
    double disc_c = bc * bc - a * (g.ox * g.ox + g.oy * g.oy - g.r * g.r);
    if (disc_c >= 0.0) {
      double root = std::sqrt(disc_c);
      for (double k : {(bc + root) / a, (bc - root) / a}) {
        if (k > 0.0 && k * d.z() <= g.oz + kSeamEps)
          return SurfacePoint{k * d, SurfaceRegion::Cylinder};
      }
    }
  }
  return std::nullopt;
}

inline SurfacePoint ray_surface_intersect(const UnitVector3& ray,
                                          const SensorGeometry& g) {
  auto hit = try_ray_surface_intersect(ray, g);
  if (!hit) throw NoIntersection("ray does not meet the fingertip surface");
  return *hit;
}

// Forward projection onto the image plane; the inverse of pixel_to_ray
// composed with the surface intersection.
inline Pixel project_point(const Vec3& p, const CameraIntrinsics& k) {
  k.validate();
  if (p.z() <= 0.0)
    throw BehindCamera("project_point: point at or behind the camera plane");
  return Pixel{k.fx * p.x() / p.z() + k.cx, k.fy * p.y() / p.z() + k.cy};
}

// Lift a pixel contour onto the fingertip surface. Pixels whose rays miss
// the shell are counted in `dropped` rather than aborting the whole contour;
// an entirely missing contour is an error.
inline ContactPointCloud backproject_contour(std::span<const Pixel> contour,
                                             const CameraIntrinsics& k,
                                             const SensorGeometry& g) {
  if (contour.empty())
    throw PreconditionViolation("backproject_contour: empty contour");
  ContactPointCloud cloud;
  cloud.frame = CloudFrame::Sensor;
  cloud.points.reserve(contour.size());
  for (const Pixel& px : contour) {
    auto hit = try_ray_surface_intersect(pixel_to_ray(px.u, px.v, k), g);
    if (hit)
      cloud.points.push_back(hit->position);
    else
      ++cloud.dropped;
  }
  if (cloud.points.empty())
    throw EmptyResult("backproject_contour: no contour ray hits the surface");
  return cloud;
}

}  // namespace rotip
