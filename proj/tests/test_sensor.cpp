#include <catch2/catch_amalgamated.hpp>
#include <cmath>

#include "rotip/rng.hpp"
#include "rotip/sensor.hpp"

using namespace rotip;

TEST_CASE("pixel_to_ray maps the principal point to the optical axis") {
  CameraIntrinsics k;
  UnitVector3 r = pixel_to_ray(k.cx, k.cy, k);
  CHECK((r.vec() - Vec3(0, 0, 1)).norm() < 1e-12);
}

TEST_CASE("pixel_to_ray normalizes the offset direction") {
  // one focal length to the right of the principal point: direction (1, 0, 1)
  CameraIntrinsics k;
  k.width = 1000;  // keep u = cx + fx inside the image
  UnitVector3 r = pixel_to_ray(820.0, 240.0, k);
  CHECK((r.vec() - Vec3(1, 0, 1).normalized()).norm() < 1e-12);
}

TEST_CASE("pixel_to_ray rejects out-of-image pixels and bad intrinsics") {
  CameraIntrinsics k;
  CHECK_THROWS_AS(pixel_to_ray(-1.0, 10.0, k), OutOfBounds);
  CHECK_THROWS_AS(pixel_to_ray(10.0, -0.5, k), OutOfBounds);
  CHECK_THROWS_AS(pixel_to_ray(640.0, 0.0, k), OutOfBounds);
  CHECK_THROWS_AS(pixel_to_ray(0.0, 480.0, k), OutOfBounds);

  CameraIntrinsics bad;
  bad.fx = 0.0;
  CHECK_THROWS_AS(pixel_to_ray(1.0, 1.0, bad), PreconditionViolation);
}

TEST_CASE("axial ray meets the hemisphere apex") {
  SensorGeometry g;  // r = 8, centre (0, 0, 10)
  SurfacePoint p = ray_surface_intersect(UnitVector3(Vec3(0, 0, 1)), g);
  CHECK(p.region == SurfaceRegion::Hemisphere);
  CHECK((p.position - Vec3(0, 0, 18)).norm() < 1e-12);
}

TEST_CASE("45 degree ray lands on the cylinder wall") {
  SensorGeometry g;
  SurfacePoint p = ray_surface_intersect(UnitVector3(Vec3(1, 0, 1)), g);
  CHECK(p.region == SurfaceRegion::Cylinder);
  CHECK((p.position - Vec3(8, 0, 8)).norm() < 1e-9);
}

TEST_CASE("seam grazing resolves to the cylinder region") {
  SensorGeometry g;
  g.oz = 6.0;  // seam point (8, 0, 6) lies on both branches
  SurfacePoint p = ray_surface_intersect(UnitVector3(Vec3(8, 0, 6)), g);
  CHECK(p.region == SurfaceRegion::Cylinder);
  CHECK((p.position - Vec3(8, 0, 6)).norm() < 1e-9);
}

TEST_CASE("rays without forward component are rejected") {
  SensorGeometry g;
  CHECK_THROWS_AS(try_ray_surface_intersect(UnitVector3(Vec3(0, 0, -1)), g),
                  PreconditionViolation);
  CHECK_THROWS_AS(try_ray_surface_intersect(UnitVector3(Vec3(1, 0, 0)), g),
                  PreconditionViolation);
}

TEST_CASE("geometry validation rejects lateral offsets beyond the radius") {
  SensorGeometry g;
  g.ox = 6.0;
  g.oy = 6.0;  // 6^2 + 6^2 > 8^2
  CHECK_THROWS_AS(g.validate(), PreconditionViolation);
  SensorGeometry g2;
  g2.r = -1.0;
  CHECK_THROWS_AS(g2.validate(), PreconditionViolation);
}

TEST_CASE("project/intersect round trip over random pixels") {
  CameraIntrinsics k;
  SensorGeometry centered;
  SensorGeometry offset;
  offset.ox = 1.0;
  offset.oy = -0.5;
  offset.oz = 9.5;

  Rng rng(606);
  for (const SensorGeometry& g : {centered, offset}) {
    for (int i = 0; i < 500; ++i) {
      double u = rng.uniform(0.0, k.width - 1e-6);
      double v = rng.uniform(0.0, k.height - 1e-6);
      SurfacePoint p = ray_surface_intersect(pixel_to_ray(u, v, k), g);

      // on the shell, on the branch the tag claims
      CHECK(std::abs(surface_residual(p.position, g)) < 1e-9);
      if (p.region == SurfaceRegion::Hemisphere)
        CHECK(p.position.z() > g.oz);
      else
        CHECK(p.position.z() <= g.oz + 1e-9);

      Pixel back = project_point(p.position, k);
      CHECK(std::abs(back.u - u) < 1e-9);
      CHECK(std::abs(back.v - v) < 1e-9);
    }
  }
}

TEST_CASE("intersection z is non-increasing with polar angle") {
  CameraIntrinsics k;
  SensorGeometry g;
  double prev = std::numeric_limits<double>::infinity();
  for (double u = k.cx; u < k.width; u += 1.0) {
    SurfacePoint p = ray_surface_intersect(pixel_to_ray(u, k.cy, k), g);
    CHECK(p.position.z() <= prev + 1e-12);
    prev = p.position.z();
  }
}

TEST_CASE("project_point rejects points behind the camera") {
  CameraIntrinsics k;
  CHECK_THROWS_AS(project_point(Vec3(1, 1, 0), k), BehindCamera);
  CHECK_THROWS_AS(project_point(Vec3(1, 1, -2), k), BehindCamera);
}

TEST_CASE("backproject_contour lifts pixels onto the shell") {
  CameraIntrinsics k;
  SensorGeometry g;
  std::vector<Pixel> contour;
  for (int i = 0; i < 64; ++i) {
    double a = 2.0 * M_PI * i / 64;
    contour.push_back(Pixel{k.cx + 40.0 * std::cos(a), k.cy + 40.0 * std::sin(a)});
  }
  ContactPointCloud cloud = backproject_contour(contour, k, g);
  CHECK(cloud.frame == CloudFrame::Sensor);
  CHECK(cloud.points.size() == contour.size());
  CHECK(cloud.dropped == 0);
  for (const Vec3& p : cloud.points)
    CHECK(std::abs(surface_residual(p, g)) < 1e-9);

  CHECK_THROWS_AS(backproject_contour(std::span<const Pixel>(), k, g),
                  PreconditionViolation);
}
