#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <numbers>
#include <utility>
#include <vector>

#include "rotip/contact_oracle.hpp"
#include "rotip/errors.hpp"
#include "rotip/experiments.hpp"
#include "rotip/plane_fit.hpp"
#include "rotip/rng.hpp"
#include "rotip/sensor.hpp"
#include "rotip/transform.hpp"

namespace rotip {

// One tactile image taken while pressing a plate tilted by angle_deg about
// the sensor-frame y axis. The sensor pose is the identity, so the plate
// normal in the sensor frame is rot_y(angle) * (0, 0, -1).
struct TiltedMask {
  double angle_deg = 0.0;
  ContactMask mask;
};

// Input of the offset calibration: flat presses centred on the fingertip
// plus presses at +-45 deg. true_geometry travels with the set for test
// evaluation only; the solvers never read it.
struct CalibrationSet {
  std::vector<ContactMask> vertical_masks;
  std::vector<TiltedMask> tilted_masks;
  SensorGeometry true_geometry;

  void validate() const {
    if (vertical_masks.empty())
      throw PreconditionViolation("CalibrationSet: no vertical masks");
    bool plus = false;
    bool minus = false;
    for (const TiltedMask& t : tilted_masks) {
      if (std::abs(std::abs(t.angle_deg) - 45.0) > 1e-9)
        throw PreconditionViolation(
            "CalibrationSet: tilted angles must be +-45 deg");
      (t.angle_deg > 0.0 ? plus : minus) = true;
    }
    if (!plus || !minus)
      throw PreconditionViolation(
          "CalibrationSet: need masks at both +45 and -45 deg");
  }
};

// Settings of the synthetic calibration session. Successive presses go a
// little deeper so repeated masks are not byte-identical copies; with a
// nonzero flip rate each mask also gets an independent corruption draw.
struct CalibrationDataParams {
  int vertical_count = 4;
  int per_angle_count = 4;
  double press_mm = 0.7;
  double depth_step_mm = 0.08;
  int depth_cycle = 4;  // press depths repeat after this many copies
  double indentation_mm = 0.5;
  MaskNoiseParams mask_noise{};  // flip_rate 0 keeps the oracle masks exact

  void validate() const {
    if (vertical_count < 1 || per_angle_count < 1)
      throw PreconditionViolation(
          "CalibrationDataParams: counts must be >= 1");
    if (indentation_mm <= 0.0 || press_mm <= indentation_mm)
      throw PreconditionViolation(
          "CalibrationDataParams: need press > indentation > 0");
    if (depth_step_mm < 0.0 || depth_cycle < 1)
      throw PreconditionViolation(
          "CalibrationDataParams: bad depth schedule");
    mask_noise.validate();
  }
};

inline CalibrationSet make_calibration_set(const CameraIntrinsics& k,
                                           const SensorGeometry& g_true,
                                           std::uint64_t seed,
                                           const CalibrationDataParams& dp = {}) {
  dp.validate();
  k.validate();
  g_true.validate();
  SurfaceTable table(k, g_true, 1);
  CalibrationSet set;
  set.true_geometry = g_true;
  std::uint64_t index = 0;
  // one render per distinct (angle, press depth); corruption is per copy
  std::map<std::pair<double, int>, ContactMask> base;
  auto snap = [&](double angle_deg, int copy) {
    int depth_index = copy % dp.depth_cycle;
    auto key = std::make_pair(angle_deg, depth_index);
    auto it = base.find(key);
    if (it == base.end()) {
      SweepParams sp;
      sp.press_mm = dp.press_mm + dp.depth_step_mm * depth_index;
      sp.indentation_mm = dp.indentation_mm;
      it = base.emplace(key, render_contact_mask(
                                 sweep_scene(g_true, angle_deg, sp), table))
               .first;
    }
    ContactMask m = it->second;
    if (dp.mask_noise.flip_rate > 0.0)
      m = corrupt_mask(m, dp.mask_noise,
                       stream_seed(seed, 0x63736574ull + index));
    ++index;
    return m;
  };
  for (int i = 0; i < dp.vertical_count; ++i)
    set.vertical_masks.push_back(snap(0.0, i));
  for (double angle : {45.0, -45.0})
    for (int i = 0; i < dp.per_angle_count; ++i)
      set.tilted_masks.push_back({angle, snap(angle, i)});
  return set;
}

// Derivative-free search settings shared by both stages: a box of
// half_span_mm around the nominal value, closed to tol_mm, with a hard
// objective-evaluation budget.
struct GoldenParams {
  double half_span_mm = 3.0;
  double tol_mm = 0.01;
  int max_evals = 400;

  void validate() const {
    if (half_span_mm <= 0.0 || tol_mm <= 0.0 || tol_mm >= half_span_mm)
      throw PreconditionViolation("GoldenParams: need 0 < tol < half_span");
    if (max_evals < 1)
      throw PreconditionViolation("GoldenParams: max_evals must be >= 1");
  }
};

namespace detail {

// Boundary pixels that do not touch the image frame. A border pixel is
// flagged as boundary only because its outward neighbour is unobserved, so
// it carries no information about the physical contour; with a low-mounted
// shell a 45 deg press can run off the frame and such pixels would drag the
// fitted plane by degrees. Speckled masks can carry thousands of boundary
// pixels, so the list is thinned to a uniform subsample; raster order makes
// every-kth spatially even, and the thinning is deterministic.
inline std::vector<Pixel> interior_boundary_pixels(const ContactMask& m,
                                                   std::size_t max_px = 600) {
  std::vector<Pixel> all;
  for (const Eigen::Vector2i& p : mask_boundary(m)) {
    if (p.x() == 0 || p.y() == 0 || p.x() == m.width - 1 ||
        p.y() == m.height - 1)
      continue;
    all.push_back(Pixel{static_cast<double>(p.x()), static_cast<double>(p.y())});
  }
  if (all.size() <= max_px) return all;
  std::vector<Pixel> out;
  out.reserve(max_px);
  std::size_t stride = (all.size() + max_px - 1) / max_px;
  for (std::size_t i = 0; i < all.size(); i += stride) out.push_back(all[i]);
  return out;
}

struct GoldenResult {
  double x = 0.0;
  int evals = 0;
};

// Golden-section minimization on [lo, hi]. The objective goes through a
// seeded RANSAC fit, so it is deterministic but not smooth; bracketing is
// the reliable tool here. Throws NoConvergence when the evaluation budget
// runs out before the bracket closes.
template <class F>
GoldenResult golden_section_min(F&& f, double lo, double hi, double tol,
                                int max_evals) {
  const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double a = lo;
  double b = hi;
  int evals = 0;
  auto eval = [&](double x) {
    if (evals >= max_evals)
      throw NoConvergence("golden_section_min: evaluation budget exhausted");
    ++evals;
    return f(x);
  };
  double c = b - inv_phi * (b - a);
  double d = a + inv_phi * (b - a);
  double fc = eval(c);
  double fd = eval(d);
  while (b - a > tol) {
    if (fc < fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - inv_phi * (b - a);
      fc = eval(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + inv_phi * (b - a);
      fd = eval(d);
    }
  }
  return {0.5 * (a + b), evals};
}

}  // namespace detail

struct XyCalibration {
  double ox = 0.0;
  double oy = 0.0;
  double residual_mm = 0.0;  // mean centroid-to-apex lateral distance
  int evaluations = 0;
  int sweeps = 0;
};

// Stage 1: recover (o_x, o_y) from the flat presses. A flat press touches
// the shell at its apex, so the contour must be centred on the apex axis.
// The centroid is taken over contour pixels, where segmentation noise is
// symmetric about the true contour, and compared with the projection of the
// candidate apex axis at the contour's depth; depth comes from
// back-projecting the contour onto the candidate shell. Averaging the
// back-projected points directly instead would weight the far, more
// obliquely viewed side of the ring more and drag the centroid outward from
// the camera axis by a systematic fraction of the offset. Residuals are
// reported in millimetres at the contour depth. Coordinate descent with a
// golden-section line search per axis does the minimizing.
inline XyCalibration calibrate_xy(const CalibrationSet& set,
                                  const CameraIntrinsics& k,
                                  const SensorGeometry& g0,
                                  const GoldenParams& gp = {}) {
  gp.validate();
  k.validate();
  g0.validate();
  if (set.vertical_masks.empty())
    throw PreconditionViolation("calibrate_xy: vertical masks required");
  std::vector<std::vector<Pixel>> contours;
  std::vector<Pixel> pixel_centroids;
  for (const ContactMask& m : set.vertical_masks) {
    // centroid averaging across masks converges fast in pixel count, so the
    // flat presses get by with a thinner subsample than the tilted ones
    std::vector<Pixel> c = detail::interior_boundary_pixels(m, 400);
    if (c.empty())
      throw EmptyMask("calibrate_xy: vertical mask has no usable boundary");
    Pixel cen{0.0, 0.0};
    for (const Pixel& p : c) {
      cen.u += p.u;
      cen.v += p.v;
    }
    cen.u /= static_cast<double>(c.size());
    cen.v /= static_cast<double>(c.size());
    pixel_centroids.push_back(cen);
    contours.push_back(std::move(c));
  }
  int evals = 0;
  // contour depths barely move with the candidate (a lateral shell shift
  // changes the dome height under fixed rays by a tenth of the shift), so
  // they are refreshed once per descent sweep instead of per evaluation
  std::vector<double> depths(contours.size(), 0.0);
  auto refresh_depths = [&](double x, double y) {
    SensorGeometry g = g0;
    g.ox = x;
    g.oy = y;
    for (std::size_t i = 0; i < contours.size(); ++i) {
      ContactPointCloud cloud = backproject_contour(contours[i], k, g);
      double depth = 0.0;
      for (const Vec3& p : cloud.points) depth += p.z();
      depths[i] = depth / static_cast<double>(cloud.points.size());
    }
  };
  auto objective = [&](double x, double y) {
    double sum = 0.0;
    for (std::size_t i = 0; i < contours.size(); ++i) {
      Pixel axis = project_point(Vec3(x, y, depths[i]), k);
      double du = (pixel_centroids[i].u - axis.u) * depths[i] / k.fx;
      double dv = (pixel_centroids[i].v - axis.v) * depths[i] / k.fy;
      sum += std::hypot(du, dv);
    }
    ++evals;
    return sum / static_cast<double>(contours.size());
  };
  double x = g0.ox;
  double y = g0.oy;
  // the two axes decouple almost exactly, so the descent settles in two or
  // three alternating sweeps; a stuck descent exhausts the budget instead
  for (int sweep = 1; sweep <= 8; ++sweep) {
    refresh_depths(x, y);
    detail::GoldenResult rx = detail::golden_section_min(
        [&](double v) { return objective(v, y); }, g0.ox - gp.half_span_mm,
        g0.ox + gp.half_span_mm, gp.tol_mm, gp.max_evals - evals);
    detail::GoldenResult ry = detail::golden_section_min(
        [&](double v) { return objective(rx.x, v); }, g0.oy - gp.half_span_mm,
        g0.oy + gp.half_span_mm, gp.tol_mm, gp.max_evals - evals);
    double step = std::max(std::abs(rx.x - x), std::abs(ry.x - y));
    x = rx.x;
    y = ry.x;
    if (step < gp.tol_mm) return {x, y, objective(x, y), evals, sweep};
  }
  throw NoConvergence("calibrate_xy: coordinate descent did not stabilize");
}

struct ZCalibration {
  double oz = 0.0;
  double residual_deg = 0.0;  // mean fitted-vs-true plane angle at the optimum
  int evaluations = 0;
};

struct ZObjectiveParams {
  int ransac_iters = 48;
  double ransac_tol_mm = 0.08;
  int grid_points = 13;       // ambiguity pre-scan resolution over the box
  double flat_tol_deg = 0.5;  // variation below this over the box means flat
  double flat_span_mm = 0.5;  // flatness only counts on a box wider than this

  void validate() const {
    if (ransac_iters < 1 || ransac_tol_mm <= 0.0)
      throw PreconditionViolation("ZObjectiveParams: bad ransac settings");
    if (grid_points < 3 || flat_tol_deg <= 0.0 || flat_span_mm <= 0.0)
      throw PreconditionViolation("ZObjectiveParams: bad ambiguity scan");
  }
};

// Stage 2: recover o_z from the +-45 deg presses. Each candidate o_z
// re-projects the recorded contours onto the shifted shell and refits a
// plane with a per-mask fixed RANSAC seed; the objective is the mean angle
// between the fitted and the known plate normals. A coarse pre-scan rejects
// data that leaves the objective flat (AmbiguousMinimum) before the
// golden-section search closes the bracket.
inline ZCalibration calibrate_z(const CalibrationSet& set,
                                const CameraIntrinsics& k,
                                const SensorGeometry& g_xy,
                                const GoldenParams& gp = {},
                                const ZObjectiveParams& zp = {}) {
  gp.validate();
  zp.validate();
  k.validate();
  g_xy.validate();
  bool plus = false;
  bool minus = false;
  for (const TiltedMask& t : set.tilted_masks) {
    plus |= t.angle_deg > 0.0;
    minus |= t.angle_deg < 0.0;
  }
  if (!plus || !minus)
    throw PreconditionViolation(
        "calibrate_z: need tilted masks at both +45 and -45 deg");

  struct Item {
    std::vector<Pixel> contour;
    UnitVector3 normal;
    std::uint64_t seed;
  };
  std::vector<Item> items;
  std::uint64_t index = 0;
  for (const TiltedMask& t : set.tilted_masks) {
    std::vector<Pixel> c = detail::interior_boundary_pixels(t.mask);
    if (c.empty())
      throw EmptyMask("calibrate_z: tilted mask has no usable boundary");
    Mat3 rot = rot_y(t.angle_deg * std::numbers::pi / 180.0).rotation();
    items.push_back({std::move(c), UnitVector3(rot * Vec3(0, 0, -1)),
                     stream_seed(index, 0x63616c7aull)});
    ++index;
  }
  int evals = 0;
  auto objective = [&](double z) {
    SensorGeometry g = g_xy;
    g.oz = z;
    double sum = 0.0;
    for (const Item& it : items) {
      ContactPointCloud cloud = backproject_contour(it.contour, k, g);
      PlaneEstimate est = ransac_plane(cloud, zp.ransac_iters,
                                       zp.ransac_tol_mm, it.seed, Vec3::Zero());
      sum += angle_error_deg(est.normal, it.normal);
    }
    ++evals;
    return sum / static_cast<double>(items.size());
  };

  // A press rig that cannot pin o_z (say the tilted plates were not in fact
  // tilted) leaves the error curve level across the whole box, while any
  // informative session swings by degrees; a shallow noisy bottom around a
  // genuine minimum must not trip the guard, so the test is total variation
  // over the scanned box, not the width of a near-minimum band.
  double lo = g_xy.oz - gp.half_span_mm;
  double hi = g_xy.oz + gp.half_span_mm;
  double fmin = std::numeric_limits<double>::infinity();
  double fmax = -std::numeric_limits<double>::infinity();
  for (int i = 0; i < zp.grid_points; ++i) {
    double f = objective(lo + (hi - lo) * i / (zp.grid_points - 1));
    fmin = std::min(fmin, f);
    fmax = std::max(fmax, f);
  }
  if (hi - lo > zp.flat_span_mm && fmax - fmin <= zp.flat_tol_deg)
    throw AmbiguousMinimum(
        "calibrate_z: objective flat across the search box");

  detail::GoldenResult r = detail::golden_section_min(
      objective, lo, hi, gp.tol_mm, gp.max_evals);
  return {r.x, objective(r.x), evals};
}

struct CalibrationResult {
  SensorGeometry calibrated;  // nominal radius with the recovered offsets
  double xy_residual_mm = 0.0;
  double z_residual_deg = 0.0;
  int xy_evaluations = 0;
  int z_evaluations = 0;
  int rounds = 0;
};

// Full offset recovery, stage 1 then stage 2. A flat press only fixes the
// bearing of the apex as seen by the camera, so a residual o_z error leaks
// back into (o_x, o_y) at roughly |d_oz| * o_x / z. Alternating the two
// stages contracts that leak by the same factor per round; the loop stops
// once neither stage moves by more than stop_tol_mm, which sits above the
// bracket tolerance because with noisy masks the stage minima wander at the
// noise floor and would never settle to the bracket width. Search boxes
// stay anchored at the nominal geometry, which encodes the prior that the
// true offsets lie within the box of the design values. The ambiguity
// pre-scan is a property of the data, so later rounds run it at minimal
// resolution.
inline CalibrationResult calibrate_offsets(const CalibrationSet& set,
                                           const CameraIntrinsics& k,
                                           const SensorGeometry& g0,
                                           const GoldenParams& gp = {},
                                           const ZObjectiveParams& zp = {},
                                           int max_rounds = 6,
                                           double stop_tol_mm = 0.05) {
  if (max_rounds < 1 || stop_tol_mm < 0.0)
    throw PreconditionViolation("calibrate_offsets: bad round settings");
  gp.validate();
  set.validate();
  CalibrationResult res;
  res.calibrated = g0;
  SensorGeometry g = g0;
  double stop = std::max(stop_tol_mm, gp.tol_mm);
  ZObjectiveParams zp_later = zp;
  zp_later.grid_points = 3;
  double last_step = std::numeric_limits<double>::infinity();
  for (int round = 1; round <= max_rounds; ++round) {
    XyCalibration xy = calibrate_xy(
        set, k, SensorGeometry{g0.r, g0.ox, g0.oy, g.oz}, gp);
    double dx = std::abs(xy.ox - g.ox);
    double dy = std::abs(xy.oy - g.oy);
    g.ox = xy.ox;
    g.oy = xy.oy;
    ZCalibration z = calibrate_z(set, k,
                                 SensorGeometry{g0.r, g.ox, g.oy, g0.oz}, gp,
                                 round == 1 ? zp : zp_later);
    double dz = std::abs(z.oz - g.oz);
    g.oz = z.oz;
    res.xy_residual_mm = xy.residual_mm;
    res.z_residual_deg = z.residual_deg;
    res.xy_evaluations += xy.evaluations;
    res.z_evaluations += z.evaluations;
    res.rounds = round;
    last_step = std::max({dx, dy, dz});
    if (last_step < stop) {
      res.calibrated = g;
      return res;
    }
  }
  // With speckled masks the two stage minima can ping-pong between nearby
  // consensus dips and never close below stop_tol; a small residual cycle
  // is the noise floor, not a failure, so only a coarse oscillation aborts.
  if (last_step < 10.0 * stop) {
    res.calibrated = g;
    return res;
  }
  throw NoConvergence(
      "calibrate_offsets: stages kept moving after the round budget");
}

}  // namespace rotip
