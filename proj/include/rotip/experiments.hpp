#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "rotip/contact_oracle.hpp"
#include "rotip/control.hpp"
#include "rotip/errors.hpp"
#include "rotip/plane_fit.hpp"
#include "rotip/rng.hpp"
#include "rotip/scenario.hpp"
#include "rotip/sensor.hpp"
#include "rotip/transform.hpp"

// Bench-level experiment drivers. plane_sweep scores the tactile estimation
// pipeline (render -> corrupt -> boundary -> backproject -> RANSAC) against
// the vision and force baselines across a tilt range; contact_trial plays one
// two-finger touchdown with a chosen guidance method against an analytic
// plate, using the controller FSM for the tactile closed loop.

namespace rotip {

enum class EstimationMethod { Tactile, Vision, Force };

inline const char* estimation_method_name(EstimationMethod m) {
  switch (m) {
    case EstimationMethod::Tactile: return "tactile";
    case EstimationMethod::Vision: return "vision";
    case EstimationMethod::Force: return "force";
  }
  return "?";
}

inline std::optional<EstimationMethod> parse_estimation_method(
    std::string_view s) {
  if (s == "tactile") return EstimationMethod::Tactile;
  if (s == "vision") return EstimationMethod::Vision;
  if (s == "force") return EstimationMethod::Force;
  return std::nullopt;
}

struct SweepParams {
  double press_mm = 0.7;        // apex penetration of the plate
  double indentation_mm = 0.5;  // membership depth of the rendered mask
  int ransac_iters = 64;
  double ransac_tol_mm = 0.08;

  void validate() const {
    if (press_mm <= indentation_mm || indentation_mm <= 0.0)
      throw PreconditionViolation("SweepParams: need press > indentation > 0");
    if (ransac_iters < 1 || ransac_tol_mm <= 0.0)
      throw PreconditionViolation("SweepParams: bad RANSAC settings");
  }
};

struct SweepPoint {
  double tilt_deg = 0.0;
  EstimationMethod method = EstimationMethod::Tactile;
  std::uint64_t seed = 0;
  double angle_error_deg = 0.0;
};

// Plate tilted by tilt_deg about the sensor-frame y axis, pressed so the
// deepest surface point penetrates by press_mm. The normal faces the camera.
inline ContactScene sweep_scene(const SensorGeometry& g, double tilt_deg,
                                const SweepParams& sp = {}) {
  sp.validate();
  g.validate();
  Mat3 rot = rot_y(tilt_deg * std::numbers::pi / 180.0).rotation();
  UnitVector3 n(rot * Vec3(0, 0, -1));
  ContactScene scene;
  scene.plane = Plane3{n, n.vec().dot(g.centre()) - g.r + sp.press_mm};
  scene.indentation = sp.indentation_mm;
  return scene;
}

namespace detail {

inline std::vector<Pixel> boundary_pixels(const ContactMask& m) {
  std::vector<Eigen::Vector2i> b = mask_boundary(m);
  std::vector<Pixel> out;
  out.reserve(b.size());
  for (const Eigen::Vector2i& p : b)
    out.push_back(Pixel{static_cast<double>(p.x()), static_cast<double>(p.y())});
  return out;
}

// Full tactile pipeline on one scene, in the sensor frame.
inline PlaneEstimate tactile_plane_estimate(const ContactScene& scene,
                                            const SurfaceTable& full_table,
                                            const SensorGeometry& g,
                                            const MaskNoiseParams& noise,
                                            std::uint64_t seed, int iters,
                                            double tol) {
  ContactMask mask = render_contact_mask(scene, full_table);
  if (noise.flip_rate > 0.0)
    mask = corrupt_mask(mask, noise, stream_seed(seed, 0x6d61736bull));
  std::vector<Pixel> contour = boundary_pixels(mask);
  if (contour.empty())
    throw EmptyResult("tactile_plane_estimate: empty mask boundary");
  ContactPointCloud cloud =
      backproject_contour(contour, full_table.intrinsics(), g);
  return ransac_plane(cloud, iters, tol, stream_seed(seed, 0x72736163ull),
                      Vec3::Zero());
}

}  // namespace detail

inline std::vector<SweepPoint> plane_sweep(
    const ScenarioConfig& sc, std::span<const double> tilts_deg,
    std::span<const EstimationMethod> methods, std::uint64_t seed,
    const SweepParams& sp = {}) {
  if (tilts_deg.empty() || methods.empty())
    throw PreconditionViolation("plane_sweep: need at least one tilt and method");
  sp.validate();
  sc.validate();
  SurfaceTable full_table(sc.intrinsics, sc.geometry, 1);
  std::vector<SweepPoint> out;
  out.reserve(tilts_deg.size() * methods.size());
  for (std::size_t i = 0; i < tilts_deg.size(); ++i) {
    ContactScene scene = sweep_scene(sc.geometry, tilts_deg[i], sp);
    for (EstimationMethod m : methods) {
      std::uint64_t row_seed = stream_seed(
          stream_seed(seed, 0x73776565ull + static_cast<std::uint64_t>(m)), i);
      UnitVector3 est = [&] {
        switch (m) {
          case EstimationMethod::Vision:
            return vision_plane_baseline(scene.plane, sc.vision_sigma_deg,
                                         row_seed)
                .normal;
          case EstimationMethod::Force:
            return force_plane_baseline(scene.plane, sc.force_sigma_deg,
                                        row_seed)
                .normal;
          case EstimationMethod::Tactile:
          default:
            return detail::tactile_plane_estimate(scene, full_table,
                                                  sc.geometry, sc.mask_noise,
                                                  row_seed, sp.ransac_iters,
                                                  sp.ransac_tol_mm)
                .normal;
        }
      }();
      out.push_back(SweepPoint{tilts_deg[i], m, seed,
                               angle_error_deg(est, scene.plane.n)});
    }
  }
  return out;
}

inline double sweep_mean_error(std::span<const SweepPoint> rows,
                               EstimationMethod m) {
  double sum = 0.0;
  int n = 0;
  for (const SweepPoint& r : rows)
    if (r.method == m) {
      sum += r.angle_error_deg;
      ++n;
    }
  if (n == 0) throw EmptyResult("sweep_mean_error: no rows for method");
  return sum / n;
}

inline double sweep_max_error(std::span<const SweepPoint> rows,
                              EstimationMethod m) {
  double best = -1.0;
  for (const SweepPoint& r : rows)
    if (r.method == m) best = std::max(best, r.angle_error_deg);
  if (best < 0.0) throw EmptyResult("sweep_max_error: no rows for method");
  return best;
}

// ---------------------------------------------------------------------------
// Two-finger contact trials.

enum class ContactMethod { Vision, VisionForceWA, VisionForce,
                           VisionForceTactile };

inline const char* contact_method_name(ContactMethod m) {
  switch (m) {
    case ContactMethod::Vision: return "vision";
    case ContactMethod::VisionForceWA: return "vision_force_wa";
    case ContactMethod::VisionForce: return "vision_force";
    case ContactMethod::VisionForceTactile: return "vision_force_tactile";
  }
  return "?";
}

inline std::optional<ContactMethod> parse_contact_method(std::string_view s) {
  if (s == "vision") return ContactMethod::Vision;
  if (s == "vision_force_wa") return ContactMethod::VisionForceWA;
  if (s == "vision_force") return ContactMethod::VisionForce;
  if (s == "vision_force_tactile") return ContactMethod::VisionForceTactile;
  return std::nullopt;
}

struct TrialParams {
  double tilt_range_deg = 20.0;  // plate tilt magnitude drawn from U(0, range)
  double finger_span_mm = 20.0;  // fingertip axis spacing along body x
  double touch_depth_mm = 1.0;   // commanded press depth; force-stop threshold
  double crash_depth_mm = 3.0;   // emergency-stop penetration
  double start_above_mm = 10.0;  // initial hover above the pre-contact pose
  double membership_mm = 0.05;   // indentation depth for live contact pixels
  double trans_sigma_xy_mm = 1.5;  // vision placement scatter
  double trans_sigma_z_mm = 2.0;
  int count_stride = 8;   // strided table used by the live pixel counter
  int max_ticks = 800;    // closed-loop budget
  int ransac_iters = 64;
  double ransac_tol_mm = 0.08;
  bool blind_init = false;  // flat-table prior instead of the vision estimate

  void validate() const {
    if (tilt_range_deg < 0.0 || tilt_range_deg >= 90.0 ||
        finger_span_mm <= 0.0 || touch_depth_mm <= 0.0 ||
        crash_depth_mm <= touch_depth_mm || start_above_mm <= 0.0 ||
        membership_mm <= 0.0 || trans_sigma_xy_mm < 0.0 ||
        trans_sigma_z_mm < 0.0 || count_stride < 1 || max_ticks < 1 ||
        ransac_iters < 1 || ransac_tol_mm <= 0.0)
      throw PreconditionViolation("TrialParams: out-of-range value");
  }
};

struct ContactTrialResult {
  bool crash = false;
  bool one_finger = false;
  bool two_finger = false;
  int adjust_rounds = 0;  // tactile closed loop only
  int ticks = 0;          // tactile closed loop only
  double tilt_deg = 0.0;  // sampled plate tilt magnitude
};

struct ContactBatch {
  int trials = 0;
  int one_finger = 0;
  int two_finger = 0;
  int crashes = 0;
  long long adjust_rounds = 0;

  double one_rate() const { return trials ? double(one_finger) / trials : 0.0; }
  double two_rate() const { return trials ? double(two_finger) / trials : 0.0; }
};

namespace detail {

// Finger i in {0, 1} hangs at +-span/2 along body x, shell pointing down.
inline RigidTransform finger_offset(int i, double span_mm) {
  double x = (i == 0 ? -0.5 : 0.5) * span_mm;
  return translate(Vec3(x, 0.0, 0.0)) * rot_x(std::numbers::pi);
}

inline double finger_depth(const RigidTransform& ee, int i,
                           const SensorGeometry& g, double span_mm,
                           const Plane3& plate) {
  Vec3 centre = (ee * finger_offset(i, span_mm)).apply(g.centre());
  return g.r - (plate.n.vec().dot(centre) - plate.d);
}

inline int finger_pixels(const RigidTransform& ee, int i,
                         const SensorGeometry& g, double span_mm,
                         const Plane3& plate, double membership,
                         const SurfaceTable& count_table) {
  if (finger_depth(ee, i, g, span_mm, plate) <= membership) return 0;
  ContactScene scene;
  scene.sensor_pose = ee * finger_offset(i, span_mm);
  scene.plane = plate;
  scene.indentation = membership;
  return count_contact_pixels(scene, count_table);
}

}  // namespace detail

// One touchdown trial. The plate passes through the origin with a normal
// tilted from vertical by U(0, tilt_range) about a random horizontal axis.
// Vision hands the trial a perturbed plane estimate and placement scatter;
// the method decides how that estimate is refined and how descent stops.
inline ContactTrialResult contact_trial(const ScenarioConfig& sc,
                                        ContactMethod method,
                                        std::uint64_t seed,
                                        const TrialParams& tp,
                                        const SurfaceTable& full_table,
                                        const SurfaceTable& count_table) {
  tp.validate();
  const SensorGeometry& g = sc.geometry;
  const UnitVector3 up(Vec3(0, 0, 1));

  Rng tilt_rng(stream_seed(seed, 0x74696c74ull));
  double theta = tilt_rng.uniform(0.0, tp.tilt_range_deg) *
                 std::numbers::pi / 180.0;
  double phi = tilt_rng.uniform(0.0, 2.0 * std::numbers::pi);
  Mat3 tilt = detail::so3_exp(Vec3(std::cos(phi), std::sin(phi), 0.0) * theta);
  Plane3 plate{UnitVector3(tilt * Vec3(0, 0, 1)), 0.0};

  ContactTrialResult res;
  res.tilt_deg = theta * 180.0 / std::numbers::pi;

  // vision prior: normal estimate plus translation scatter about the ideal
  // touch position; the blind prior assumes a flat table with no scatter
  UnitVector3 n_vision = plate.n;
  Vec3 scatter = Vec3::Zero();
  if (tp.blind_init) {
    n_vision = up;
  } else if (sc.vision_sigma_deg > 0.0) {
    // placement scatter ships with the vision orientation preset, so a
    // noiseless scenario implies a perfectly placed trial
    n_vision = vision_plane_baseline(plate, sc.vision_sigma_deg, seed).normal;
    Rng tr(stream_seed(seed, 0x7472616eull));
    scatter = Vec3(tr.normal(0.0, tp.trans_sigma_xy_mm),
                   tr.normal(0.0, tp.trans_sigma_xy_mm),
                   tr.normal(0.0, tp.trans_sigma_z_mm));
  }

  double hang = g.oz + g.r;  // fingertip apex depth below the EE origin
  UnitVector3 n_used = n_vision;
  if (method == ContactMethod::VisionForce &&
      !tp.blind_init && sc.force_sigma_deg > 0.0) {
    // inverse-variance fusion of the vision and force plane estimates
    UnitVector3 n_force =
        force_plane_baseline(plate, sc.force_sigma_deg, seed).normal;
    double wv = 1.0 / (sc.vision_sigma_deg * sc.vision_sigma_deg);
    double wf = 1.0 / (sc.force_sigma_deg * sc.force_sigma_deg);
    n_used = UnitVector3(wv * n_vision.vec() + wf * n_force.vec());
  }
  RigidTransform touch(rodrigues_align(up, n_used),
                       (hang - tp.touch_depth_mm) * n_vision.vec() + scatter);

  auto depth = [&](const RigidTransform& ee, int i) {
    return detail::finger_depth(ee, i, g, tp.finger_span_mm, plate);
  };
  auto classified = [&](const RigidTransform& ee, int i) {
    int pix = detail::finger_pixels(ee, i, g, tp.finger_span_mm, plate,
                                    tp.membership_mm, count_table);
    return contact_classifier(pix, sc.controller.pixel_threshold);
  };

  if (method == ContactMethod::Vision) {
    res.crash = std::max(depth(touch, 0), depth(touch, 1)) > tp.crash_depth_mm;
    if (!res.crash) {
      bool c0 = classified(touch, 0);
      bool c1 = classified(touch, 1);
      res.one_finger = c0 || c1;
      res.two_finger = c0 && c1;
    }
    return res;
  }

  if (method == ContactMethod::VisionForceWA ||
      method == ContactMethod::VisionForce) {
    // quasi-static force stop: slide along the body z axis until the deeper
    // finger presses exactly touch_depth into the plate
    Vec3 z_body = touch.rotate(Vec3(0, 0, 1));
    double denom = plate.n.vec().dot(z_body);
    if (denom <= 0.0) return res;  // descent axis misses the plate
    double d_max = std::max(depth(touch, 0), depth(touch, 1));
    double lift = (d_max - tp.touch_depth_mm) / denom;
    RigidTransform stopped(touch.rotation(),
                           touch.translation() + lift * z_body);
    bool c0 = classified(stopped, 0);
    bool c1 = classified(stopped, 1);
    res.one_finger = c0 || c1;
    res.two_finger = c0 && c1;
    return res;
  }

  // tactile closed loop through the controller FSM: the target sits at touch
  // depth, the plant starts hovering precontact_offset above it, and contact
  // interrupts the descent before the target itself is ever reached
  RigidTransform pose = touch * translate(
      Vec3(0, 0, sc.controller.precontact_offset + tp.start_above_mm));
  ControllerState st = make_controller(touch);
  int rounds_seen = 0;
  for (res.ticks = 0; res.ticks < tp.max_ticks; ++res.ticks) {
    if (std::max(depth(pose, 0), depth(pose, 1)) > tp.crash_depth_mm) {
      res.crash = true;
      break;
    }
    Observation obs;
    obs.pose = pose;
    obs.dt = sc.feed.dt;
    bool cl[2];
    for (int i = 0; i < 2; ++i) {
      obs.contact_pixels[i] = detail::finger_pixels(
          pose, i, g, tp.finger_span_mm, plate, tp.membership_mm, count_table);
      cl[i] = contact_classifier(obs.contact_pixels[i],
                                 sc.controller.pixel_threshold);
    }
    if (cl[0] || cl[1]) res.one_finger = true;
    if (cl[0] != cl[1]) {
      int finger = cl[0] ? 0 : 1;
      ContactScene scene;
      scene.sensor_pose = pose * detail::finger_offset(finger,
                                                       tp.finger_span_mm);
      scene.plane = plate;
      scene.indentation = tp.membership_mm;
      std::uint64_t est_seed =
          stream_seed(stream_seed(seed, 0x65737469ull),
                      static_cast<std::uint64_t>(rounds_seen));
      PlaneEstimate est = detail::tactile_plane_estimate(
          scene, full_table, g, sc.mask_noise, est_seed, tp.ransac_iters,
          tp.ransac_tol_mm);
      Vec3 n_world = scene.sensor_pose.rotate(est.normal.vec());
      obs.est_normal_body =
          UnitVector3(pose.rotation().transpose() * n_world);
      ++rounds_seen;
    }
    Command cmd;
    try {
      auto [next, out] = control_step(st, sc.gains, sc.controller, obs);
      st = next;
      cmd = out;
    } catch (const StallDetected&) {
      break;
    }
    if (st.phase == Phase::Feeding) {
      res.one_finger = true;
      res.two_finger = true;
      break;
    }
    if (st.phase == Phase::Failed) break;
    if (st.phase == Phase::AdjustPose) {
      // the plant retracts to a hover above the adjusted target and the FSM
      // re-approaches, so descent still stops at first contact
      pose = st.target *
             translate(Vec3(0, 0, sc.controller.precontact_offset));
      continue;
    }
    pose = pose * se3_exp(cmd.twist);
  }
  res.adjust_rounds = st.adjust_rounds;
  return res;
}

inline ContactBatch contact_trial_batch(const ScenarioConfig& sc,
                                        ContactMethod method, int trials,
                                        std::uint64_t seed,
                                        const TrialParams& tp = {}) {
  if (trials < 1)
    throw PreconditionViolation("contact_trial_batch: trials must be >= 1");
  tp.validate();
  sc.validate();
  SurfaceTable full_table(sc.intrinsics, sc.geometry, 1);
  SurfaceTable count_table(sc.intrinsics, sc.geometry, tp.count_stride);
  ContactBatch batch;
  batch.trials = trials;
  for (int t = 0; t < trials; ++t) {
    ContactTrialResult res = contact_trial(
        sc, method, stream_seed(stream_seed(seed, 0x74726961ull), t), tp,
        full_table, count_table);
    batch.one_finger += res.one_finger;
    batch.two_finger += res.two_finger;
    batch.crashes += res.crash;
    batch.adjust_rounds += res.adjust_rounds;
  }
  return batch;
}

}  // namespace rotip
