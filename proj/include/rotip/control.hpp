#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <optional>
#include <utility>

#include "rotip/errors.hpp"
#include "rotip/transform.hpp"

namespace rotip {

// Two-finger contact initialisation state machine.
//
// Phase graph:
//   Approach <-> PreContact        (switch on the translational-error norm)
//   Approach|PreContact -> AdjustPose   (one finger in contact; target refined,
//                                        the plant repositions at the refined
//                                        pre-contact pose)
//   AdjustPose -> Approach|PreContact   (via the next N == 0 tick)
//   Approach|PreContact -> Feeding      (both fingers in contact)
//   Approach|PreContact -> Failed       (adjustment budget exhausted)
//   Feeding -> Grasp -> Done            (owned by the feeding simulation)
// Done and Failed are terminal; control_step never leaves them.
enum class Phase {
  Approach,
  PreContact,
  AdjustPose,
  Feeding,
  Grasp,
  Done,
  Failed
};

inline const char* phase_name(Phase p) {
  switch (p) {
    case Phase::Approach: return "Approach";
    case Phase::PreContact: return "PreContact";
    case Phase::AdjustPose: return "AdjustPose";
    case Phase::Feeding: return "Feeding";
    case Phase::Grasp: return "Grasp";
    case Phase::Done: return "Done";
    case Phase::Failed: return "Failed";
  }
  return "?";
}

struct ControlGains {
  Vec6 kp = Vec6::Ones();
  Vec6 kd = Vec6::Constant(0.1);
  double epsilon = 0.02;   // threshold on the translational error norm (mm)
  Vec6 v_ff = (Vec6() << 0, 0, -0.4, 0, 0, 0).finished();  // per tick
  double max_twist = 2.0;  // norm bound on emitted twists

  void validate() const {
    if ((kp.array() <= 0.0).any() || (kd.array() < 0.0).any())
      throw PreconditionViolation("ControlGains: gains must be positive");
    if (epsilon <= 0.0 || max_twist <= 0.0)
      throw PreconditionViolation("ControlGains: epsilon, max_twist > 0");
  }
};

struct ControllerParams {
  int pixel_threshold = 2000;      // contact classifier threshold (pixels)
  int max_adjust_rounds = 5;       // N == 1 refinements before Failed
  int stall_window = 30;           // ticks per progress check
  double stall_min_progress = 0.05;  // mm of motion required per window
  double precontact_offset = 20.0;   // plant hover distance above target (mm)

  void validate() const {
    if (pixel_threshold <= 0 || max_adjust_rounds < 1 || stall_window < 2 ||
        stall_min_progress <= 0.0 || precontact_offset <= 0.0)
      throw PreconditionViolation("ControllerParams: out-of-range value");
  }
};

enum class Gripper { Hold, Close };

struct Command {
  Vec6 twist = Vec6::Zero();
  Gripper gripper = Gripper::Hold;
};

// What the plant reports each tick: the end-effector pose, the contact-area
// pixel count under each finger, the tactile plane-normal estimate in the
// end-effector frame when one is fresh, and the tick duration.
struct Observation {
  RigidTransform pose;
  int contact_pixels[2] = {0, 0};
  std::optional<UnitVector3> est_normal_body;
  double dt = 1.0 / 30.0;
};

struct ControllerState {
  Phase phase = Phase::Approach;
  RigidTransform target;
  int contact_count = 0;
  PoseError last_error;
  bool have_last_error = false;
  // set once the approach first reaches the target; from then on the
  // feedforward press owns the descent until contact, adjustment or stall,
  // so pressing past the target cannot re-trigger the approach
  bool press_latched = false;
  int adjust_rounds = 0;
  // stall bookkeeping
  int window_ticks = 0;
  double window_progress = 0.0;
  Vec3 last_position = Vec3::Zero();
  bool has_last_position = false;
};

inline ControllerState make_controller(const RigidTransform& target) {
  ControllerState st;
  st.target = target;
  return st;
}

inline bool contact_classifier(int mask_pixels, int threshold) {
  if (threshold <= 0)
    throw PreconditionViolation("contact_classifier: threshold must be > 0");
  return mask_pixels >= threshold;
}

inline std::pair<ControllerState, Command> control_step(
    const ControllerState& state, const ControlGains& gains,
    const ControllerParams& params, const Observation& obs) {
  gains.validate();
  params.validate();
  ControllerState st = state;
  Command cmd;

  if (st.phase == Phase::Feeding || st.phase == Phase::Grasp ||
      st.phase == Phase::Done || st.phase == Phase::Failed)
    return {st, cmd};

  int n = (contact_classifier(obs.contact_pixels[0], params.pixel_threshold)
               ? 1
               : 0) +
          (contact_classifier(obs.contact_pixels[1], params.pixel_threshold)
               ? 1
               : 0);

  if (n == 2) {
    st.phase = Phase::Feeding;
    st.contact_count = 2;
    return {st, cmd};
  }

  if (n == 1) {
    st.contact_count = 1;
    if (st.adjust_rounds >= params.max_adjust_rounds) {
      st.phase = Phase::Failed;
      return {st, cmd};
    }
    ++st.adjust_rounds;
    if (obs.est_normal_body) {
      Mat3 r = rodrigues_align(UnitVector3(Vec3(0, 0, 1)), *obs.est_normal_body);
      st.target = st.target * RigidTransform(r, Vec3::Zero());
    }
    st.phase = Phase::AdjustPose;
    // the plant repositions; restart the press latch, the derivative and
    // the stall window for the renewed approach
    st.press_latched = false;
    st.have_last_error = false;
    st.has_last_position = false;
    st.window_ticks = 0;
    st.window_progress = 0.0;
    return {st, cmd};
  }

  // n == 0: exactly one of the PD / feedforward branches fires
  st.contact_count = 0;
  PoseError e = pose_error(obs.pose, st.target);
  if (!st.press_latched && e.translational().norm() > gains.epsilon) {
    st.phase = Phase::Approach;
    Vec6 edot = Vec6::Zero();
    if (st.have_last_error) edot = e.twist - st.last_error.twist;  // per tick
    cmd.twist = gains.kp.cwiseProduct(e.twist) + gains.kd.cwiseProduct(edot);
    double norm = cmd.twist.norm();
    if (norm > gains.max_twist) cmd.twist *= gains.max_twist / norm;
  } else {
    st.press_latched = true;
    st.phase = Phase::PreContact;
    cmd.twist = gains.v_ff;
  }
  st.last_error = e;
  st.have_last_error = true;

  if (st.has_last_position) {
    st.window_progress += (obs.pose.translation() - st.last_position).norm();
    ++st.window_ticks;
  }
  st.last_position = obs.pose.translation();
  st.has_last_position = true;
  if (st.window_ticks >= params.stall_window) {
    if (st.window_progress < params.stall_min_progress)
      throw StallDetected("control_step: no approach progress over the window");
    st.window_ticks = 0;
    st.window_progress = 0.0;
  }
  return {st, cmd};
}

// Per-sheet pose correction of the feeding fingers: as n sheets of thickness
// h accumulate between the fingers (spacing l), the upper finger rolls onto
// an incline of angle beta and the contact point shifts by (dx, dz) in the
// local frame.
struct ContinuousAdjustment {
  double beta = 0.0;  // rad
  double dx = 0.0;    // mm
  double dz = 0.0;    // mm
};

inline ContinuousAdjustment continuous_adjust(int n, double h, double l) {
  if (n < 0 || h <= 0.0 || l <= 0.0)
    throw PreconditionViolation("continuous_adjust: n >= 0, h > 0, l > 0");
  double ratio = n * h / l;
  if (ratio >= 1.0)
    throw InfeasibleStack("continuous_adjust: stack height reaches the span");
  ContinuousAdjustment adj;
  adj.beta = std::asin(ratio);
  adj.dx = -0.5 * l * (1.0 - std::cos(adj.beta));
  adj.dz = -0.5 * l * std::sin(adj.beta);
  return adj;
}

inline RigidTransform apply_local_adjustment(const RigidTransform& pose,
                                             const ContinuousAdjustment& adj) {
  return pose * RigidTransform(rot_y(adj.beta).rotation(),
                               Vec3(adj.dx, 0.0, adj.dz));
}

}  // namespace rotip
