#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <span>
#include <vector>

#include "rotip/beam.hpp"
#include "rotip/contact_oracle.hpp"
#include "rotip/control.hpp"
#include "rotip/counting.hpp"
#include "rotip/errors.hpp"
#include "rotip/rng.hpp"
#include "rotip/scenario.hpp"

namespace rotip {

enum class FeedPolicy { WithCA, WithoutCA };

inline const char* policy_name(FeedPolicy p) {
  return p == FeedPolicy::WithCA ? "with_ca" : "without_ca";
}

struct FeedOutcome {
  enum class Kind { AllFed, ContactLost, Grasped };
  Kind kind = Kind::AllFed;
  int at_sheet = 0;  // 1-based sheet where contact was lost
  int grasped = 0;   // filled by the grasp runner
};

struct CaEvent {
  int sheet = 0;  // adjustment applied before feeding this sheet
  ContinuousAdjustment adj;
};

struct FeedLog {
  std::vector<double> sheet_times;  // s, one entry per completed sheet
  std::vector<double> tick_forces;  // N, effective contact force per tick
  std::vector<EdgeTruth> edges;     // ground-truth edge events per sheet
  std::vector<CaEvent> ca_events;
  FeedOutcome outcome;
  int total_sheets = 0;
  int total_ticks = 0;
  double dt = 1.0 / 30.0;

  double total_time() const {
    double t = 0.0;
    for (double s : sheet_times) t += s;
    return t;
  }
};

namespace detail {

// Per-sheet random draws, shared between policies so that WithCA and
// WithoutCA see the same sheet under the same seed.
struct SheetDraws {
  double length_mm;
  double f0;
  bool misfeed;
};

inline SheetDraws sheet_draws(const ScenarioConfig& sc, std::uint64_t seed,
                              int sheet) {
  Rng r(stream_seed(stream_seed(seed, 0x66656564ull), sheet));
  double jitter = r.normal() * sc.feed.length_jitter_rel;
  double f0 = sc.feed.f0 + r.normal() * sc.feed.f0_sigma;
  bool misfeed = r.uniform() < sc.feed.misfeed_rate;
  return {sc.feed.l_c * std::max(1.0 + jitter, 0.05), f0, misfeed};
}

}  // namespace detail

// Quasi-static multi-sheet feed. Each sheet advances at v_feed scaled by a
// grip factor that degrades between f_good and f_contact_min; without
// continuous adjustment the per-finger force decays with the accumulated fed
// thickness, with adjustment it is restored before every sheet. Feeding stops
// with ContactLost when the effective force falls below the contact minimum
// or below the squeeze-force feasibility bound for the corner profile.
inline FeedLog simulate_feed(const ScenarioConfig& sc, FeedPolicy policy,
                             std::uint64_t seed) {
  sc.validate();
  const double v = sc.feed.v_feed(sc.geometry.r);
  const double dt = sc.feed.dt;

  BeamSpec corner = sc.beam_spec(WidthProfile::corner_linear(2.0, 210.0));
  DeflectionCurve curve = DeflectionCurve::raised_cosine(1.0, corner.l);
  const double f_beam_gate =
      sc.feed.beam_scale * min_squeeze_force(corner, curve).f_min;

  FeedLog log;
  log.dt = dt;
  log.total_sheets = sc.sheets;
  double now = 0.0;  // continuous time, s

  for (int k = 1; k <= sc.sheets; ++k) {
    detail::SheetDraws draws = detail::sheet_draws(sc, seed, k);
    double fed_mm = (k - 1) * sc.sheet_h;
    double f_eff = draws.f0;
    if (policy == FeedPolicy::WithoutCA) {
      f_eff -= sc.feed.decay_per_mm * fed_mm;
    } else if (k > 1) {
      CaEvent ev;
      ev.sheet = k;
      ev.adj = continuous_adjust(k - 1, sc.sheet_h, corner.l);
      log.ca_events.push_back(ev);
    }

    if (f_eff < sc.feed.f_contact_min || f_eff < f_beam_gate) {
      log.outcome.kind = FeedOutcome::Kind::ContactLost;
      log.outcome.at_sheet = k;
      break;
    }
    double grip = std::clamp((f_eff - sc.feed.f_contact_min) /
                                 (sc.feed.f_good - sc.feed.f_contact_min),
                             0.0, 1.0);
    if (grip <= 1e-9) {
      log.outcome.kind = FeedOutcome::Kind::ContactLost;
      log.outcome.at_sheet = k;
      break;
    }

    double t_k = draws.length_mm / (v * grip);
    if (draws.misfeed) t_k *= 2.0;  // double pass
    double start = now;
    now += t_k;
    log.sheet_times.push_back(t_k);

    EdgeTruth e;
    e.sheet = k;
    e.appear_tick = static_cast<int>(std::lround(start / dt));
    e.cross_tick = static_cast<int>(std::lround((start + 0.5 * t_k) / dt));
    e.vanish_tick = static_cast<int>(std::lround(now / dt));
    e.cross_tick = std::max(e.cross_tick, e.appear_tick + 1);
    e.vanish_tick = std::max(e.vanish_tick, e.cross_tick + 1);
    log.edges.push_back(e);

    while (static_cast<double>(log.tick_forces.size()) * dt < now)
      log.tick_forces.push_back(f_eff);
  }

  log.total_ticks = static_cast<int>(log.tick_forces.size());
  if (!log.edges.empty())
    log.total_ticks = std::max(log.total_ticks, log.edges.back().vanish_tick + 1);
  return log;
}

inline std::vector<EdgeDetection> edge_event_stream(const FeedLog& log,
                                                    const DetectorParams& det,
                                                    std::uint64_t seed) {
  return edge_event_stream(std::span<const EdgeTruth>(log.edges), det, seed);
}

struct GraspResult {
  int grasped = 0;
  int target = 1;
  double elapsed = 1.0;  // s
};

// SR = 1 - |grasped - target| / target, clamped below at zero.
inline double sr_metric(const GraspResult& g) {
  if (g.target < 1) throw PreconditionViolation("sr_metric: target >= 1");
  double sr = 1.0 - std::abs(g.grasped - g.target) / static_cast<double>(g.target);
  return std::max(sr, 0.0);
}

inline double ppm_metric(const GraspResult& g) {
  if (g.elapsed <= 0.0) throw PreconditionViolation("ppm_metric: elapsed > 0");
  return g.grasped * 60.0 / g.elapsed;
}

inline double estimate_total_time(int n_desired, double l_c, double v_feed) {
  if (n_desired < 1 || l_c <= 0.0 || v_feed <= 0.0)
    throw PreconditionViolation("estimate_total_time: all inputs positive");
  return n_desired * (l_c / v_feed);
}

struct GraspRun {
  GraspResult result;
  FeedLog feed;
  int stop_tick = 0;
  int counted = 0;  // tracker count at stop (counting mode only)
};

// End-to-end grasp of `target` sheets out of a WithCA feed. With counting,
// the gripper closes at the completion of the sheet during which the tracker
// confirmed `target` held edges, and pays a per-sheet sensing pause. Without
// counting it closes open-loop at the nominal fixed-time estimate.
inline GraspRun run_grasp(const ScenarioConfig& sc, bool with_counting,
                          std::uint64_t seed) {
  sc.validate();
  if (sc.sheets < sc.target)
    throw InvalidScenario("run_grasp: need at least `target` sheets");

  GraspRun run;
  run.feed = simulate_feed(sc, FeedPolicy::WithCA, seed);
  run.result.target = sc.target;
  const double dt = run.feed.dt;
  if (run.feed.sheet_times.empty()) {
    run.result.elapsed = dt;  // contact lost before the first sheet moved
    return run;
  }

  // true crossing times from the continuous per-sheet times
  std::vector<double> cross_times, completion_times;
  double acc = 0.0;
  for (double t : run.feed.sheet_times) {
    cross_times.push_back(acc + 0.5 * t);
    completion_times.push_back(acc + t);
    acc += t;
  }

  if (!with_counting) {
    double t_est = estimate_total_time(sc.target, sc.feed.l_c,
                                       sc.feed.v_feed(sc.geometry.r));
    run.result.elapsed = t_est;
    run.stop_tick = static_cast<int>(std::lround(t_est / dt));
    run.result.grasped = static_cast<int>(
        std::count_if(cross_times.begin(), cross_times.end(),
                      [&](double t) { return t <= t_est; }));
    return run;
  }

  std::vector<EdgeDetection> stream =
      edge_event_stream(run.feed, sc.detector,
                        stream_seed(seed, 0x67726173ull));
  std::map<int, std::vector<EdgeDetection>> by_frame;
  for (const EdgeDetection& d : stream) by_frame[d.frame_index].push_back(d);

  CounterState st =
      make_counter(0.5 * (sc.detector.enter_v + sc.detector.exit_v));
  int held_tick = -1;
  for (int t = 0; t < run.feed.total_ticks; ++t) {
    auto it = by_frame.find(t);
    std::span<const EdgeDetection> frame =
        it == by_frame.end() ? std::span<const EdgeDetection>{}
                             : std::span<const EdgeDetection>(it->second);
    st = count_step(st, frame, sc.tracker, t);
    if (st.held_total >= sc.target) {
      held_tick = t;
      break;
    }
  }
  run.counted = st.count;
  if (held_tick < 0) held_tick = run.feed.total_ticks - 1;

  // close at the completion of the sheet in progress when the count confirmed
  double held_time = held_tick * dt;
  std::size_t sheet = 0;
  while (sheet < completion_times.size() &&
         completion_times[sheet] < held_time)
    ++sheet;
  if (sheet >= completion_times.size()) sheet = completion_times.size() - 1;
  double close_time = completion_times[sheet];

  run.stop_tick = static_cast<int>(std::lround(close_time / dt));
  run.result.elapsed = close_time +
                       static_cast<double>(sheet + 1) * sc.feed.sense_ticks * dt;
  run.result.grasped = static_cast<int>(
      std::count_if(cross_times.begin(), cross_times.end(),
                    [&](double t) { return t <= close_time; }));
  return run;
}

}  // namespace rotip
