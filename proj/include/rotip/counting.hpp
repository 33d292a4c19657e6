#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "rotip/contact_oracle.hpp"
#include "rotip/errors.hpp"

namespace rotip {

struct TrackParams {
  double gate_px = 25.0;     // association radius per frame since last match
  int ttl = 5;               // frames a track survives unmatched
  double nms_radius = 10.0;  // same-frame duplicate suppression radius
  double conf_gate = 0.5;    // detections below are ignored
  int min_hits = 1;          // matches required before a track counts

  void validate() const {
    if (gate_px <= 0.0 || ttl < 1 || nms_radius < 0.0 || conf_gate < 0.0 ||
        conf_gate > 1.0 || min_hits < 1)
      throw PreconditionViolation("TrackParams: out-of-range value");
  }
};

struct Track {
  int id = 0;
  double u = 0.0;
  double v = 0.0;
  int last_frame = 0;
  int hits = 1;
  bool counted = false;
  bool held = false;
};

// Edge counter: a new track increments the count at appearance once it has
// been matched min_hits times (a persistence filter against one-frame false
// positives), and is marked held once its centre crosses the threshold row in
// the feed direction (increasing v). held_total survives track retirement.
struct CounterState {
  int count = 0;
  int held_total = 0;
  int next_id = 1;
  int last_frame = -1;
  double threshold_line = 240.0;
  std::vector<Track> tracks;
  int rejected_last_frame = 0;
  std::string diagnostic;
};

inline CounterState make_counter(double threshold_line) {
  CounterState st;
  st.threshold_line = threshold_line;
  return st;
}

// Advance the counter by one frame. frame_index may be given explicitly (for
// frames with no detections); otherwise it is taken from the detections.
inline CounterState count_step(const CounterState& state,
                               std::span<const EdgeDetection> frame,
                               const TrackParams& params,
                               int frame_index = -1) {
  params.validate();
  CounterState st = state;
  st.rejected_last_frame = 0;
  st.diagnostic.clear();

  if (frame_index < 0) {
    if (frame.empty()) return st;  // nothing to do and no clock to advance
    frame_index = frame.front().frame_index;
  }
  if (frame_index <= st.last_frame)
    throw PreconditionViolation("count_step: frame index must increase");

  // validate, then gate by confidence
  std::vector<const EdgeDetection*> dets;
  for (const EdgeDetection& d : frame) {
    if (d.frame_index != frame_index || !std::isfinite(d.center_u) ||
        !std::isfinite(d.center_v) || d.confidence < 0.0 ||
        d.confidence > 1.0 || d.bbox[2] < d.bbox[0] || d.bbox[3] < d.bbox[1]) {
      ++st.rejected_last_frame;
      st.diagnostic = "malformed detection in frame " +
                      std::to_string(frame_index);
      continue;
    }
    if (d.confidence < params.conf_gate) continue;
    dets.push_back(&d);
  }

  // duplicate suppression: strongest detection wins within nms_radius;
  // ordering by content keeps the result independent of input order
  std::sort(dets.begin(), dets.end(),
            [](const EdgeDetection* a, const EdgeDetection* b) {
              if (a->confidence != b->confidence)
                return a->confidence > b->confidence;
              if (a->center_v != b->center_v) return a->center_v < b->center_v;
              return a->center_u < b->center_u;
            });
  std::vector<const EdgeDetection*> kept;
  for (const EdgeDetection* d : dets) {
    bool suppressed = false;
    for (const EdgeDetection* k : kept)
      if (std::hypot(d->center_u - k->center_u, d->center_v - k->center_v) <
          params.nms_radius) {
        suppressed = true;
        break;
      }
    if (!suppressed) kept.push_back(d);
  }

  // retire stale tracks before association so the match gap stays <= ttl
  std::erase_if(st.tracks, [&](const Track& t) {
    return frame_index - t.last_frame > params.ttl;
  });

  // greedy nearest association, ties by smallest track id then detection row;
  // the gate widens with the number of frames the track went unseen so that
  // a missed frame does not strand a moving edge outside the radius
  struct Pair {
    double dist;
    int track_idx;
    int det_idx;
    const Track* tr;
    const EdgeDetection* de;
  };
  std::vector<Pair> pairs;
  for (std::size_t ti = 0; ti < st.tracks.size(); ++ti)
    for (std::size_t di = 0; di < kept.size(); ++di) {
      double dist = std::hypot(st.tracks[ti].u - kept[di]->center_u,
                               st.tracks[ti].v - kept[di]->center_v);
      int gap = std::max(frame_index - st.tracks[ti].last_frame, 1);
      if (dist <= params.gate_px * gap)
        pairs.push_back({dist, static_cast<int>(ti), static_cast<int>(di),
                         &st.tracks[ti], kept[di]});
    }
  std::sort(pairs.begin(), pairs.end(), [](const Pair& a, const Pair& b) {
    if (a.dist != b.dist) return a.dist < b.dist;
    if (a.tr->id != b.tr->id) return a.tr->id < b.tr->id;
    if (a.de->center_v != b.de->center_v) return a.de->center_v < b.de->center_v;
    return a.de->center_u < b.de->center_u;
  });
  std::vector<bool> track_used(st.tracks.size(), false);
  std::vector<bool> det_used(kept.size(), false);
  for (const Pair& p : pairs) {
    if (track_used[p.track_idx] || det_used[p.det_idx]) continue;
    track_used[p.track_idx] = true;
    det_used[p.det_idx] = true;
    Track& tr = st.tracks[p.track_idx];
    ++tr.hits;
    if (!tr.counted && tr.hits >= params.min_hits) {
      tr.counted = true;
      ++st.count;
    }
    bool crossed = tr.v < st.threshold_line &&
                   p.de->center_v >= st.threshold_line;
    bool past = tr.v >= st.threshold_line;  // born beyond the line, unconfirmed
    if (!tr.held && tr.counted && (crossed || past)) {
      tr.held = true;
      ++st.held_total;
    }
    tr.u = p.de->center_u;
    tr.v = p.de->center_v;
    tr.last_frame = frame_index;
  }

  // unmatched detections found a new edge each: count at appearance
  std::vector<const EdgeDetection*> births;
  for (std::size_t di = 0; di < kept.size(); ++di)
    if (!det_used[di]) births.push_back(kept[di]);
  std::sort(births.begin(), births.end(),
            [](const EdgeDetection* a, const EdgeDetection* b) {
              if (a->center_v != b->center_v) return a->center_v < b->center_v;
              return a->center_u < b->center_u;
            });
  for (const EdgeDetection* d : births) {
    Track tr;
    tr.id = st.next_id++;
    tr.u = d->center_u;
    tr.v = d->center_v;
    tr.last_frame = frame_index;
    tr.counted = params.min_hits <= 1;
    if (tr.counted) {
      ++st.count;
      tr.held = d->center_v >= st.threshold_line;  // born past the line
      if (tr.held) ++st.held_total;
    }
    st.tracks.push_back(tr);
  }

  st.last_frame = frame_index;
  return st;
}

// Fraction of trials whose final count equals the true count exactly.
inline double counting_accuracy(
    std::span<const std::pair<int, int>> trials) {
  if (trials.empty())
    throw PreconditionViolation("counting_accuracy: no trials");
  int exact = 0;
  for (const auto& [counted, truth] : trials) exact += counted == truth;
  return static_cast<double>(exact) / trials.size();
}

}  // namespace rotip
