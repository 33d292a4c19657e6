#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <map>
#include <random>
#include <vector>

#include "rotip/contact_oracle.hpp"
#include "rotip/counting.hpp"
#include "rotip/errors.hpp"

using namespace rotip;

namespace {

EdgeDetection det(int frame, double u, double v, double conf = 0.9) {
  EdgeDetection d;
  d.frame_index = frame;
  d.center_u = u;
  d.center_v = v;
  d.bbox[0] = u - 30.0;
  d.bbox[1] = v - 8.0;
  d.bbox[2] = u + 30.0;
  d.bbox[3] = v + 8.0;
  d.confidence = conf;
  return d;
}

// Group a sorted stream by frame and run the counter over every tick up to
// and including last_tick (feeding empty frames where nothing was detected).
CounterState run_stream(const std::vector<EdgeDetection>& stream,
                        const TrackParams& params, int last_tick,
                        double line = 240.0) {
  std::map<int, std::vector<EdgeDetection>> by_frame;
  for (const EdgeDetection& d : stream) by_frame[d.frame_index].push_back(d);
  CounterState st = make_counter(line);
  for (int t = 0; t <= last_tick; ++t) {
    auto it = by_frame.find(t);
    std::span<const EdgeDetection> frame =
        it == by_frame.end() ? std::span<const EdgeDetection>{}
                             : std::span<const EdgeDetection>(it->second);
    st = count_step(st, frame, params, t);
  }
  return st;
}

}  // namespace

TEST_CASE("empty stream counts nothing") {
  TrackParams params;
  CounterState st = make_counter(240.0);
  st = count_step(st, {}, params, 0);
  st = count_step(st, {}, params, 1);
  CHECK(st.count == 0);
  CHECK(st.held_total == 0);
  CHECK(st.tracks.empty());

  // empty frame without an explicit index is a no-op
  CounterState same = count_step(st, {}, params);
  CHECK(same.last_frame == st.last_frame);
}

TEST_CASE("single edge is counted at appearance and held at crossing") {
  TrackParams params;
  CounterState st = make_counter(240.0);

  std::vector<EdgeDetection> f0{det(0, 320, 200)};
  st = count_step(st, f0, params);
  CHECK(st.count == 1);
  CHECK(st.held_total == 0);
  REQUIRE(st.tracks.size() == 1);
  CHECK(st.tracks[0].id == 1);
  CHECK_FALSE(st.tracks[0].held);

  std::vector<EdgeDetection> f1{det(1, 320, 218)};
  st = count_step(st, f1, params);
  CHECK(st.count == 1);  // same track, no new count
  CHECK(st.tracks[0].v == 218.0);

  // inclusive crossing: previous row strictly below the line, new row at it
  std::vector<EdgeDetection> f2{det(2, 320, 230)};
  st = count_step(st, f2, params);
  CHECK_FALSE(st.tracks[0].held);
  std::vector<EdgeDetection> f3{det(3, 320, 240)};
  st = count_step(st, f3, params);
  CHECK(st.tracks[0].held);
  CHECK(st.held_total == 1);

  // crossing is latched, further motion does not re-trigger
  std::vector<EdgeDetection> f4{det(4, 320, 260)};
  st = count_step(st, f4, params);
  CHECK(st.held_total == 1);
}

TEST_CASE("track born past the line is held immediately") {
  TrackParams params;
  CounterState st = make_counter(240.0);
  std::vector<EdgeDetection> f0{det(0, 320, 300)};
  st = count_step(st, f0, params);
  CHECK(st.count == 1);
  CHECK(st.held_total == 1);
  CHECK(st.tracks[0].held);
}

TEST_CASE("close duplicates are suppressed, distant ones are not") {
  TrackParams params;  // nms_radius = 10
  CounterState st = make_counter(240.0);
  std::vector<EdgeDetection> close{det(0, 320, 100, 0.9), det(0, 323, 101, 0.8)};
  st = count_step(st, close, params);
  CHECK(st.count == 1);
  REQUIRE(st.tracks.size() == 1);
  // the stronger detection wins
  CHECK(st.tracks[0].u == 320.0);

  CounterState st2 = make_counter(240.0);
  std::vector<EdgeDetection> apart{det(0, 320, 100), det(0, 320, 140)};
  st2 = count_step(st2, apart, params);
  CHECK(st2.count == 2);
}

TEST_CASE("low-confidence detections are ignored") {
  TrackParams params;  // conf_gate = 0.5
  CounterState st = make_counter(240.0);
  std::vector<EdgeDetection> f0{det(0, 320, 100, 0.3)};
  st = count_step(st, f0, params);
  CHECK(st.count == 0);
  CHECK(st.rejected_last_frame == 0);  // gated, not malformed
}

TEST_CASE("a short dropout does not double count") {
  TrackParams params;  // ttl = 5
  CounterState st = make_counter(240.0);
  std::vector<EdgeDetection> f0{det(0, 320, 100)};
  st = count_step(st, f0, params);
  for (int t = 1; t <= 4; ++t) st = count_step(st, {}, params, t);
  std::vector<EdgeDetection> f5{det(5, 320, 120)};
  st = count_step(st, f5, params);
  CHECK(st.count == 1);  // re-associated with the surviving track
  REQUIRE(st.tracks.size() == 1);
  CHECK(st.tracks[0].id == 1);
}

TEST_CASE("a long dropout retires the track and a reappearance recounts") {
  TrackParams params;
  CounterState st = make_counter(240.0);
  std::vector<EdgeDetection> f0{det(0, 320, 100)};
  st = count_step(st, f0, params);
  for (int t = 1; t <= 6; ++t) st = count_step(st, {}, params, t);
  CHECK(st.tracks.empty());  // 6 - 0 > ttl
  std::vector<EdgeDetection> f7{det(7, 320, 120)};
  st = count_step(st, f7, params);
  CHECK(st.count == 2);
}

TEST_CASE("held_total survives retirement") {
  TrackParams params;
  CounterState st = make_counter(240.0);
  std::vector<EdgeDetection> f0{det(0, 320, 300)};
  st = count_step(st, f0, params);
  CHECK(st.held_total == 1);
  for (int t = 1; t <= 7; ++t) st = count_step(st, {}, params, t);
  CHECK(st.tracks.empty());
  CHECK(st.held_total == 1);
}

TEST_CASE("malformed detections are rejected with a diagnostic") {
  TrackParams params;
  CounterState st = make_counter(240.0);

  EdgeDetection bad_conf = det(0, 320, 100);
  bad_conf.confidence = 1.5;
  EdgeDetection bad_center = det(0, 320, 100);
  bad_center.center_v = std::numeric_limits<double>::quiet_NaN();
  EdgeDetection bad_bbox = det(0, 320, 100);
  std::swap(bad_bbox.bbox[0], bad_bbox.bbox[2]);
  EdgeDetection wrong_frame = det(3, 320, 100);
  EdgeDetection good = det(0, 100, 100);

  std::vector<EdgeDetection> frame{bad_conf, bad_center, bad_bbox, wrong_frame,
                                   good};
  st = count_step(st, frame, params, 0);
  CHECK(st.rejected_last_frame == 4);
  CHECK_FALSE(st.diagnostic.empty());
  CHECK(st.count == 1);  // only the well-formed detection survives

  // the diagnostic clears on the next clean frame
  std::vector<EdgeDetection> clean{det(1, 100, 110)};
  st = count_step(st, clean, params);
  CHECK(st.rejected_last_frame == 0);
  CHECK(st.diagnostic.empty());
}

TEST_CASE("frame indices must strictly increase") {
  TrackParams params;
  CounterState st = make_counter(240.0);
  std::vector<EdgeDetection> f3{det(3, 320, 100)};
  st = count_step(st, f3, params);
  std::vector<EdgeDetection> again{det(3, 320, 110)};
  CHECK_THROWS_AS(count_step(st, again, params), PreconditionViolation);
  std::vector<EdgeDetection> back{det(2, 320, 110)};
  CHECK_THROWS_AS(count_step(st, back, params), PreconditionViolation);
}

TEST_CASE("count is monotone under a noisy stream") {
  std::vector<EdgeTruth> truths;
  for (int s = 0; s < 6; ++s)
    truths.push_back({s, 10 + 40 * s, 30 + 40 * s, 50 + 40 * s});
  DetectorParams noisy;
  noisy.recall = 0.88;
  noisy.burst_rate = 0.05;
  noisy.false_rate = 0.02;
  noisy.center_jitter_px = 3.0;
  std::vector<EdgeDetection> stream = edge_event_stream(truths, noisy, 99);

  std::map<int, std::vector<EdgeDetection>> by_frame;
  for (const EdgeDetection& d : stream) by_frame[d.frame_index].push_back(d);
  TrackParams params;
  CounterState st = make_counter(240.0);
  int prev_count = 0, prev_held = 0;
  for (int t = 0; t <= 300; ++t) {
    auto it = by_frame.find(t);
    std::span<const EdgeDetection> frame =
        it == by_frame.end() ? std::span<const EdgeDetection>{}
                             : std::span<const EdgeDetection>(it->second);
    st = count_step(st, frame, params, t);
    CHECK(st.count >= prev_count);
    CHECK(st.held_total >= prev_held);
    prev_count = st.count;
    prev_held = st.held_total;
  }
}

TEST_CASE("result is independent of detection order within a frame") {
  TrackParams params;
  std::vector<EdgeDetection> frame0{det(0, 320, 100, 0.9), det(0, 320, 150, 0.8),
                                    det(0, 100, 100, 0.7), det(0, 320, 155, 0.85),
                                    det(0, 500, 300, 0.6)};
  std::vector<EdgeDetection> frame1{det(1, 321, 112, 0.9), det(1, 318, 160, 0.8),
                                    det(1, 99, 108, 0.7), det(1, 502, 312, 0.6)};

  auto run = [&](const std::vector<EdgeDetection>& f0,
                 const std::vector<EdgeDetection>& f1) {
    CounterState st = make_counter(240.0);
    st = count_step(st, f0, params);
    st = count_step(st, f1, params);
    return st;
  };
  CounterState ref = run(frame0, frame1);

  std::mt19937 shuffler(7);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<EdgeDetection> p0 = frame0, p1 = frame1;
    std::shuffle(p0.begin(), p0.end(), shuffler);
    std::shuffle(p1.begin(), p1.end(), shuffler);
    CounterState got = run(p0, p1);
    REQUIRE(got.count == ref.count);
    REQUIRE(got.held_total == ref.held_total);
    REQUIRE(got.tracks.size() == ref.tracks.size());
    auto key = [](const Track& t) { return std::make_tuple(t.u, t.v, t.held); };
    std::vector<std::tuple<double, double, bool>> a, b;
    for (const Track& t : ref.tracks) a.push_back(key(t));
    for (const Track& t : got.tracks) b.push_back(key(t));
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    REQUIRE(a == b);
  }
}

TEST_CASE("noiseless stream is counted completely") {
  std::vector<EdgeTruth> truths;
  for (int s = 0; s < 5; ++s)
    truths.push_back({s, 20 + 60 * s, 50 + 60 * s, 80 + 60 * s});
  DetectorParams perfect;  // recall 1, no bursts, no false positives
  std::vector<EdgeDetection> stream = edge_event_stream(truths, perfect, 42);

  CounterState st = run_stream(stream, TrackParams{}, 380);
  CHECK(st.count == 5);
  CHECK(st.held_total == 5);  // every edge sweeps 40 -> 440 through row 240
}

TEST_CASE("persistence filter suppresses one-frame tracks") {
  TrackParams params;
  params.min_hits = 2;
  CounterState st = make_counter(240.0);

  // a single-frame blip never reaches min_hits and is retired uncounted
  std::vector<EdgeDetection> blip{det(0, 500, 300)};
  st = count_step(st, blip, params);
  CHECK(st.count == 0);
  CHECK(st.held_total == 0);
  for (int t = 1; t <= 6; ++t) st = count_step(st, {}, params, t);
  CHECK(st.tracks.empty());
  CHECK(st.count == 0);

  // a persistent edge is counted on its second match
  std::vector<EdgeDetection> f7{det(7, 320, 100)};
  st = count_step(st, f7, params);
  CHECK(st.count == 0);
  std::vector<EdgeDetection> f8{det(8, 320, 112)};
  st = count_step(st, f8, params);
  CHECK(st.count == 1);

  // born past the line: held latches at confirmation, not at birth
  CounterState st2 = make_counter(240.0);
  std::vector<EdgeDetection> g0{det(0, 320, 300)};
  st2 = count_step(st2, g0, params);
  CHECK(st2.held_total == 0);
  std::vector<EdgeDetection> g1{det(1, 320, 310)};
  st2 = count_step(st2, g1, params);
  CHECK(st2.count == 1);
  CHECK(st2.held_total == 1);
}

TEST_CASE("counting accuracy is the exact-match fraction") {
  std::vector<std::pair<int, int>> trials{{3, 3}, {2, 3}, {4, 4}, {4, 5}};
  CHECK(counting_accuracy(trials) == 0.5);
  std::vector<std::pair<int, int>> all{{1, 1}, {2, 2}};
  CHECK(counting_accuracy(all) == 1.0);
  CHECK_THROWS_AS(counting_accuracy({}), PreconditionViolation);
}
