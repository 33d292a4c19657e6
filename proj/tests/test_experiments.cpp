#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <vector>

#include "rotip/experiments.hpp"

using namespace rotip;

namespace {

std::vector<double> degree_steps(double lo, double hi, double step) {
  std::vector<double> out;
  for (double a = lo; a <= hi + 1e-9; a += step) out.push_back(a);
  return out;
}

ScenarioConfig noiseless_scenario() {
  return ScenarioConfig{}.noiseless_copy();
}

}  // namespace

TEST_CASE("noiseless tactile sweep recovers plane normals to oracle precision") {
  ScenarioConfig sc = noiseless_scenario();
  std::vector<double> tilts = degree_steps(-45.0, 45.0, 1.0);
  std::vector<EstimationMethod> methods{EstimationMethod::Tactile};
  std::vector<SweepPoint> rows = plane_sweep(sc, tilts, methods, 11);
  REQUIRE(rows.size() == tilts.size());
  CHECK(sweep_max_error(rows, EstimationMethod::Tactile) < 0.1);
  CHECK(sweep_mean_error(rows, EstimationMethod::Tactile) < 0.02);
}

TEST_CASE("tactile sweep under the default mask noise stays in band") {
  ScenarioConfig sc;  // default preset carries the calibrated mask noise
  std::vector<double> tilts = degree_steps(-45.0, 45.0, 1.0);
  std::vector<EstimationMethod> methods{EstimationMethod::Tactile};
  for (std::uint64_t seed : {3ull, 17ull}) {
    std::vector<SweepPoint> rows = plane_sweep(sc, tilts, methods, seed);
    double mean = sweep_mean_error(rows, EstimationMethod::Tactile);
    INFO("seed " << seed << " mean " << mean);
    CHECK(mean > 0.5);
    CHECK(mean < 3.0);
  }
}

TEST_CASE("vision and force baselines match their configured presets") {
  ScenarioConfig sc;
  std::vector<double> tilts = degree_steps(-45.0, 45.0, 1.0);
  std::vector<EstimationMethod> methods{EstimationMethod::Vision,
                                        EstimationMethod::Force};
  double vision_sum = 0.0, force_sum = 0.0;
  int n = 0;
  for (std::uint64_t seed = 0; seed < 40; ++seed) {
    std::vector<SweepPoint> rows = plane_sweep(sc, tilts, methods, seed);
    vision_sum += sweep_mean_error(rows, EstimationMethod::Vision);
    force_sum += sweep_mean_error(rows, EstimationMethod::Force);
    ++n;
  }
  CHECK_THAT(vision_sum / n, Catch::Matchers::WithinAbs(7.82, 0.3));
  CHECK_THAT(force_sum / n, Catch::Matchers::WithinAbs(11.14, 0.3));
}

TEST_CASE("tactile beats vision beats force for every sweep seed") {
  ScenarioConfig sc;
  std::vector<double> tilts = degree_steps(-45.0, 45.0, 1.0);
  std::vector<EstimationMethod> methods{EstimationMethod::Tactile,
                                        EstimationMethod::Vision,
                                        EstimationMethod::Force};
  for (std::uint64_t seed = 1; seed <= 8; ++seed) {
    std::vector<SweepPoint> rows = plane_sweep(sc, tilts, methods, seed);
    double tac = sweep_mean_error(rows, EstimationMethod::Tactile);
    double vis = sweep_mean_error(rows, EstimationMethod::Vision);
    double frc = sweep_mean_error(rows, EstimationMethod::Force);
    INFO("seed " << seed << ": " << tac << " / " << vis << " / " << frc);
    CHECK(tac < vis);
    CHECK(vis < frc);
  }
}

TEST_CASE("sweep rejects empty inputs and bad params") {
  ScenarioConfig sc;
  std::vector<double> tilts{0.0};
  std::vector<EstimationMethod> methods{EstimationMethod::Tactile};
  CHECK_THROWS_AS(plane_sweep(sc, {}, methods, 1), PreconditionViolation);
  CHECK_THROWS_AS(plane_sweep(sc, tilts, {}, 1), PreconditionViolation);
  SweepParams sp;
  sp.indentation_mm = sp.press_mm + 0.1;
  CHECK_THROWS_AS(plane_sweep(sc, tilts, methods, 1, sp),
                  PreconditionViolation);
}

TEST_CASE("sweep scene presses the plate by the requested depth") {
  SensorGeometry g;
  SweepParams sp;
  ContactScene scene = sweep_scene(g, 30.0, sp);
  // deepest surface point sits press_mm past the plane
  double deepest = scene.plane.d - (scene.plane.n.vec().dot(g.centre()) - g.r);
  CHECK_THAT(deepest, Catch::Matchers::WithinAbs(sp.press_mm, 1e-12));
}

TEST_CASE("noiseless closed loop reaches two-finger contact from steep tilts") {
  ScenarioConfig sc = noiseless_scenario();
  TrialParams tp;
  tp.blind_init = true;  // start upright; the plate tilt is the misalignment
  SurfaceTable full(sc.intrinsics, sc.geometry, 1);
  SurfaceTable coarse(sc.intrinsics, sc.geometry, tp.count_stride);
  int adjusted = 0;
  for (int t = 0; t < 100; ++t) {
    ContactTrialResult res =
        contact_trial(sc, ContactMethod::VisionForceTactile,
                      stream_seed(1234, t), tp, full, coarse);
    INFO("trial " << t << " tilt " << res.tilt_deg << " ticks " << res.ticks
                  << " rounds " << res.adjust_rounds);
    REQUIRE(res.two_finger);
    REQUIRE_FALSE(res.crash);
    CHECK(res.ticks < tp.max_ticks);
    // a perfect tactile estimate aligns the descent in a single round; tilts
    // about the finger line never split the fingers, so some trials need none
    CHECK(res.adjust_rounds <= 1);
    adjusted += res.adjust_rounds > 0;
  }
  CHECK(adjusted >= 40);
}

TEST_CASE("vision-only trials trail the tactile loop under default noise") {
  ScenarioConfig sc;
  for (std::uint64_t seed : {5ull, 21ull, 77ull}) {
    ContactBatch vis =
        contact_trial_batch(sc, ContactMethod::Vision, 100, seed);
    ContactBatch tac =
        contact_trial_batch(sc, ContactMethod::VisionForceTactile, 100, seed);
    INFO("seed " << seed << " vision " << vis.two_rate() << " tactile "
                 << tac.two_rate());
    CHECK(vis.two_rate() < tac.two_rate());
    CHECK(vis.one_finger >= vis.two_finger);
    CHECK(tac.one_finger >= tac.two_finger);
  }
}

TEST_CASE("method comparison reproduces the reported contact-table shape") {
  ScenarioConfig sc;
  ContactBatch vi = contact_trial_batch(sc, ContactMethod::Vision, 200, 9);
  ContactBatch wa =
      contact_trial_batch(sc, ContactMethod::VisionForceWA, 200, 9);
  ContactBatch vf =
      contact_trial_batch(sc, ContactMethod::VisionForce, 200, 9);
  ContactBatch vt =
      contact_trial_batch(sc, ContactMethod::VisionForceTactile, 200, 9);

  // the force-threshold stop and the tactile press always find first contact
  CHECK(wa.one_finger == wa.trials);
  CHECK(vf.one_finger == vf.trials);
  CHECK(vt.one_finger == vt.trials);
  CHECK(wa.crashes == 0);
  CHECK(vf.crashes == 0);
  CHECK(vt.crashes == 0);

  // open-loop placement sometimes misses entirely or overshoots
  CHECK(vi.one_finger < vi.trials);
  CHECK(vi.crashes > 0);

  // two-finger contact: open-loop vision trails every guided method, and the
  // tactile closed loop dominates both force-stop variants
  CHECK(vi.two_finger < wa.two_finger);
  CHECK(vi.two_finger < vf.two_finger);
  CHECK(vt.two_finger > wa.two_finger);
  CHECK(vt.two_finger > vf.two_finger);
  CHECK(wa.two_finger > 0);
  CHECK(wa.two_finger < wa.trials);
}

TEST_CASE("noiseless trials succeed for every method") {
  ScenarioConfig sc = noiseless_scenario();
  for (ContactMethod m :
       {ContactMethod::Vision, ContactMethod::VisionForceWA,
        ContactMethod::VisionForce, ContactMethod::VisionForceTactile}) {
    ContactBatch batch = contact_trial_batch(sc, m, 20, 3);
    INFO(contact_method_name(m));
    CHECK(batch.two_finger == batch.trials);
    CHECK(batch.crashes == 0);
  }
}

TEST_CASE("contact batches are deterministic in the seed") {
  ScenarioConfig sc;
  ContactBatch a = contact_trial_batch(sc, ContactMethod::Vision, 50, 13);
  ContactBatch b = contact_trial_batch(sc, ContactMethod::Vision, 50, 13);
  CHECK(a.one_finger == b.one_finger);
  CHECK(a.two_finger == b.two_finger);
  CHECK(a.crashes == b.crashes);

  SurfaceTable full(sc.intrinsics, sc.geometry, 1);
  SurfaceTable coarse(sc.intrinsics, sc.geometry, 8);
  ContactTrialResult r1 =
      contact_trial(sc, ContactMethod::Vision, 99, {}, full, coarse);
  ContactTrialResult r2 =
      contact_trial(sc, ContactMethod::Vision, 100, {}, full, coarse);
  CHECK(r1.tilt_deg != r2.tilt_deg);
}

TEST_CASE("trial batch rejects non-positive trial counts") {
  ScenarioConfig sc;
  CHECK_THROWS_AS(contact_trial_batch(sc, ContactMethod::Vision, 0, 1),
                  PreconditionViolation);
  CHECK_THROWS_AS(contact_trial_batch(sc, ContactMethod::Vision, -3, 1),
                  PreconditionViolation);
}

TEST_CASE("method names round-trip through the parsers") {
  for (ContactMethod m :
       {ContactMethod::Vision, ContactMethod::VisionForceWA,
        ContactMethod::VisionForce, ContactMethod::VisionForceTactile})
    CHECK(parse_contact_method(contact_method_name(m)) == m);
  for (EstimationMethod m : {EstimationMethod::Tactile, EstimationMethod::Vision,
                             EstimationMethod::Force})
    CHECK(parse_estimation_method(estimation_method_name(m)) == m);
  CHECK_FALSE(parse_contact_method("sonar").has_value());
  CHECK_FALSE(parse_estimation_method("sonar").has_value());
}
