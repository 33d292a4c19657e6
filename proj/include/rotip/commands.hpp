#pragma once

#include <atomic>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <map>
#include <mutex>
#include <span>
#include <string>
#include <thread>
#include <type_traits>
#include <utility>
#include <vector>

#include "rotip/beam.hpp"
#include "rotip/calibration.hpp"
#include "rotip/experiments.hpp"
#include "rotip/feed_sim.hpp"
#include "rotip/io.hpp"
#include "rotip/scenario.hpp"

// Command layer behind the CLI. Every command is a pure function of
// (scenario config, seed list): it fans seeds out to a worker pool, collects
// rows back in seed order so scheduling never changes bytes, and writes its
// tables through the io layer. Each command returns the files it wrote so
// check mode can diff them against committed goldens.

namespace rotip {

namespace detail {

template <typename F>
auto map_seeds(std::span<const std::uint64_t> seeds, F&& fn) {
  using R = std::invoke_result_t<F&, std::uint64_t>;
  std::vector<R> out(seeds.size());
  std::size_t workers = std::min<std::size_t>(
      seeds.size(), std::max(1u, std::thread::hardware_concurrency()));
  if (workers <= 1) {
    for (std::size_t i = 0; i < seeds.size(); ++i) out[i] = fn(seeds[i]);
    return out;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr first_error;
  std::mutex err_mu;
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w)
    pool.emplace_back([&] {
      for (std::size_t i; (i = next.fetch_add(1)) < seeds.size();) {
        try {
          out[i] = fn(seeds[i]);
        } catch (...) {
          std::scoped_lock lock(err_mu);
          if (!first_error) first_error = std::current_exception();
        }
      }
    });
  for (std::thread& t : pool) t.join();
  if (first_error) std::rethrow_exception(first_error);
  return out;
}

using CsvRows = std::vector<std::vector<std::string>>;

inline std::filesystem::path write_csv(const std::filesystem::path& out_dir,
                                       const std::string& name,
                                       const ScenarioConfig& sc,
                                       std::initializer_list<std::string> header,
                                       const CsvRows& rows,
                                       std::span<const std::string> comments = {}) {
  std::filesystem::path path = out_dir / name;
  std::ofstream f = open_output(path);
  CsvWriter csv(f);
  csv.provenance(config_hash(sc), sc.seeds);
  for (const std::string& c : comments) csv.comment(c);
  csv.row(header);
  for (const auto& r : rows) csv.row(r);
  return path;
}

}  // namespace detail

struct CommandOutput {
  std::vector<std::filesystem::path> files;
};

// Fig.-9-style sweep: tactile pipeline vs the vision and force baselines,
// one row per (tilt, method) per seed across -45..45 deg in 1 deg steps.
inline CommandOutput cmd_estimate_plane(const ScenarioConfig& sc,
                                        const std::filesystem::path& out_dir) {
  sc.validate();
  std::vector<double> tilts;
  for (int a = -45; a <= 45; ++a) tilts.push_back(a);
  const EstimationMethod methods[] = {EstimationMethod::Tactile,
                                      EstimationMethod::Vision,
                                      EstimationMethod::Force};
  auto per_seed = detail::map_seeds(sc.seeds, [&](std::uint64_t seed) {
    detail::CsvRows rows;
    for (const SweepPoint& p : plane_sweep(sc, tilts, methods, seed))
      rows.push_back({format_number(p.tilt_deg),
                      estimation_method_name(p.method), format_number(p.seed),
                      format_number(p.angle_error_deg)});
    return rows;
  });
  detail::CsvRows rows;
  for (auto& r : per_seed)
    rows.insert(rows.end(), std::make_move_iterator(r.begin()),
                std::make_move_iterator(r.end()));
  CommandOutput out;
  out.files.push_back(detail::write_csv(
      out_dir, "estimate_plane.csv", sc,
      {"tilt_deg", "method", "seed", "angle_error_deg"}, rows));
  return out;
}

// Two-finger touchdown batches per guidance method.
inline CommandOutput cmd_contact_trials(const ScenarioConfig& sc,
                                        std::span<const ContactMethod> methods,
                                        int trials,
                                        const std::filesystem::path& out_dir) {
  sc.validate();
  if (methods.empty())
    throw PreconditionViolation("cmd_contact_trials: no methods selected");
  if (trials < 1)
    throw PreconditionViolation("cmd_contact_trials: trials must be >= 1");
  auto per_seed = detail::map_seeds(sc.seeds, [&](std::uint64_t seed) {
    detail::CsvRows rows;
    for (ContactMethod m : methods) {
      ContactBatch b = contact_trial_batch(sc, m, trials, seed);
      rows.push_back({sc.name, format_number(seed), contact_method_name(m),
                      format_number(b.trials), format_number(b.one_rate()),
                      format_number(b.two_rate()), format_number(b.crashes)});
    }
    return rows;
  });
  detail::CsvRows rows;
  for (auto& r : per_seed)
    rows.insert(rows.end(), std::make_move_iterator(r.begin()),
                std::make_move_iterator(r.end()));
  CommandOutput out;
  out.files.push_back(detail::write_csv(
      out_dir, "contact_trials.csv", sc,
      {"scenario", "seed", "method", "trials", "sr_one", "sr_two", "crashes"},
      rows));
  return out;
}

namespace detail {

struct FeedRun {
  CsvRows rows;
  std::vector<nlohmann::json> log_lines;
};

inline FeedRun feed_one_seed(const ScenarioConfig& sc, std::uint64_t seed,
                             std::span<const FeedPolicy> policies) {
  FeedRun run;
  for (FeedPolicy policy : policies) {
    FeedLog log = simulate_feed(sc, policy, seed);
    int fed = static_cast<int>(log.sheet_times.size());
    GraspResult as_grasp{fed, sc.sheets, std::max(log.total_time(), log.dt)};
    double mean = 0.0;
    for (double t : log.sheet_times) mean += t;
    if (fed > 0) mean /= fed;
    double var = 0.0;
    for (double t : log.sheet_times) var += (t - mean) * (t - mean);
    double stddev = fed > 1 ? std::sqrt(var / (fed - 1)) : 0.0;
    run.rows.push_back({sc.name, format_number(seed), policy_name(policy),
                        format_number(fed), format_number(sr_metric(as_grasp)),
                        format_number(ppm_metric(as_grasp)),
                        format_number(mean), format_number(stddev)});
    for (int k = 0; k < fed; ++k)
      run.log_lines.push_back({{"seed", seed},
                               {"policy", policy_name(policy)},
                               {"sheet", k + 1},
                               {"time_s", log.sheet_times[k]}});
    nlohmann::json outcome{{"seed", seed},
                           {"policy", policy_name(policy)},
                           {"outcome", log.outcome.kind ==
                                               FeedOutcome::Kind::ContactLost
                                           ? "contact_lost"
                                           : "all_fed"},
                           {"total_s", log.total_time()}};
    if (log.outcome.kind == FeedOutcome::Kind::ContactLost)
      outcome["at_sheet"] = log.outcome.at_sheet;
    run.log_lines.push_back(std::move(outcome));
  }
  return run;
}

}  // namespace detail

// Multi-sheet feeding with and without continuous adjustment; a summary CSV
// plus a JSONL log with one line per fed sheet and one per outcome.
inline CommandOutput cmd_feed(const ScenarioConfig& sc,
                              std::span<const FeedPolicy> policies,
                              const std::filesystem::path& out_dir) {
  sc.validate();
  if (policies.empty())
    throw PreconditionViolation("cmd_feed: no policies selected");
  auto per_seed = detail::map_seeds(sc.seeds, [&](std::uint64_t seed) {
    return detail::feed_one_seed(sc, seed, policies);
  });
  detail::CsvRows rows;
  std::vector<nlohmann::json> lines;
  for (auto& r : per_seed) {
    rows.insert(rows.end(), std::make_move_iterator(r.rows.begin()),
                std::make_move_iterator(r.rows.end()));
    lines.insert(lines.end(), std::make_move_iterator(r.log_lines.begin()),
                 std::make_move_iterator(r.log_lines.end()));
  }
  CommandOutput out;
  out.files.push_back(detail::write_csv(
      out_dir, "feed.csv", sc,
      {"scenario", "seed", "policy", "sheets_fed", "sr", "ppm", "mean_feed_s",
       "std_feed_s"},
      rows));
  std::filesystem::path log_path = out_dir / "feed_log.jsonl";
  std::ofstream lf = open_output(log_path);
  JsonlWriter jsonl(lf);
  for (const nlohmann::json& j : lines) jsonl.write(j);
  out.files.push_back(log_path);
  return out;
}

// End-to-end grasp benchmark, counting-on vs counting-off per seed.
inline CommandOutput cmd_grasp_bench(const ScenarioConfig& sc,
                                     std::span<const bool> counting_modes,
                                     const std::filesystem::path& out_dir) {
  sc.validate();
  if (counting_modes.empty())
    throw PreconditionViolation("cmd_grasp_bench: no counting modes");
  auto per_seed = detail::map_seeds(sc.seeds, [&](std::uint64_t seed) {
    detail::CsvRows rows;
    for (bool with_counting : counting_modes) {
      GraspRun run = run_grasp(sc, with_counting, seed);
      rows.push_back({sc.name, format_number(seed),
                      with_counting ? "on" : "off",
                      format_number(run.result.grasped),
                      format_number(run.result.target),
                      format_number(sr_metric(run.result)),
                      format_number(ppm_metric(run.result)),
                      format_number(run.result.elapsed),
                      format_number(run.counted)});
    }
    return rows;
  });
  detail::CsvRows rows;
  for (auto& r : per_seed)
    rows.insert(rows.end(), std::make_move_iterator(r.begin()),
                std::make_move_iterator(r.end()));
  CommandOutput out;
  out.files.push_back(detail::write_csv(
      out_dir, "grasp_bench.csv", sc,
      {"scenario", "seed", "counting", "grasped", "target", "sr", "ppm",
       "elapsed_s", "counted"},
      rows));
  return out;
}

// Squeeze-force comparison across the four A4 locations.
inline CommandOutput cmd_force_analysis(const ScenarioConfig& sc,
                                        const std::filesystem::path& out_dir) {
  sc.validate();
  BeamSpec base = sc.beam_spec(WidthProfile::constant(297.0));
  DeflectionCurve curve = DeflectionCurve::raised_cosine(1.0, base.l);
  LocationReport rep = location_report(a4_location_specs(base), curve);
  detail::CsvRows rows;
  for (const LocationRow& r : rep.rows)
    rows.push_back({r.label, format_number(r.f_min), format_number(r.iz),
                    format_number(r.m1_moment), r.feasible ? "true" : "false"});
  std::vector<std::string> comments{"verdict=" + rep.verdict,
                                    "ratio_first_last=" +
                                        format_number(rep.ratio_first_last)};
  CommandOutput out;
  out.files.push_back(detail::write_csv(
      out_dir, "force_analysis.csv", sc,
      {"location", "F_min_N", "I_z", "M1", "feasible"}, rows, comments));
  return out;
}

// Synthetic calibration round trip: the configured geometry plays the true
// rig, the solver starts from the zero-offset design pose. Session size
// scales with the noise regime, since speckled masks need the averaging.
inline CommandOutput cmd_calibrate(const ScenarioConfig& sc,
                                   const std::filesystem::path& out_dir,
                                   bool dump_masks = false) {
  sc.validate();
  CalibrationDataParams dp;
  dp.mask_noise = sc.mask_noise;
  if (sc.mask_noise.flip_rate > 0.0) {
    dp.vertical_count = 96;
    dp.per_angle_count = 12;
  }
  SensorGeometry nominal{sc.geometry.r, 0.0, 0.0, SensorGeometry{}.oz};
  auto per_seed = detail::map_seeds(sc.seeds, [&](std::uint64_t seed) {
    CalibrationSet set =
        make_calibration_set(sc.intrinsics, sc.geometry, seed, dp);
    CalibrationResult res = calibrate_offsets(set, sc.intrinsics, nominal);
    return nlohmann::json{
        {"seed", seed},
        {"recovered",
         {{"ox", res.calibrated.ox},
          {"oy", res.calibrated.oy},
          {"oz", res.calibrated.oz}}},
        {"error_mm",
         {{"ox", std::abs(res.calibrated.ox - sc.geometry.ox)},
          {"oy", std::abs(res.calibrated.oy - sc.geometry.oy)},
          {"oz", std::abs(res.calibrated.oz - sc.geometry.oz)}}},
        {"xy_residual_mm", res.xy_residual_mm},
        {"z_residual_deg", res.z_residual_deg},
        {"xy_evaluations", res.xy_evaluations},
        {"z_evaluations", res.z_evaluations},
        {"rounds", res.rounds}};
  });
  nlohmann::json report{
      {"config_hash", hex16(config_hash(sc))},
      {"nominal", {{"ox", nominal.ox}, {"oy", nominal.oy}, {"oz", nominal.oz}}},
      {"true_geometry",
       {{"ox", sc.geometry.ox},
        {"oy", sc.geometry.oy},
        {"oz", sc.geometry.oz}}},
      {"vertical_count", dp.vertical_count},
      {"per_angle_count", dp.per_angle_count},
      {"mask_flip_rate", sc.mask_noise.flip_rate},
      {"sessions", per_seed}};
  CommandOutput out;
  std::filesystem::path path = out_dir / "calibration_report.json";
  std::ofstream f = open_output(path);
  f << report.dump(2) << '\n';
  out.files.push_back(path);
  if (dump_masks) {
    CalibrationSet set =
        make_calibration_set(sc.intrinsics, sc.geometry, sc.seeds.front(), dp);
    auto dump = [&](const std::string& name, const ContactMask& m) {
      std::filesystem::path p = out_dir / "masks" / name;
      std::ofstream mf = open_output(p);
      write_pgm(mf, m);
      out.files.push_back(p);
    };
    dump("vertical_0.pgm", set.vertical_masks.front());
    for (double sign : {1.0, -1.0})
      for (const TiltedMask& t : set.tilted_masks)
        if (t.angle_deg * sign > 0.0) {
          dump(sign > 0.0 ? "tilt_plus45_0.pgm" : "tilt_minus45_0.pgm",
               t.mask);
          break;
        }
  }
  return out;
}

// Counting benchmark over the three material presets, each with its
// detector characterization; truth is the number of sheets actually fed.
inline CommandOutput cmd_count_bench(const ScenarioConfig& sc,
                                     const std::filesystem::path& out_dir,
                                     bool trace = false) {
  sc.validate();
  const Material mats[] = {Material::PrintPaper, Material::CoatedPaper,
                           Material::PlasticSheet};
  detail::CsvRows rows;
  detail::CsvRows summary;
  std::vector<nlohmann::json> trace_lines;
  for (Material m : mats) {
    ScenarioConfig mc = sc;
    mc.set_material(m);
    mc.detector = detector_preset(m);
    // the preset detector fires spurious boxes; a single-hit track born past
    // the counting line would count at birth, so demand a confirming hit
    mc.tracker.min_hits = std::max(mc.tracker.min_hits, 2);
    struct SeedRow {
      int counted = 0;
      int truth = 0;
      std::vector<nlohmann::json> detections;
    };
    auto per_seed = detail::map_seeds(mc.seeds, [&](std::uint64_t seed) {
      FeedLog log = simulate_feed(mc, FeedPolicy::WithCA, seed);
      std::vector<EdgeDetection> stream =
          edge_event_stream(log, mc.detector, stream_seed(seed, 0x636e7462ull));
      std::map<int, std::vector<EdgeDetection>> by_frame;
      for (const EdgeDetection& d : stream) by_frame[d.frame_index].push_back(d);
      CounterState st =
          make_counter(0.5 * (mc.detector.enter_v + mc.detector.exit_v));
      for (int t = 0; t < log.total_ticks; ++t) {
        auto it = by_frame.find(t);
        std::span<const EdgeDetection> frame =
            it == by_frame.end() ? std::span<const EdgeDetection>{}
                                 : std::span<const EdgeDetection>(it->second);
        st = count_step(st, frame, mc.tracker, t);
      }
      SeedRow r;
      r.counted = st.count;
      r.truth = static_cast<int>(log.sheet_times.size());
      if (trace)
        for (const EdgeDetection& d : stream)
          r.detections.push_back({{"material", material_preset(m).name},
                                  {"seed", seed},
                                  {"frame", d.frame_index},
                                  {"u", d.center_u},
                                  {"v", d.center_v},
                                  {"confidence", d.confidence}});
      return r;
    });
    int exact = 0;
    for (std::size_t i = 0; i < per_seed.size(); ++i) {
      const SeedRow& r = per_seed[i];
      exact += r.counted == r.truth;
      rows.push_back({material_preset(m).name, format_number(mc.seeds[i]),
                      format_number(r.counted), format_number(r.truth),
                      r.counted == r.truth ? "1" : "0"});
      trace_lines.insert(trace_lines.end(),
                         std::make_move_iterator(r.detections.begin()),
                         std::make_move_iterator(r.detections.end()));
    }
    summary.push_back({material_preset(m).name,
                       format_number(mc.detector.recall),
                       format_number(static_cast<int>(mc.seeds.size())),
                       format_number(static_cast<double>(exact) /
                                     static_cast<double>(mc.seeds.size()))});
  }
  CommandOutput out;
  out.files.push_back(detail::write_csv(
      out_dir, "count_bench.csv", sc,
      {"material", "seed", "counted", "truth", "exact"}, rows));
  out.files.push_back(detail::write_csv(
      out_dir, "count_bench_summary.csv", sc,
      {"material", "recall", "seeds", "accuracy"}, summary));
  if (trace) {
    std::filesystem::path p = out_dir / "count_bench_detections.jsonl";
    std::ofstream f = open_output(p);
    JsonlWriter jsonl(f);
    for (const nlohmann::json& j : trace_lines) jsonl.write(j);
    out.files.push_back(p);
  }
  return out;
}

// Byte-compare every file a command wrote against the committed golden of
// the same relative name. Returns the number of mismatching files.
inline int check_against_goldens(const CommandOutput& out,
                                 const std::filesystem::path& out_dir,
                                 const std::filesystem::path& golden_dir,
                                 std::ostream& diag) {
  int bad = 0;
  for (const std::filesystem::path& f : out.files) {
    std::filesystem::path rel = f.lexically_relative(out_dir);
    std::filesystem::path golden = golden_dir / rel;
    if (!std::filesystem::exists(golden)) {
      diag << "check: no golden for " << rel.string() << '\n';
      ++bad;
      continue;
    }
    if (read_file(f) != read_file(golden)) {
      diag << "check: " << rel.string() << " differs from golden\n";
      ++bad;
    } else {
      diag << "check: " << rel.string() << " matches\n";
    }
  }
  return bad;
}

}  // namespace rotip
