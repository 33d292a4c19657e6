#include <cstdint>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "rotip/commands.hpp"

#ifndef ROTIP_GOLDEN_DIR
#define ROTIP_GOLDEN_DIR "goldens"
#endif

namespace {

struct CommonOpts {
  std::string config;
  int seeds_n = 0;
  std::vector<std::uint64_t> seed_list;
  std::string out_dir = "out";
  std::string golden_dir = ROTIP_GOLDEN_DIR;
  bool check = false;
};

void add_common(CLI::App* sub, CommonOpts& o) {
  sub->add_option("--config", o.config, "scenario config file");
  CLI::Option* n =
      sub->add_option("--seeds", o.seeds_n, "run seeds 1..N")
          ->check(CLI::PositiveNumber);
  CLI::Option* list =
      sub->add_option("--seed-list", o.seed_list, "explicit seed values")
          ->delimiter(',');
  n->excludes(list);
  list->excludes(n);
  sub->add_option("--out", o.out_dir, "output directory");
  sub->add_flag("--check", o.check,
                "byte-compare outputs against committed goldens");
  sub->add_option("--golden-dir", o.golden_dir,
                  "golden directory used by --check");
}

rotip::ScenarioConfig make_config(const CommonOpts& o) {
  rotip::ScenarioConfig sc;
  if (!o.config.empty()) sc = rotip::load_scenario(o.config);
  if (o.seeds_n > 0) {
    sc.seeds.clear();
    for (int i = 1; i <= o.seeds_n; ++i)
      sc.seeds.push_back(static_cast<std::uint64_t>(i));
  }
  if (!o.seed_list.empty()) sc.seeds = o.seed_list;
  return sc;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"deterministic bench harness for the rotary-tip feeding stack"};
  app.require_subcommand(1);
  CommonOpts opts;

  CLI::App* est = app.add_subcommand(
      "estimate-plane", "tilt sweep of the plane estimators, -45..45 deg");
  add_common(est, opts);

  CLI::App* contact = app.add_subcommand(
      "contact-trials", "two-finger touchdown batches per guidance method");
  add_common(contact, opts);
  std::vector<std::string> method_names;
  contact->add_option("--methods", method_names, "guidance methods to run")
      ->delimiter(',')
      ->check(CLI::IsMember({"vision", "vision_force_wa", "vision_force",
                             "vision_force_tactile"}));
  int trials = 100;
  contact->add_option("--trials", trials, "trials per batch")
      ->check(CLI::PositiveNumber);

  CLI::App* feed = app.add_subcommand(
      "feed", "multi-sheet feeding with/without continuous adjustment");
  add_common(feed, opts);
  std::string policy = "both";
  feed->add_option("--policy", policy, "feeding policy")
      ->check(CLI::IsMember({"with_ca", "without_ca", "both"}));

  CLI::App* grasp = app.add_subcommand(
      "grasp-bench", "grasp a target count with counting on/off");
  add_common(grasp, opts);
  std::string counting = "both";
  grasp->add_option("--counting", counting, "counting mode")
      ->check(CLI::IsMember({"on", "off", "both"}));

  CLI::App* force = app.add_subcommand(
      "force-analysis", "squeeze-force table for the four grasp locations");
  add_common(force, opts);

  CLI::App* cal = app.add_subcommand(
      "calibrate", "synthetic offset-calibration round trip");
  add_common(cal, opts);
  bool dump_masks = false;
  cal->add_flag("--dump-masks", dump_masks,
                "also write sample press masks as PGM");

  CLI::App* count = app.add_subcommand(
      "count-bench", "counting accuracy across the material presets");
  add_common(count, opts);
  bool trace = false;
  count->add_flag("--trace", trace,
                  "also write the raw detection stream as JSONL");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int r = app.exit(e);
    return r == 0 ? 0 : 2;
  }

  try {
    rotip::ScenarioConfig sc = make_config(opts);
    std::filesystem::path out_dir = opts.out_dir;
    rotip::CommandOutput out;
    if (est->parsed()) {
      out = rotip::cmd_estimate_plane(sc, out_dir);
    } else if (contact->parsed()) {
      std::vector<rotip::ContactMethod> methods;
      for (const std::string& s : method_names)
        methods.push_back(*rotip::parse_contact_method(s));
      if (methods.empty())
        methods = {rotip::ContactMethod::Vision,
                   rotip::ContactMethod::VisionForceWA,
                   rotip::ContactMethod::VisionForce,
                   rotip::ContactMethod::VisionForceTactile};
      out = rotip::cmd_contact_trials(sc, methods, trials, out_dir);
    } else if (feed->parsed()) {
      std::vector<rotip::FeedPolicy> policies;
      if (policy != "without_ca") policies.push_back(rotip::FeedPolicy::WithCA);
      if (policy != "with_ca")
        policies.push_back(rotip::FeedPolicy::WithoutCA);
      out = rotip::cmd_feed(sc, policies, out_dir);
    } else if (grasp->parsed()) {
      std::vector<bool> modes;
      if (counting != "off") modes.push_back(true);
      if (counting != "on") modes.push_back(false);
      bool buf[2];
      for (std::size_t i = 0; i < modes.size(); ++i) buf[i] = modes[i];
      out = rotip::cmd_grasp_bench(
          sc, std::span<const bool>(buf, modes.size()), out_dir);
    } else if (force->parsed()) {
      out = rotip::cmd_force_analysis(sc, out_dir);
    } else if (cal->parsed()) {
      out = rotip::cmd_calibrate(sc, out_dir, dump_masks);
    } else if (count->parsed()) {
      out = rotip::cmd_count_bench(sc, out_dir, trace);
    }
    for (const std::filesystem::path& f : out.files)
      std::cout << "wrote " << f.string() << '\n';
    if (opts.check) {
      int bad =
          rotip::check_against_goldens(out, out_dir, opts.golden_dir, std::cerr);
      if (bad > 0) return 4;
    }
    return 0;
  } catch (const rotip::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const rotip::InvalidScenario& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const rotip::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 3;
  }
}
