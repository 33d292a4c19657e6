#include <catch2/catch_amalgamated.hpp>

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "rotip/scenario.hpp"

using namespace rotip;

namespace {

// Self-cleaning directory for config fixtures; unique per instance so
// parallel test shards never collide.
struct TempDir {
  std::filesystem::path path;

  TempDir() {
    static std::atomic<int> counter{0};
    path = std::filesystem::temp_directory_path() /
           ("rotip_scenario_" + std::to_string(counter.fetch_add(1)));
    std::filesystem::remove_all(path);
    std::filesystem::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path, ec);
  }

  std::string file(const std::string& name, const std::string& text) const {
    std::filesystem::path p = path / name;
    std::ofstream out(p);
    out << text;
    return p.string();
  }
};

std::string load_error(const std::string& path) {
  try {
    load_scenario(path);
  } catch (const ConfigError& e) {
    return e.what();
  } catch (const InvalidScenario& e) {
    return e.what();
  }
  return {};
}

bool mentions(const std::string& msg, const std::string& needle) {
  return msg.find(needle) != std::string::npos;
}

}  // namespace

TEST_CASE("config files apply sections and later keys win") {
  TempDir dir;
  std::string p = dir.file("main.cfg",
                           "# demo scenario\n"
                           "[run]\n"
                           "name = bench\n"
                           "sheets = 20\n"
                           "target = 12\n"
                           "tilt_deg = 5\n"
                           "[noise]\n"
                           "mask_flip_rate = 0.1\n"
                           "mask_flip_rate = 0.2\n"
                           "; trailing comment\n"
                           "[gains]\n"
                           "ff_speed = 10\n");
  ScenarioConfig c = load_scenario(p);
  CHECK(c.name == "bench");
  CHECK(c.sheets == 20);
  CHECK(c.target == 12);
  CHECK(c.tilt_deg == 5.0);
  CHECK(c.mask_noise.flip_rate == 0.2);
  CHECK(c.gains.v_ff[2] == -10.0);
  CHECK(c.gains.v_ff[0] == 0.0);
}

TEST_CASE("includes splice files and resolve next to the including file") {
  TempDir dir;
  dir.file("noise.cfg",
           "[noise]\n"
           "mask_flip_rate = 0.05\n"
           "vision_sigma_deg = 3\n");
  std::string before = dir.file("before.cfg",
                                "include noise.cfg\n"
                                "[noise]\n"
                                "mask_flip_rate = 0.25\n");
  std::string after = dir.file("after.cfg",
                               "[noise]\n"
                               "mask_flip_rate = 0.25\n"
                               "include noise.cfg\n");
  CHECK(load_scenario(before).mask_noise.flip_rate == 0.25);
  CHECK(load_scenario(after).mask_noise.flip_rate == 0.05);
  CHECK(load_scenario(after).vision_sigma_deg == 3.0);

  std::filesystem::create_directories(dir.path / "sub");
  dir.file("sub/inner.cfg", "[run]\nname = nested\n");
  std::string outer = dir.file("outer.cfg", "include sub/inner.cfg\n");
  CHECK(load_scenario(outer).name == "nested");
}

TEST_CASE("include depth is bounded") {
  TempDir dir;
  std::string p = dir.file("loop.cfg", "include loop.cfg\n");
  CHECK_THROWS_AS(load_scenario(p), ConfigError);
  CHECK(mentions(load_error(p), "include depth exceeded"));
}

TEST_CASE("seed controls accept counts and explicit lists") {
  TempDir dir;
  ScenarioConfig n =
      load_scenario(dir.file("n.cfg", "[run]\nseeds = 3\n"));
  CHECK(n.seeds == std::vector<std::uint64_t>{1, 2, 3});

  ScenarioConfig list = load_scenario(
      dir.file("list.cfg", "[run]\nseed_list = 5, 9 ,13\n"));
  CHECK(list.seeds == std::vector<std::uint64_t>{5, 9, 13});

  CHECK_THROWS_AS(load_scenario(dir.file("z.cfg", "[run]\nseeds = 0\n")),
                  ConfigError);
  CHECK_THROWS_AS(
      load_scenario(dir.file("e.cfg", "[run]\nseed_list = ,\n")),
      ConfigError);
}

TEST_CASE("diagnostics carry the file name and line number") {
  TempDir dir;
  std::string bad_section = dir.file("a.cfg", "[run]\n[bogus]\nx = 1\n");
  CHECK(mentions(load_error(bad_section), "a.cfg:3"));
  CHECK(mentions(load_error(bad_section), "unknown section [bogus]"));

  std::string bad_key = dir.file("b.cfg", "[run]\nfrobnicate = 1\n");
  CHECK(mentions(load_error(bad_key), "b.cfg:2"));
  CHECK(mentions(load_error(bad_key), "unknown key 'frobnicate'"));

  std::string no_section = dir.file("c.cfg", "sheets = 3\n");
  CHECK(mentions(load_error(no_section), "c.cfg:1"));
  CHECK(mentions(load_error(no_section), "outside of any [section]"));

  std::string no_equals = dir.file("d.cfg", "[run]\nsheets\n");
  CHECK(mentions(load_error(no_equals), "d.cfg:2"));

  std::string open_header = dir.file("e.cfg", "[run\n");
  CHECK(mentions(load_error(open_header), "malformed section header"));

  std::string bad_number = dir.file("f.cfg", "[run]\nsheets = many\n");
  CHECK(mentions(load_error(bad_number), "expected an integer"));

  std::string bad_float =
      dir.file("g.cfg", "[noise]\nvision_sigma_deg = 1.2.3\n");
  CHECK(mentions(load_error(bad_float), "expected a number"));

  CHECK(mentions(load_error((dir.path / "missing.cfg").string()),
                 "cannot open config file"));
}

TEST_CASE("loaded configs must validate") {
  TempDir dir;
  CHECK_THROWS_AS(load_scenario(dir.file(
                      "n.cfg", "[noise]\nmask_flip_rate = 0.6\n")),
                  InvalidScenario);
  CHECK_THROWS_AS(load_scenario(dir.file(
                      "m.cfg", "[material]\nmu_s1 = 0.1\nmu_k2 = 0.4\n")),
                  InvalidScenario);
  CHECK_THROWS_AS(load_scenario(dir.file("s.cfg", "[run]\nsheets = 0\n")),
                  InvalidScenario);
}

TEST_CASE("material sections switch presets with per-key overrides") {
  TempDir dir;
  ScenarioConfig c = load_scenario(
      dir.file("m.cfg", "[material]\npreset = coated_paper\nthickness = 0.2\n"));
  MaterialPreset p = material_preset(Material::CoatedPaper);
  CHECK(c.material == Material::CoatedPaper);
  CHECK(c.sheet_h == 0.2);
  CHECK(c.sheet_e == p.e_mod);
  CHECK(c.mu_s1 == p.mu_s1);
  CHECK(c.mu_k2 == p.mu_k2);
  CHECK(mentions(load_error(dir.file("u.cfg", "[material]\npreset = mylar\n")),
                 "unknown material preset"));
}

TEST_CASE("set_material copies every preset field") {
  for (Material m : {Material::PrintPaper, Material::CoatedPaper,
                     Material::PlasticSheet}) {
    ScenarioConfig c;
    c.set_material(m);
    MaterialPreset p = material_preset(m);
    CHECK(c.sheet_h == p.h);
    CHECK(c.sheet_e == p.e_mod);
    CHECK(c.mu_s1 == p.mu_s1);
    CHECK(c.mu_k2 == p.mu_k2);
  }
}

TEST_CASE("detector presets differ only in recall") {
  DetectorParams print = detector_preset(Material::PrintPaper);
  DetectorParams coated = detector_preset(Material::CoatedPaper);
  DetectorParams plastic = detector_preset(Material::PlasticSheet);
  CHECK(print.recall == 0.919);
  CHECK(coated.recall == 0.878);
  CHECK(plastic.recall == 0.954);
  for (const DetectorParams& d : {print, coated, plastic}) {
    CHECK(d.burst_rate == 0.02);
    CHECK(d.burst_mean == 1.5);
    CHECK(d.false_rate == 0.002);
    CHECK(d.center_jitter_px == 2.0);
  }
}

TEST_CASE("the config hash tracks simulated fields") {
  ScenarioConfig a;
  ScenarioConfig b;
  CHECK(config_hash(a) == config_hash(b));

  b.gains.kp.setConstant(9.0);
  CHECK(config_hash(a) != config_hash(b));

  b = a;
  b.seeds = {1, 2};
  CHECK(config_hash(a) != config_hash(b));

  b = a;
  b.detector.recall = 0.5;
  CHECK(config_hash(a) != config_hash(b));

  TempDir dir;
  std::string p = dir.file("h.cfg", "[run]\nname = hashed\nseeds = 2\n");
  CHECK(config_hash(load_scenario(p)) == config_hash(load_scenario(p)));
}

TEST_CASE("serialization is deterministic and field-complete") {
  ScenarioConfig c;
  CHECK(serialize_scenario(c) == serialize_scenario(c));
  CHECK(mentions(serialize_scenario(c), "material=print_paper"));
  c.set_material(Material::PlasticSheet);
  CHECK(mentions(serialize_scenario(c), "material=plastic_sheet"));

  ScenarioConfig d;
  d.feed.sense_ticks += 1;
  CHECK(serialize_scenario(ScenarioConfig{}) != serialize_scenario(d));
}

TEST_CASE("noiseless copies zero every stochastic knob") {
  ScenarioConfig c;
  c.mask_noise.flip_rate = 0.3;
  c.vision_sigma_deg = 7.0;
  c.force_sigma_deg = 11.0;
  c.detector.recall = 0.9;
  c.detector.burst_rate = 0.05;
  c.detector.false_rate = 0.01;
  c.detector.center_jitter_px = 2.0;
  c.feed.length_jitter_rel = 0.08;
  c.feed.f0_sigma = 0.2;
  c.feed.misfeed_rate = 0.02;
  c.gains.kp.setConstant(3.0);

  ScenarioConfig n = c.noiseless_copy();
  CHECK(n.mask_noise.flip_rate == 0.0);
  CHECK(n.vision_sigma_deg == 0.0);
  CHECK(n.force_sigma_deg == 0.0);
  CHECK(n.detector.recall == 1.0);
  CHECK(n.detector.burst_rate == 0.0);
  CHECK(n.detector.false_rate == 0.0);
  CHECK(n.detector.center_jitter_px == 0.0);
  CHECK(n.feed.length_jitter_rel == 0.0);
  CHECK(n.feed.f0_sigma == 0.0);
  CHECK(n.feed.misfeed_rate == 0.0);
  CHECK(n.gains.kp[0] == 3.0);
  CHECK(n.sheets == c.sheets);
}

TEST_CASE("validate rejects inconsistent scenarios") {
  ScenarioConfig c;
  c.mu_k2 = c.mu_s1 + 0.1;
  CHECK_THROWS_AS(c.validate(), InvalidScenario);

  c = ScenarioConfig{};
  c.vision_sigma_deg = -1.0;
  CHECK_THROWS_AS(c.validate(), InvalidScenario);

  c = ScenarioConfig{};
  c.seeds.clear();
  CHECK_THROWS_AS(c.validate(), InvalidScenario);

  c = ScenarioConfig{};
  c.geometry.r = -1.0;
  try {
    c.validate();
    FAIL("expected InvalidScenario");
  } catch (const InvalidScenario& e) {
    CHECK(mentions(e.what(), "scenario 'default'"));
  }

  CHECK_NOTHROW(ScenarioConfig{}.validate());
}
