#include "sfd/config.hpp"

#include <doctest.h>

#include "sfd/errors.hpp"

using namespace sfd;

TEST_CASE("a configuration document maps onto a run request") {
  ConfigDoc doc = parse_config_text(
      "# pendulum run\n"
      "system = \"pendulum3\"\n"
      "mode = \"soft-soft-stiff\"\n"
      "eps = 1e-2\n");
  RunSpec spec = resolve_run(doc);
  CHECK(spec.id == PresetId::pendulum3);
  CHECK(spec.mode == "soft-soft-stiff");
  CHECK(spec.overrides.size() == 1);
  CHECK(spec.overrides.at("eps") == 1e-2);

  MechanicalSystem sys = load_preset(spec.id, spec.mode, spec.overrides);
  CHECK(sys.eps == 1e-2);
}

TEST_CASE("an empty document resolves to defaults with no overrides") {
  RunSpec spec = resolve_run(parse_config_text(""));
  CHECK(spec.id == PresetId::linear_coupled);
  CHECK(spec.mode.empty());
  CHECK(spec.overrides.empty());
  CHECK(spec.options.jobs == 0);
  CHECK(spec.options.order == 0);
  CHECK(spec.options.seed == 42);
  CHECK_FALSE(spec.options.force);
}

TEST_CASE("a full parameter block round-trips into overrides") {
  ConfigDoc doc = parse_config_text(
      "system = \"pendulum3\"\n"
      "mode = \"soft-soft-stiff\"\n"
      "l = 6\nD = 6\nL = 1\nM = 1\nm = 1\n"
      "K_h = 600\nGamma_h = 0.5\nK_d = 2\n"
      "cd_over_wp_m = 0.33\nch_over_wp_m = 3\ncp_over_wp_m_l2 = 0.33\n"
      "g = 9.81\n");
  RunSpec spec = resolve_run(doc);
  CHECK(spec.overrides.size() == 12);
  CHECK(spec.overrides.at("K_h") == 600.0);
  CHECK(spec.overrides.at("Gamma_h") == 0.5);

  MechanicalSystem sys = load_preset(spec.id, spec.mode, spec.overrides);
  CHECK(sys.params.at("K_h") == 600.0);
}

TEST_CASE("generic option keys are consumed with type checks") {
  ConfigDoc doc = parse_config_text(
      "out = \"runs/demo\"\n"
      "jobs = 4\n"
      "order = 1\n"
      "seed = 7\n"
      "force = true\n");
  RunSpec spec = resolve_run(doc);
  CHECK(spec.options.out == "runs/demo");
  CHECK(spec.options.jobs == 4);
  CHECK(spec.options.order == 1);
  CHECK(spec.options.seed == 7);
  CHECK(spec.options.force);
  CHECK(spec.overrides.empty());
}

TEST_CASE("command keys are pulled aside before overrides") {
  ConfigDoc doc = parse_config_text(
      "system = \"linear-coupled\"\n"
      "snap_tol = 1e-4\n"
      "integrator = \"implicit\"\n"
      "eps = 0.05\n");
  RunSpec spec = resolve_run(doc, {"snap_tol", "integrator", "t_end"});
  CHECK(spec.extra_number("snap_tol", 1e-5) == 1e-4);
  CHECK(spec.extra_number("t_end", 12.0) == 12.0);
  CHECK(spec.extra_string("integrator", "explicit") == "implicit");
  CHECK(spec.overrides.size() == 1);
  CHECK(spec.overrides.at("eps") == 0.05);

  CHECK_THROWS_AS((void)spec.extra_string("snap_tol", ""), ConfigError);
}

TEST_CASE("comments, blank lines, and line endings are tolerated") {
  ConfigDoc doc = parse_config_text(
      "\xEF\xBB\xBF# leading comment\r\n"
      "\r\n"
      "  eps = 0.5   # trailing comment\r\n"
      "name = \"a # not a comment\"\n");
  CHECK(doc.at("eps").num == 0.5);
  CHECK(doc.at("eps").line == 3);
  CHECK(doc.at("name").str == "a # not a comment");
}

TEST_CASE("malformed documents report the offending line") {
  auto line_of = [](const std::string& text) {
    try {
      (void)parse_config_text(text);
    } catch (const ConfigError& e) {
      return e.line;
    }
    return -1;
  };
  CHECK(line_of("eps = 0.1\nnot a line\n") == 2);
  CHECK(line_of("eps = \n") == 1);
  CHECK(line_of("eps = 0.1x\n") == 1);
  CHECK(line_of("eps = \"open\n") == 1);
  CHECK(line_of("eps = \"a\" junk\n") == 1);
  CHECK(line_of("2eps = 0.1\n") == 1);
  CHECK(line_of("= 0.1\n") == 1);
  CHECK(line_of("eps = 0.1\neps = 0.2\n") == 2);
  CHECK(line_of("eps = inf\n") == 1);
  CHECK(line_of("eps = nan\n") == 1);
}

TEST_CASE("option values are validated when the run is resolved") {
  CHECK_THROWS_AS((void)resolve_run(parse_config_text("system = 3\n")), ConfigError);
  CHECK_THROWS_AS((void)resolve_run(parse_config_text("jobs = -1\n")), ConfigError);
  CHECK_THROWS_AS((void)resolve_run(parse_config_text("jobs = 1.5\n")), ConfigError);
  CHECK_THROWS_AS((void)resolve_run(parse_config_text("order = 2\n")), ConfigError);
  CHECK_THROWS_AS((void)resolve_run(parse_config_text("seed = -3\n")), ConfigError);
  CHECK_THROWS_AS((void)resolve_run(parse_config_text("force = 1\n")), ConfigError);
  CHECK_THROWS_AS((void)resolve_run(parse_config_text("K_h = \"high\"\n")), ConfigError);
  CHECK_THROWS_AS((void)resolve_run(parse_config_text("system = \"nope\"\n")), Error);

  try {
    (void)resolve_run(parse_config_text("# intro\njobs = 1.5\n"));
  } catch (const ConfigError& e) {
    CHECK(e.line == 2);
    CHECK(std::string(e.what()).find("jobs") != std::string::npos);
  }
}

TEST_CASE("unknown override names surface when the preset loads") {
  RunSpec spec = resolve_run(parse_config_text("system = \"fold-demo\"\nK_zz = 1\n"));
  CHECK(spec.overrides.count("K_zz") == 1);
  CHECK_THROWS_WITH_AS((void)load_preset(spec.id, spec.mode, spec.overrides),
                       "unknown parameter 'K_zz' for preset 'fold-demo'", Error);
}
