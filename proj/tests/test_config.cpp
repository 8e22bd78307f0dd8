#include "doctest.h"

#include "ssampc/config.hpp"
#include "ssampc/error.hpp"

#include <sstream>

using namespace ssampc;

namespace {

Scenario parse(const std::string& text)
{
  std::istringstream in(text);
  return parse_scenario(in);
}

}  // namespace

TEST_CASE("scenario files")
{
  SUBCASE("case preset and overrides")
  {
    const Scenario s = parse(
      "# comment\n"
      "[scenario]\n"
      "case = \"case2\"\n"
      "seed = 42\n"
      "cross_delay = [0.5, 1.5]  # trailing comment\n"
      "[planner]\n"
      "epsilon = 0.25\n"
      "q = [1, 2, 3, 4]\n"
      "[noise]\n"
      "half_width = 0.1\n");
    CHECK(s.obstacle.kind == ObstacleKind::drag_ball);
    CHECK(s.obstacle.drag == doctest::Approx(1.8));
    CHECK(s.seed == 42);
    CHECK(s.cross_delay_min == 0.5);
    CHECK(s.cross_delay_max == 1.5);
    CHECK(s.planner.epsilon == 0.25);
    CHECK(s.planner.Q.diagonal() == Eigen::Vector4d(1, 2, 3, 4));
    CHECK(s.noise_half_width == 0.1);
  }
  SUBCASE("every published parameter is representable")
  {
    const Scenario s = parse(
      "[bootstrap]\nwindow = 24\nn_train = 100\nn_step = 5\ndelta_t = 20\nn_sigma = 8\nn_strap = 40\n"
      "[planner]\nn_h = 10\nepsilon = 0.05\nchi = 50\ntau = 0.25\nscp_iters = 4\n"
      "[scenario]\nrate_hz = 20\n[noise]\nhalf_width = 0.125\n"
      "[obstacle]\nspeed = [0.41, 8.43]\nradius = 0.3\n");
    CHECK(s.bootstrap.window == 24);
    CHECK(s.bootstrap.n_strap == 40);
    CHECK(s.planner.chi == 50.0);
    CHECK(s.obstacle.speed_max == 8.43);
  }
  SUBCASE("unknown keys and bad values are rejected")
  {
    CHECK_THROWS_AS(parse("[planner]\nepsilom = 0.1\n"), ConfigError);
    CHECK_THROWS_AS(parse("[plan]\nepsilon = 0.1\n"), ConfigError);
    CHECK_THROWS_AS(parse("[planner]\nepsilon = abc\n"), ConfigError);
    CHECK_THROWS_AS(parse("[planner]\nepsilon = 0\n"), ConfigError);
    CHECK_THROWS_AS(parse("[planner]\nn_h = 2.5\n"), ConfigError);
    CHECK_THROWS_AS(parse("[obstacle]\nspeed = [1, 2, 3]\n"), ConfigError);
    CHECK_THROWS_AS(parse("[obstacle]\nkind = \"rocket\"\n"), ConfigError);
    CHECK_THROWS_AS(parse("[scenario]\ncase = \"case9\"\n"), ConfigError);
    CHECK_THROWS_AS(parse("[planner]\nepsilon = 0.1\nepsilon = 0.2\n"), ConfigError);
    CHECK_THROWS_AS(load_scenario("/nonexistent/file.toml"), ConfigError);
  }
  SUBCASE("round trip")
  {
    Scenario s = builtin_scenario("case3");
    s.seed = 99;
    s.planner.epsilon = 0.5;
    s.obstacle.frisbee.cm0 = -0.0123456789;
    const Scenario t = parse(scenario_to_text(s));
    CHECK(scenario_to_text(t) == scenario_to_text(s));
    CHECK(t.obstacle.frisbee.cm0 == s.obstacle.frisbee.cm0);
    CHECK(t.seed == 99);
  }
}

TEST_CASE("command-line overrides")
{
  Scenario s = builtin_scenario("case1");
  apply_override(s, "planner.epsilon=0.5");
  apply_override(s, "obstacle.speed = [1, 2]");
  apply_override(s, "planner.n_h=12");
  CHECK(s.planner.epsilon == 0.5);
  CHECK(s.obstacle.speed_min == 1.0);
  CHECK(s.planner.n_h == 12);
  CHECK(s.bootstrap.n_h == 12);
  CHECK_THROWS_AS(apply_override(s, "epsilon=0.5"), ConfigError);
  CHECK_THROWS_AS(apply_override(s, "planner.epsilon"), ConfigError);
  CHECK_THROWS_AS(apply_override(s, "planner.unknown=1"), ConfigError);
  CHECK_THROWS_AS(apply_override(s, "scenario.case=case2"), ConfigError);
}

TEST_CASE("bundled scenario files load")
{
  for (const char* name : {"case1", "case2", "case3"}) {
    const Scenario s = load_scenario(std::string(SSAMPC_SCENARIO_DIR) + "/" + name + ".toml");
    const Scenario b = builtin_scenario(name);
    CHECK(s.name == name);
    CHECK(scenario_to_text(s) == scenario_to_text(b));
  }
}
