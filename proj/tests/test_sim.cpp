#include "doctest.h"

#include "ssampc/error.hpp"
#include "ssampc/sim.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

using namespace ssampc;

namespace {

ObstacleModel ball(double drag, const Eigen::Vector3d& g, const Eigen::Vector3d& p0, const Eigen::Vector3d& v0)
{
  ObstacleModel m;
  m.kind = ObstacleKind::drag_ball;
  m.drag = drag;
  m.gravity = g;
  m.state.resize(6);
  m.state << p0, v0;
  return m;
}

ObstacleModel disc(double speed, double pitch, double spin)
{
  ObstacleModel m;
  m.kind = ObstacleKind::frisbee;
  m.frisbee.mass = 0.08;
  m.radius = 0.15;
  m.state = Eigen::VectorXd::Zero(12);
  m.state(3) = speed;
  m.state(7) = pitch;
  m.state(11) = spin;
  return m;
}

// Exact permutation mean and variance of J over all distinct labelings.
std::pair<double, double> jt_permutation_moments(const std::vector<std::vector<double>>& groups)
{
  std::vector<double> pool;
  std::vector<int> labels;
  for (std::size_t g = 0; g < groups.size(); ++g) {
    for (double v : groups[g]) {
      pool.push_back(v);
      labels.push_back(static_cast<int>(g));
    }
  }
  std::sort(labels.begin(), labels.end());
  double sum = 0.0, sum2 = 0.0, count = 0.0;
  do {
    std::vector<std::vector<double>> perm(groups.size());
    for (std::size_t i = 0; i < pool.size(); ++i) perm[static_cast<std::size_t>(labels[i])].push_back(pool[i]);
    double j = 0.0;
    for (std::size_t a = 0; a < perm.size(); ++a) {
      for (std::size_t b = a + 1; b < perm.size(); ++b) {
        for (double x : perm[a]) {
          for (double y : perm[b]) j += y < x ? 1.0 : (y == x ? 0.5 : 0.0);
        }
      }
    }
    sum += j;
    sum2 += j * j;
    count += 1.0;
  } while (std::next_permutation(labels.begin(), labels.end()));
  const double mean = sum / count;
  return {mean, sum2 / count - mean * mean};
}

}  // namespace

TEST_CASE("constant velocity step is exact")
{
  ObstacleModel m;
  m.state << 1.0, -2.0, 3.0, 0.5, 0.25, -1.5;
  const ObstacleModel n = step_obstacle(m, 0.05);
  CHECK(n.position().isApprox(Eigen::Vector3d(1.025, -1.9875, 2.925), 1e-15));
  CHECK(n.velocity() == m.velocity());
  CHECK_THROWS_AS(step_obstacle(m, 0.0), ArgumentError);
}

TEST_CASE("drag ball against closed forms")
{
  const Eigen::Vector3d g(0.0, 0.0, -9.81);
  SUBCASE("drag-free vertical throw is a parabola")
  {
    ObstacleModel m = ball(0.0, g, Eigen::Vector3d(0.0, 0.0, 1.0), Eigen::Vector3d(0.0, 0.0, 6.0));
    for (int k = 1; k <= 40; ++k) {
      m = step_obstacle(m, 0.05);
      const double t = 0.05 * k;
      CHECK(std::abs(m.position().z() - (1.0 + 6.0 * t - 0.5 * 9.81 * t * t)) < 1e-8);
      CHECK(std::abs(m.velocity().z() - (6.0 - 9.81 * t)) < 1e-8);
    }
  }
  SUBCASE("linear drag approaches terminal velocity")
  {
    const double c = 1.8;
    const Eigen::Vector3d p0(2.0, -1.0, 4.0), v0(3.0, 1.0, 5.0);
    ObstacleModel m = ball(c, g, p0, v0);
    const Eigen::Vector3d v_term = g / c;
    for (int k = 1; k <= 200; ++k) {
      m = step_obstacle(m, 0.05);
      const double t = 0.05 * k;
      const double decay = std::exp(-c * t);
      const Eigen::Vector3d v = v_term + (v0 - v_term) * decay;
      const Eigen::Vector3d p = p0 + v_term * t + (v0 - v_term) * (1.0 - decay) / c;
      CHECK((m.velocity() - v).norm() < 1e-6);
      CHECK((m.position() - p).norm() < 1e-6);
    }
    CHECK((m.velocity() - v_term).norm() < 1e-3);
  }
  SUBCASE("speed never grows without gravity")
  {
    ObstacleModel m = ball(0.7, Eigen::Vector3d::Zero(), Eigen::Vector3d::Zero(), Eigen::Vector3d(4.0, -2.0, 3.0));
    double speed = m.velocity().norm();
    for (int k = 0; k < 200; ++k) {
      m = step_obstacle(m, 0.05);
      CHECK(m.velocity().norm() <= speed);
      speed = m.velocity().norm();
    }
  }
}

TEST_CASE("frisbee model structure")
{
  const FrisbeeParams p;
  const Eigen::Vector3d g(0.0, 0.0, -9.81);

  SUBCASE("state size is enforced")
  {
    ObstacleModel m;
    m.kind = ObstacleKind::frisbee;
    CHECK_THROWS_AS(m.validate(), DimensionError);
    m.state = Eigen::VectorXd::Zero(12);
    CHECK_NOTHROW(m.validate());
    m.radius = 0.0;
    CHECK_THROWS_AS(m.validate(), ArgumentError);
  }
  SUBCASE("at rest only gravity acts")
  {
    const Eigen::VectorXd d = frisbee_derivative(Eigen::VectorXd::Zero(12), p, g);
    CHECK(d.segment<3>(3).isApprox(g));
    CHECK(d.segment<3>(6).isZero());
    CHECK(d.segment<3>(9).isZero());
  }
  SUBCASE("kinematic rows")
  {
    Eigen::VectorXd s(12);
    s << 1, 2, 3, 5.0, 0.5, -0.3, 0.1, -0.2, 0.7, 0.4, -0.6, 45.0;
    const Eigen::VectorXd d = frisbee_derivative(s, p, g);
    CHECK(d.head<3>().isApprox(s.segment<3>(3)));
    CHECK(d(6) == doctest::Approx(0.4 / std::cos(-0.2)).epsilon(1e-14));
    CHECK(d(7) == doctest::Approx(-0.6).epsilon(1e-14));
    CHECK(d(8) == doctest::Approx(45.0 - 0.4 * std::tan(-0.2)).epsilon(1e-14));
  }
  SUBCASE("level disc in level flight gets lift and drag only")
  {
    Eigen::VectorXd s = Eigen::VectorXd::Zero(12);
    s(3) = 6.0;
    const Eigen::VectorXd d = frisbee_derivative(s, p, Eigen::Vector3d::Zero());
    const double qs = 0.5 * p.rho * p.area * 36.0;
    const double cd = p.cd0 + p.cda * p.alpha0 * p.alpha0;
    CHECK(d(3) == doctest::Approx(-qs * cd / p.mass).epsilon(1e-12));
    CHECK(d(4) == doctest::Approx(0.0));
    CHECK(d(5) == doctest::Approx(qs * p.cl0 / p.mass).epsilon(1e-12));
  }
  SUBCASE("flight is smooth and curved")
  {
    ObstacleModel m = disc(6.2, 0.1, 50.0);
    std::vector<Eigen::Vector3d> path{m.position()};
    for (int k = 0; k < 120; ++k) {
      m = step_obstacle(m, 0.05);
      REQUIRE(m.state.allFinite());
      path.push_back(m.position());
    }
    double max_jerk = 0.0;
    for (std::size_t k = 1; k + 1 < path.size(); ++k) {
      max_jerk = std::max(max_jerk, (path[k + 1] - 2.0 * path[k] + path[k - 1]).norm());
    }
    // Second differences of a 6 m/s flight sampled at 20 Hz.
    CHECK(max_jerk < 0.05);
    CHECK(std::abs(path.back().y()) > 0.3);  // gyroscopic turn away from the launch line
    CHECK(path.back().z() < 0.0);
    const double speed = m.velocity().norm();
    CHECK(speed > 4.0);
    CHECK(speed < 9.0);
  }
}

TEST_CASE("measurement noise")
{
  std::mt19937_64 rng(7);
  const Eigen::Vector3d c(1.0, 2.0, 3.0);
  const double h = 0.125;
  const int n = 100000;
  Eigen::Vector3d sum = Eigen::Vector3d::Zero();
  for (int i = 0; i < n; ++i) {
    const Eigen::Vector3d m = measure(c, h, rng);
    CHECK_FALSE(((m - c).cwiseAbs().array() > h).any());
    sum += m - c;
  }
  const double sigma_mean = h / std::sqrt(3.0) / std::sqrt(static_cast<double>(n));
  CHECK((sum / n).cwiseAbs().maxCoeff() < 4.0 * sigma_mean);

  std::mt19937_64 a(11), b(11);
  for (int i = 0; i < 10; ++i) CHECK(measure(c, h, a) == measure(c, h, b));
  CHECK(measure(c, 0.0, a) == c);
  CHECK_THROWS_AS(measure(c, -1.0, a), ArgumentError);
}

TEST_CASE("figure-8 velocity is the derivative of position")
{
  const Figure8 f;
  for (double t : {0.0, 1.3, 4.9, 12.25}) {
    const double h = 1e-5;
    const Eigen::Vector3d fd = (f.position(t + h) - f.position(t - h)) / (2.0 * h);
    CHECK((fd - f.velocity(t)).norm() < 1e-8);
    CHECK(f.position(t).z() == f.altitude);
  }
}

TEST_CASE("scenario presets and validation")
{
  for (const char* name : {"case1", "case2", "case3"}) {
    const Scenario s = builtin_scenario(name);
    CHECK_NOTHROW(s.validate());
    CHECK(s.dt() == doctest::Approx(0.05));
  }
  CHECK_THROWS_AS(builtin_scenario("case4"), ConfigError);
  Scenario s = builtin_scenario("case1");
  s.rate_hz = 0.0;
  CHECK_THROWS_AS(s.validate(), ConfigError);
  s = builtin_scenario("case1");
  s.obstacle.speed_max = 0.1;
  CHECK_THROWS_AS(s.validate(), ConfigError);
  s = builtin_scenario("case1");
  s.planner.epsilon = 0.0;
  CHECK_THROWS_AS(s.validate(), ConfigError);

  CHECK(run_seed(1, 0) == run_seed(1, 0));
  CHECK(run_seed(1, 0) != run_seed(1, 1));
  CHECK(run_seed(1, 0) != run_seed(2, 0));
}

TEST_CASE("encounters cross the blind path at the sampled time")
{
  for (const char* name : {"case1", "case2", "case3"}) {
    const Scenario s = builtin_scenario(name);
    const auto blind = blind_track(s, 10.0);
    for (int run = 0; run < 3; ++run) {
      const EncounterLayout e = sample_encounter(s, run_seed(s.seed, run), blind);
      const double speed = e.obstacle.velocity().norm();
      CHECK(speed >= s.obstacle.speed_min);
      CHECK(speed <= s.obstacle.speed_max + 1e-12);
      const double tau = e.crossing_time - s.t_intro;
      const double t_first = s.t_intro + (s.bootstrap.n_train - 1) * s.dt();
      CHECK(e.crossing_time >= t_first + s.cross_delay_min);
      CHECK(e.crossing_time <= t_first + s.cross_delay_max);
      ObstacleModel m = e.obstacle;
      if (m.kind == ObstacleKind::frisbee) {
        const int steps = static_cast<int>(std::llround(tau / s.dt())) * s.substeps;
        for (int k = 0; k < steps; ++k) m = step_obstacle(m, s.dt() / s.substeps);
        CHECK((m.position() - e.aim).norm() < 1e-9);
      } else {
        m = step_obstacle(m, tau);
        CHECK((m.position() - e.aim).norm() < 1e-6);
      }
    }
  }
}

TEST_CASE("episodes")
{
  Scenario s = builtin_scenario("case1");

  SUBCASE("blind tracking hits the obstacle")
  {
    s.planner_enabled = false;
    s.substeps = 10;
    for (int run = 0; run < 2; ++run) {
      const EpisodeResult r = run_episode(s, run);
      CHECK(r.n_constrained == 0);
      CHECK(r.d_min < 0.05);
      CHECK(r.collided);
    }
  }
  SUBCASE("risk-aware planning avoids the crossing obstacle")
  {
    s.planner.epsilon = 0.05;
    for (int run = 0; run < 3; ++run) {
      const EpisodeResult r = run_episode(s, run);
      CHECK(r.n_constrained > 0);
      CHECK_FALSE(r.failed);
      CHECK(r.d_min >= s.obstacle.radius + s.planner.r_p);
      CHECK_FALSE(r.collided);
    }
  }
  SUBCASE("repeat runs are identical")
  {
    EpisodeOptions opt;
    opt.record_trajectory = true;
    const EpisodeResult a = run_episode(s, 4, opt);
    const EpisodeResult b = run_episode(s, 4, opt);
    REQUIRE(a.trajectory.size() == b.trajectory.size());
    CHECK(a.d_min == b.d_min);
    for (std::size_t i = 0; i < a.trajectory.size(); ++i) {
      CHECK(a.trajectory[i].agent == b.trajectory[i].agent);
      CHECK(a.trajectory[i].measured == b.trajectory[i].measured);
      CHECK(a.trajectory[i].feasible == b.trajectory[i].feasible);
    }
  }
}

TEST_CASE("monte carlo aggregation")
{
  const Scenario s = builtin_scenario("case2");
  const MonteCarloReport one = monte_carlo(s, 2, {0.5, 1.0}, 1);
  const MonteCarloReport two = monte_carlo(s, 2, {0.5, 1.0}, 2);
  REQUIRE(one.rows.size() == 2);
  for (std::size_t e = 0; e < 2; ++e) {
    const MonteCarloRow& row = one.rows[e];
    CHECK(row.runs == 2);
    CHECK(row.seeds == one.rows[0].seeds);
    CHECK(row.d_min == two.rows[e].d_min);
    CHECK(row.pct_feasible >= 0.0);
    CHECK(row.pct_feasible <= 100.0);
    const double mean = (row.d_min[0] + row.d_min[1]) / 2.0;
    CHECK(row.mean_dmin == doctest::Approx(mean));
    CHECK(row.std_dmin == doctest::Approx(std::abs(row.d_min[0] - row.d_min[1]) / std::sqrt(2.0)));
    int coll = 0;
    for (const auto& ep : one.episodes[e]) coll += ep.collided ? 1 : 0;
    CHECK(row.collisions == coll);
  }
  CHECK_THROWS_AS(monte_carlo(s, 2, {0.0}), ArgumentError);
  CHECK_THROWS_AS(monte_carlo(s, 0, {0.5}), ArgumentError);
}

TEST_CASE("decreasing trend test")
{
  SUBCASE("hand-computed small case")
  {
    const TrendTest t = decreasing_trend_test({{1.0, 2.0}, {3.0}});
    CHECK(t.statistic == 0.0);
    CHECK(t.mean == doctest::Approx(1.0));
    CHECK(t.variance == doctest::Approx(48.0 / 72.0));
    CHECK(t.z == doctest::Approx(-1.0 / std::sqrt(48.0 / 72.0)));
    CHECK(t.p_value == doctest::Approx(0.5 * std::erfc(t.z / std::sqrt(2.0))));
  }
  SUBCASE("moments match the exact permutation distribution, with ties")
  {
    const std::vector<std::vector<double>> groups = {{3.0, 2.0, 2.0}, {2.0, 1.0}, {1.0, 0.5}};
    const auto [mean, var] = jt_permutation_moments(groups);
    const TrendTest t = decreasing_trend_test(groups);
    CHECK(t.mean == doctest::Approx(mean).epsilon(1e-12));
    CHECK(t.variance == doctest::Approx(var).epsilon(1e-9));
    CHECK(t.statistic == doctest::Approx(14.5));
  }
  SUBCASE("direction")
  {
    std::vector<std::vector<double>> dec(4), inc(4);
    for (int g = 0; g < 4; ++g) {
      for (int i = 0; i < 10; ++i) {
        dec[static_cast<std::size_t>(g)].push_back(10.0 - g + 0.01 * i);
        inc[static_cast<std::size_t>(g)].push_back(g + 0.01 * i);
      }
    }
    CHECK(decreasing_trend_test(dec).p_value < 1e-6);
    CHECK(decreasing_trend_test(inc).p_value > 0.999);
  }
}
