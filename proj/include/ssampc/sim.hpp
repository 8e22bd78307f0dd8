#pragma once

// Closed-loop simulation: obstacle models, noisy measurements, single
// episodes and the Monte-Carlo harness.

#include "ssampc/bootstrap.hpp"
#include "ssampc/planner.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <random>
#include <string>
#include <vector>

namespace ssampc {

enum class ObstacleKind { constant_velocity, drag_ball, frisbee };

std::string to_string(ObstacleKind kind);
ObstacleKind obstacle_kind_from_string(const std::string& name);

/// Flat-disc aerodynamics. Lift and drag act along the airflow frame, the
/// moments about the in-plane velocity axis (roll), the side axis (pitch) and
/// the disc normal (spin).
struct FrisbeeParams
{
  double mass = 0.175;      // kg
  double diameter = 0.269;  // m
  double area = 0.057;      // m^2
  double rho = 1.23;        // kg/m^3
  double ixy = 0.001219;    // kg m^2
  double iz = 0.002352;     // kg m^2
  double cl0 = 0.33;
  double cla = 1.91;
  double cd0 = 0.18;
  double cda = 0.69;
  double alpha0 = -0.0698;  // rad, minimum-drag angle of attack
  double cm0 = -0.01;
  double cma = 0.1;
  double cmq = -0.005;
  double crr = 0.0003;
  double crp = -0.0125;
  double cnr = -0.0000034;
};

/// State layout:
///   constant_velocity, drag_ball: [position, velocity]
///   frisbee: [position, velocity, roll, pitch, spin angle, p, q, r]
/// where (p, q, r) are angular rates in the non-spinning disc frame.
struct ObstacleModel
{
  ObstacleKind kind = ObstacleKind::constant_velocity;
  Eigen::VectorXd state = Eigen::VectorXd::Zero(6);
  double radius = 0.3;
  double drag = 0.0;  // linear drag rate c, 1/s
  Eigen::Vector3d gravity = Eigen::Vector3d(0.0, 0.0, -9.81);
  FrisbeeParams frisbee;

  Eigen::Vector3d position() const { return state.head<3>(); }
  Eigen::Vector3d velocity() const { return state.segment<3>(3); }
  static int state_size(ObstacleKind kind) { return kind == ObstacleKind::frisbee ? 12 : 6; }
  void validate() const;
};

/// Advances the obstacle by dt. Constant velocity is exact; the other kinds
/// use RK4 with substeps of at most 2.5 ms.
ObstacleModel step_obstacle(const ObstacleModel& model, double dt);

/// Time derivative of the frisbee state (exposed for tests).
Eigen::VectorXd frisbee_derivative(const Eigen::VectorXd& state, const FrisbeeParams& p,
                                   const Eigen::Vector3d& gravity);

/// Adds independent Uniform(-h, h) noise per axis.
Eigen::Vector3d measure(const Eigen::Vector3d& true_center, double half_width, std::mt19937_64& rng);

/// Lemniscate-style figure-8 at constant altitude:
///   x = a sin(w t), y = b sin(w t) cos(w t), w = 2 pi / period.
struct Figure8
{
  double a = 6.0;
  double b = 4.0;
  double period = 20.0;
  double altitude = 5.0;
  double yaw = 0.0;
  Eigen::Vector3d center = Eigen::Vector3d::Zero();

  Eigen::Vector3d position(double t) const;
  Eigen::Vector3d velocity(double t) const;
  Eigen::Vector4d output(double t) const;  // x, y, z, yaw
};

struct ObstacleSpec
{
  ObstacleKind kind = ObstacleKind::constant_velocity;
  double speed_min = 0.41;
  double speed_max = 8.43;
  double radius = 0.3;
  double radius_factor = 1.1;    // r_hat = radius_factor * radius
  double heading_min_deg = 60.0; // horizontal angle to the reference velocity
  double heading_max_deg = 120.0;
  double elevation_min_deg = -10.0;
  double elevation_max_deg = 10.0;
  double drag = 0.0;
  Eigen::Vector3d gravity = Eigen::Vector3d::Zero();
  FrisbeeParams frisbee;
  double spin_min = 40.0;  // rad/s
  double spin_max = 60.0;
  double roll_max_deg = 8.0;
  double pitch_max_deg = 6.0;
};

struct Scenario
{
  std::string name = "case1";
  std::uint64_t seed = 1;
  double rate_hz = 20.0;       // planner and measurement rate
  double gravity = 9.81;
  double gain_error = 0.0;     // agent input gain mismatch, 0 = same model as the planner
  double t_intro = 1.0;        // s, obstacle appears
  double cross_delay_min = 1.0;  // s after the first forecast
  double cross_delay_max = 2.0;
  double end_margin = 2.0;     // s after the nominal crossing
  double exit_radius = 30.0;   // m, encounter ends once the obstacle is this far and receding
  double min_early_separation = 2.0;  // m, reject layouts that meet before forecasting starts
  int substeps = 1;            // distance checks per control period
  bool planner_enabled = true;
  double noise_half_width = 0.125;
  Figure8 reference;
  ObstacleSpec obstacle;
  PlannerConfig planner;
  BootstrapParams bootstrap;

  double dt() const { return 1.0 / rate_hz; }
  void validate() const;
};

/// Planner settings used by the bundled scenarios.
PlannerConfig default_planner_config(double gravity = 9.81);

/// Built-in experiment cases: "case1" (constant velocity sphere), "case2"
/// (ball with drag), "case3" (frisbee). Throws ConfigError otherwise.
Scenario builtin_scenario(const std::string& name);

struct TrajectoryRow
{
  double time = 0.0;
  Eigen::Vector3d agent = Eigen::Vector3d::Zero();
  Eigen::Vector3d obstacle = Eigen::Vector3d::Zero();
  Eigen::Vector3d measured = Eigen::Vector3d::Zero();
  double distance = 0.0;
  bool obstacle_active = false;
  bool constrained = false;
  bool feasible = true;
};

struct EpisodeResult
{
  std::uint64_t seed = 0;
  int run_index = 0;
  double epsilon = 0.0;
  double d_min = 0.0;
  bool collided = false;
  int n_plans = 0;
  int n_constrained = 0;  // invocations with obstacle rows
  int n_infeasible = 0;   // among the constrained ones
  bool failed = false;    // planner threw; see diagnostic
  std::string diagnostic;
  double mean_plan_time = 0.0;          // s, over constrained invocations
  double mean_plan_time_all = 0.0;      // s, over all invocations
  double max_kkt_stationarity = 0.0;    // over optimal constrained subproblems
  double max_kkt_primal = 0.0;
  double obstacle_speed = 0.0;          // at introduction
  double crossing_time = 0.0;
  std::vector<TrajectoryRow> trajectory;             // filled when requested
  std::vector<ForecastEnsemble> forecasts;           // filled when requested

  bool feasible_throughout() const { return !failed && n_infeasible == 0; }
};

/// Obstacle initial condition and crossing time for one run.
struct EncounterLayout
{
  ObstacleModel obstacle;
  double crossing_time = 0.0;
  Eigen::Vector3d aim = Eigen::Vector3d::Zero();
  int attempts = 0;
};

/// Path of the agent tracking the reference with no obstacle, one row per
/// control period (positions).
std::vector<Eigen::Vector3d> blind_track(const Scenario& s, double duration);

EncounterLayout sample_encounter(const Scenario& s, std::uint64_t run_seed,
                                 const std::vector<Eigen::Vector3d>& blind_path);

/// Deterministic per-run seed.
std::uint64_t run_seed(std::uint64_t template_seed, int run_index);

struct EpisodeOptions
{
  bool record_trajectory = false;
  bool record_forecasts = false;
};

/// Precomputed obstacle side of an episode; independent of the agent and of
/// epsilon, so it can be shared across risk levels.
struct ObstacleTrack
{
  EncounterLayout layout;
  int first_step = 0;  // control period of introduction
  int last_step = 0;   // exclusive
  std::vector<Eigen::Vector3d> truth;           // substep resolution from first_step
  std::vector<Eigen::Vector3d> measured;        // one per control period from first_step
  std::vector<ForecastEnsemble> forecasts;      // one per control period from first_step, may be empty
};

ObstacleTrack prepare_obstacle(const Scenario& s, int run_index,
                               const std::vector<Eigen::Vector3d>& blind_path);

EpisodeResult run_episode(const Scenario& s, int run_index = 0, const EpisodeOptions& opt = {});
EpisodeResult run_episode(const Scenario& s, int run_index, const ObstacleTrack& track,
                          const EpisodeOptions& opt = {});

struct MonteCarloRow
{
  std::string scenario;
  double epsilon = 0.0;
  int runs = 0;
  double pct_feasible = 0.0;       // per constrained planner invocation
  double pct_feasible_runs = 0.0;  // runs feasible throughout the encounter
  double pct_success = 0.0;        // collision-free among feasible runs; NaN if none
  double mean_dmin = 0.0;
  double std_dmin = 0.0;
  int collisions = 0;
  int failed = 0;
  double mean_plan_time = 0.0;
  std::vector<double> d_min;       // per run, in run order
  std::vector<std::uint64_t> seeds;
};

struct MonteCarloReport
{
  std::vector<MonteCarloRow> rows;  // one per epsilon, in input order
  std::vector<std::vector<EpisodeResult>> episodes;
};

/// Runs n_runs episodes per epsilon with shared obstacle tracks; `jobs`
/// worker threads (0 = hardware concurrency).
MonteCarloReport monte_carlo(const Scenario& s, int n_runs, const std::vector<double>& epsilons,
                             int jobs = 1, const EpisodeOptions& opt = {});

struct TrendTest
{
  double statistic = 0.0;  // Jonckheere-Terpstra J
  double mean = 0.0;
  double variance = 0.0;
  double z = 0.0;
  double p_value = 1.0;    // one-sided
};

/// Jonckheere-Terpstra test against the ordered alternative that values
/// decrease along the group order. Normal approximation, tie-corrected.
TrendTest decreasing_trend_test(const std::vector<std::vector<double>>& groups);

}  // namespace ssampc
