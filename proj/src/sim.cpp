#include "ssampc/sim.hpp"

#include "ssampc/error.hpp"

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <exception>
#include <limits>
#include <map>
#include <mutex>
#include <numbers>
#include <thread>

namespace ssampc {

namespace {

constexpr double kMaxSubstep = 0.0025;
constexpr double kDeg = std::numbers::pi / 180.0;

Eigen::Matrix3d disc_rotation(double roll, double pitch)
{
  return (Eigen::AngleAxisd(roll, Eigen::Vector3d::UnitX()) *
          Eigen::AngleAxisd(pitch, Eigen::Vector3d::UnitY()))
    .toRotationMatrix();
}

Eigen::VectorXd drag_ball_derivative(const Eigen::VectorXd& s, double c, const Eigen::Vector3d& g)
{
  Eigen::VectorXd d(6);
  d.head<3>() = s.segment<3>(3);
  d.tail<3>() = g - c * s.segment<3>(3);
  return d;
}

template <class F>
Eigen::VectorXd rk4(const Eigen::VectorXd& s, double h, const F& f)
{
  const Eigen::VectorXd k1 = f(s);
  const Eigen::VectorXd k2 = f(s + 0.5 * h * k1);
  const Eigen::VectorXd k3 = f(s + 0.5 * h * k2);
  const Eigen::VectorXd k4 = f(s + h * k3);
  return s + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

double uniform(std::mt19937_64& rng, double lo, double hi)
{
  if (!(hi > lo)) return lo;
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

Eigen::Vector3d interpolate(const std::vector<Eigen::Vector3d>& path, double t, double dt)
{
  const double u = t / dt;
  const auto last = static_cast<double>(path.size() - 1);
  if (u >= last) return path.back();
  if (u <= 0.0) return path.front();
  const auto k = static_cast<std::size_t>(std::floor(u));
  const double frac = u - static_cast<double>(k);
  return (1.0 - frac) * path[k] + frac * path[k + 1];
}

// Continuous-time acceleration produced by a held input.
Eigen::Vector3d agent_acceleration(const Eigen::VectorXd& u, double gravity)
{
  return Eigen::Vector3d(-gravity * u(1), gravity * u(2), -u(0) - gravity);
}

// Input seen by the plant: deviations from hover are scaled by 1 + gain_error.
Eigen::VectorXd applied_input(const Eigen::VectorXd& u, double gravity, double gain_error)
{
  if (gain_error == 0.0) return u;
  return u + gain_error * (u - hover_input(gravity));
}

int steps_for(double t, double dt) { return static_cast<int>(std::llround(t / dt)); }

}  // namespace

std::string to_string(ObstacleKind kind)
{
  switch (kind) {
    case ObstacleKind::constant_velocity: return "constant_velocity";
    case ObstacleKind::drag_ball: return "drag_ball";
    case ObstacleKind::frisbee: return "frisbee";
  }
  return "unknown";
}

ObstacleKind obstacle_kind_from_string(const std::string& name)
{
  if (name == "constant_velocity") return ObstacleKind::constant_velocity;
  if (name == "drag_ball") return ObstacleKind::drag_ball;
  if (name == "frisbee") return ObstacleKind::frisbee;
  throw ConfigError("unknown obstacle kind '" + name + "'");
}

void ObstacleModel::validate() const
{
  if (!(radius > 0.0)) throw ArgumentError("obstacle radius must be positive");
  if (state.size() != state_size(kind)) throw DimensionError("obstacle state has the wrong size");
  if (!state.allFinite()) throw NumericError("obstacle state is not finite");
}

Eigen::VectorXd frisbee_derivative(const Eigen::VectorXd& s, const FrisbeeParams& p,
                                   const Eigen::Vector3d& gravity)
{
  const double roll = s(6), pitch = s(7);
  const double wp = s(9), wq = s(10), wr = s(11);
  const Eigen::Matrix3d rot = disc_rotation(roll, pitch);
  const Eigen::Vector3d v = s.segment<3>(3);
  const double speed = v.norm();

  Eigen::Vector3d force = p.mass * gravity;
  Eigen::Vector3d moment = Eigen::Vector3d::Zero();  // disc frame
  if (speed > 1e-9) {
    const Eigen::Vector3d vd = rot.transpose() * v;
    const double planar = std::hypot(vd(0), vd(1));
    const double alpha = std::atan2(-vd(2), planar);
    const Eigen::Vector3d e_v = planar > 1e-12 ? Eigen::Vector3d(vd(0) / planar, vd(1) / planar, 0.0)
                                               : Eigen::Vector3d::UnitX();
    const Eigen::Vector3d e_s(-e_v(1), e_v(0), 0.0);  // normal x e_v

    const Eigen::Vector3d v_hat = v / speed;
    const Eigen::Vector3d normal = rot.col(2);
    Eigen::Vector3d lift_dir = normal - normal.dot(v_hat) * v_hat;
    const double ln = lift_dir.norm();
    lift_dir = ln > 1e-12 ? Eigen::Vector3d(lift_dir / ln) : Eigen::Vector3d::Zero();

    const double qs = 0.5 * p.rho * p.area * speed * speed;
    const double cl = p.cl0 + p.cla * alpha;
    const double da = alpha - p.alpha0;
    const double cd = p.cd0 + p.cda * da * da;
    force += qs * (cl * lift_dir - cd * v_hat);

    const Eigen::Vector3d omega(wp, wq, wr);
    const double roll_rate = omega.dot(e_v);
    const double pitch_rate = -omega.dot(e_s);  // nose-up positive
    const double cm = p.cm0 + p.cma * alpha + p.cmq * pitch_rate;
    const double cr = p.crr * wr + p.crp * roll_rate;
    const double cn = p.cnr * wr;
    moment = qs * p.diameter * (cr * e_v - cm * e_s + cn * Eigen::Vector3d::UnitZ());
  }

  // Euler equations in the non-spinning disc frame, whose rate is
  // (p, q, p tan(pitch)).
  const double tan_pitch = std::tan(pitch);
  const double w3 = wp * tan_pitch;
  const Eigen::Vector3d h(p.ixy * wp, p.ixy * wq, p.iz * wr);
  const Eigen::Vector3d gyro = Eigen::Vector3d(wp, wq, w3).cross(h);

  Eigen::VectorXd d(12);
  d.head<3>() = v;
  d.segment<3>(3) = force / p.mass;
  d(6) = wp / std::cos(pitch);
  d(7) = wq;
  d(8) = wr - wp * tan_pitch;
  d(9) = (moment(0) - gyro(0)) / p.ixy;
  d(10) = (moment(1) - gyro(1)) / p.ixy;
  d(11) = (moment(2) - gyro(2)) / p.iz;
  return d;
}

ObstacleModel step_obstacle(const ObstacleModel& model, double dt)
{
  if (!(dt > 0.0)) throw ArgumentError("step_obstacle: dt must be positive");
  ObstacleModel next = model;
  if (model.kind == ObstacleKind::constant_velocity) {
    next.state.head<3>() += dt * model.state.segment<3>(3);
    return next;
  }
  const int n = std::max(1, static_cast<int>(std::ceil(dt / kMaxSubstep - 1e-9)));
  const double h = dt / n;
  for (int k = 0; k < n; ++k) {
    if (model.kind == ObstacleKind::drag_ball) {
      next.state = rk4(next.state, h, [&](const Eigen::VectorXd& s) {
        return drag_ball_derivative(s, model.drag, model.gravity);
      });
    } else {
      next.state = rk4(next.state, h, [&](const Eigen::VectorXd& s) {
        return frisbee_derivative(s, model.frisbee, model.gravity);
      });
    }
  }
  return next;
}

Eigen::Vector3d measure(const Eigen::Vector3d& true_center, double half_width, std::mt19937_64& rng)
{
  if (!(half_width >= 0.0)) throw ArgumentError("measure: half width must be non-negative");
  if (half_width == 0.0) return true_center;
  std::uniform_real_distribution<double> u(-half_width, half_width);
  Eigen::Vector3d out = true_center;
  for (int a = 0; a < 3; ++a) out(a) += u(rng);
  return out;
}

Eigen::Vector3d Figure8::position(double t) const
{
  const double w = 2.0 * std::numbers::pi / period;
  return center + Eigen::Vector3d(a * std::sin(w * t), b * std::sin(w * t) * std::cos(w * t), altitude);
}

Eigen::Vector3d Figure8::velocity(double t) const
{
  const double w = 2.0 * std::numbers::pi / period;
  return Eigen::Vector3d(a * w * std::cos(w * t), b * w * std::cos(2.0 * w * t), 0.0);
}

Eigen::Vector4d Figure8::output(double t) const
{
  Eigen::Vector4d y;
  y << position(t), yaw;
  return y;
}

void Scenario::validate() const
{
  if (!(rate_hz > 0.0)) throw ConfigError("rate_hz must be positive");
  if (!(noise_half_width >= 0.0)) throw ConfigError("noise half width must be non-negative");
  if (!(reference.period > 0.0)) throw ConfigError("reference period must be positive");
  if (obstacle.speed_min < 0.0 || obstacle.speed_max < obstacle.speed_min) {
    throw ConfigError("obstacle speed range is invalid");
  }
  if (!(obstacle.radius > 0.0)) throw ConfigError("obstacle radius must be positive");
  if (obstacle.radius_factor < 1.0) throw ConfigError("radius_factor must be >= 1");
  if (cross_delay_max < cross_delay_min || cross_delay_min < 0.0) {
    throw ConfigError("crossing delay range is invalid");
  }
  if (substeps < 1) throw ConfigError("substeps must be >= 1");
  if (t_intro < 0.0) throw ConfigError("t_intro must be non-negative");
  if (bootstrap.n_h != planner.n_h) throw ConfigError("bootstrap and planner horizons differ");
  try {
    bootstrap.validate();
    planner.validate(discretize_agent(dt(), gravity));
  } catch (const Error& e) {
    throw ConfigError(e.what());
  }
}

PlannerConfig default_planner_config(double gravity)
{
  PlannerConfig cfg;
  cfg.Q = Eigen::Vector4d(10.0, 10.0, 10.0, 1.0).asDiagonal();
  cfg.R = Eigen::Vector4d(0.05, 1.0, 1.0, 0.1).asDiagonal();
  cfg.u_trim = hover_input(gravity);
  cfg.input_lower = Eigen::Vector4d(-2.0 * gravity, -0.8, -0.8, -5.0);
  cfg.input_upper = Eigen::Vector4d(0.0, 0.8, 0.8, 5.0);
  return cfg;
}

Scenario builtin_scenario(const std::string& name)
{
  Scenario s;
  s.name = name;
  s.planner = default_planner_config(s.gravity);
  ObstacleSpec& o = s.obstacle;
  if (name == "case1") {
    o.kind = ObstacleKind::constant_velocity;
    o.speed_min = 0.41;
    o.speed_max = 8.43;
    o.radius = 0.3;
  } else if (name == "case2") {
    o.kind = ObstacleKind::drag_ball;
    o.speed_min = 3.41;
    o.speed_max = 6.37;
    o.radius = 0.3;
    o.drag = 1.8;
    o.gravity = Eigen::Vector3d(0.0, 0.0, -s.gravity);
    o.elevation_min_deg = 20.0;
    o.elevation_max_deg = 60.0;
  } else if (name == "case3") {
    o.kind = ObstacleKind::frisbee;
    o.speed_min = 5.76;
    o.speed_max = 6.68;
    o.radius = 0.15;
    o.frisbee.mass = 0.08;  // glides near the sampled launch speeds
    o.gravity = Eigen::Vector3d(0.0, 0.0, -s.gravity);
    o.elevation_min_deg = -5.0;
    o.elevation_max_deg = 5.0;
  } else {
    throw ConfigError("unknown scenario '" + name + "'");
  }
  return s;
}

std::vector<Eigen::Vector3d> blind_track(const Scenario& s, double duration)
{
  const auto model = discretize_agent(s.dt(), s.gravity);
  const Planner planner(model, s.planner);
  const int steps = steps_for(duration, s.dt()) + 1;
  Eigen::VectorXd x = agent_state(s.reference.position(0.0), s.reference.velocity(0.0), s.reference.yaw);
  std::vector<Eigen::Vector3d> path;
  path.reserve(static_cast<std::size_t>(steps) + 1);
  Eigen::MatrixXd ref(s.planner.n_h, 4);
  PlanResult prev;
  for (int k = 0; k <= steps; ++k) {
    path.push_back(model.C * x);
    const double t = k * s.dt();
    for (int i = 0; i < s.planner.n_h; ++i) ref.row(i) = s.reference.output(t + (i + 1) * s.dt()).transpose();
    prev = planner.plan(x, ref, {}, k > 0 ? &prev : nullptr);
    x = model.A * x + model.B * applied_input(prev.controls.row(0).transpose(), s.gravity, s.gain_error);
  }
  return path;
}

std::uint64_t run_seed(std::uint64_t template_seed, int run_index)
{
  std::seed_seq seq{static_cast<std::uint32_t>(template_seed), static_cast<std::uint32_t>(template_seed >> 32),
                    static_cast<std::uint32_t>(run_index), 0x5eedu};
  std::array<std::uint32_t, 2> out{};
  seq.generate(out.begin(), out.end());
  return (static_cast<std::uint64_t>(out[0]) << 32) | out[1];
}

EncounterLayout sample_encounter(const Scenario& s, std::uint64_t seed, const std::vector<Eigen::Vector3d>& blind)
{
  const double dt = s.dt();
  const ObstacleSpec& o = s.obstacle;
  std::mt19937_64 rng(seed);
  const int k_intro = steps_for(s.t_intro, dt);
  const int k_first_forecast = k_intro + s.bootstrap.n_train - 1;
  const double t_intro = k_intro * dt;
  const double t_f = k_first_forecast * dt;

  EncounterLayout layout;
  for (int attempt = 1; attempt <= 200; ++attempt) {
    layout.attempts = attempt;
    const double t_c = t_f + uniform(rng, s.cross_delay_min, s.cross_delay_max);
    const Eigen::Vector3d aim = interpolate(blind, t_c, dt);
    const Eigen::Vector3d ref_vel = s.reference.velocity(t_c);
    const double ref_heading = std::atan2(ref_vel(1), ref_vel(0));
    const double side = uniform(rng, 0.0, 1.0) < 0.5 ? -1.0 : 1.0;
    const double heading = ref_heading + side * uniform(rng, o.heading_min_deg, o.heading_max_deg) * kDeg;
    const double elevation = uniform(rng, o.elevation_min_deg, o.elevation_max_deg) * kDeg;
    const double speed = uniform(rng, o.speed_min, o.speed_max);
    const Eigen::Vector3d dir(std::cos(elevation) * std::cos(heading), std::cos(elevation) * std::sin(heading),
                              std::sin(elevation));
    const double tau = t_c - t_intro;

    ObstacleModel ob;
    ob.kind = o.kind;
    ob.radius = o.radius;
    ob.drag = o.drag;
    ob.gravity = o.gravity;
    ob.frisbee = o.frisbee;
    ob.state = Eigen::VectorXd::Zero(ObstacleModel::state_size(o.kind));
    const Eigen::Vector3d v0 = speed * dir;
    ob.state.segment<3>(3) = v0;

    if (o.kind == ObstacleKind::constant_velocity) {
      ob.state.head<3>() = aim - v0 * tau;
    } else if (o.kind == ObstacleKind::drag_ball) {
      Eigen::Vector3d disp;
      if (o.drag > 0.0) {
        const Eigen::Vector3d v_term = o.gravity / o.drag;
        disp = v_term * tau + (v0 - v_term) * (1.0 - std::exp(-o.drag * tau)) / o.drag;
      } else {
        disp = v0 * tau + 0.5 * o.gravity * tau * tau;
      }
      ob.state.head<3>() = aim - disp;
    } else {
      // The flight curves, so launch along a heading corrected by the turn
      // observed in a trial flight, then translate onto the aim point.
      const double roll = uniform(rng, -o.roll_max_deg, o.roll_max_deg) * kDeg;
      const double pitch = uniform(rng, -o.pitch_max_deg, o.pitch_max_deg) * kDeg;
      const double spin = uniform(rng, o.spin_min, o.spin_max);
      auto launch = [&](double launch_heading) {
        ObstacleModel f = ob;
        const Eigen::Vector3d fwd(std::cos(launch_heading), std::sin(launch_heading), 0.0);
        const Eigen::Vector3d left = Eigen::Vector3d::UnitZ().cross(fwd);
        const Eigen::Vector3d n =
          (Eigen::Vector3d::UnitZ() - std::tan(pitch) * fwd + std::tan(roll) * left).normalized();
        f.state.setZero();
        f.state.segment<3>(3) = speed * (std::cos(elevation) * fwd + std::sin(elevation) * Eigen::Vector3d::UnitZ());
        f.state(7) = std::asin(std::clamp(n(0), -1.0, 1.0));
        f.state(6) = std::atan2(-n(1), n(2));
        f.state(11) = spin;
        return f;
      };
      auto fly = [&](ObstacleModel f) {
        const int steps = steps_for(tau, dt) * s.substeps;
        for (int k = 0; k < steps; ++k) f = step_obstacle(f, dt / s.substeps);
        return f;
      };
      const ObstacleModel trial = fly(launch(heading));
      const double turned =
        std::atan2(trial.state(4), trial.state(3)) - heading;
      ObstacleModel start = launch(heading - turned);
      const ObstacleModel end = fly(start);
      start.state.head<3>() = aim - end.state.head<3>();
      ob = start;
    }
    layout.obstacle = ob;
    layout.crossing_time = t_c;
    layout.aim = aim;

    // Reject layouts that meet the agent before the first forecast.
    bool early = false;
    ObstacleModel probe = ob;
    for (int k = k_intro; k <= k_first_forecast && !early; ++k) {
      if ((probe.position() - interpolate(blind, k * dt, dt)).norm() < s.min_early_separation) early = true;
      probe = step_obstacle(probe, dt);
    }
    if (!early) break;
  }
  return layout;
}

ObstacleTrack prepare_obstacle(const Scenario& s, int run_index, const std::vector<Eigen::Vector3d>& blind)
{
  const double dt = s.dt();
  const std::uint64_t seed = run_seed(s.seed, run_index);
  ObstacleTrack track;
  track.layout = sample_encounter(s, seed, blind);
  track.first_step = steps_for(s.t_intro, dt);
  const int nominal_end = steps_for(track.layout.crossing_time + s.end_margin, dt) + 1;

  std::mt19937_64 noise(seed ^ 0x9e3779b97f4a7c15ull);
  MeasurementBuffer buffer(s.bootstrap.history_capacity());
  ObstacleModel ob = track.layout.obstacle;
  const Eigen::Vector3d hub = s.reference.center + Eigen::Vector3d(0.0, 0.0, s.reference.altitude);
  int k = track.first_step;
  for (; k < nominal_end; ++k) {
    const Eigen::Vector3d truth = ob.position();
    if (k * dt > track.layout.crossing_time && (truth - hub).norm() > s.exit_radius &&
        ob.velocity().dot(truth - hub) > 0.0) {
      break;
    }
    const Eigen::Vector3d meas = measure(truth, s.noise_half_width, noise);
    accumulate_measurement(buffer, meas);
    track.measured.push_back(meas);
    if (buffer.size() >= s.bootstrap.n_train) {
      auto ens = forecast_ensemble(generate_ensemble(buffer, s.bootstrap), buffer, s.bootstrap.n_h);
      track.forecasts.push_back(std::move(ens));
    } else {
      track.forecasts.emplace_back();
    }
    track.truth.push_back(truth);
    for (int j = 1; j <= s.substeps; ++j) {
      ob = step_obstacle(ob, dt / s.substeps);
      if (j < s.substeps) track.truth.push_back(ob.position());
    }
  }
  track.truth.push_back(ob.position());
  track.last_step = k;
  return track;
}

EpisodeResult run_episode(const Scenario& s, int run_index, const EpisodeOptions& opt)
{
  s.validate();
  const double horizon = s.t_intro + (s.bootstrap.n_train - 1) * s.dt() + s.cross_delay_max + s.end_margin + 1.0;
  const auto blind = blind_track(s, horizon);
  return run_episode(s, run_index, prepare_obstacle(s, run_index, blind), opt);
}

EpisodeResult run_episode(const Scenario& s, int run_index, const ObstacleTrack& track, const EpisodeOptions& opt)
{
  const double dt = s.dt();
  const auto model = discretize_agent(dt, s.gravity);
  const Planner planner(model, s.planner);

  EpisodeResult res;
  res.seed = run_seed(s.seed, run_index);
  res.run_index = run_index;
  res.epsilon = s.planner.epsilon;
  res.crossing_time = track.layout.crossing_time;
  res.obstacle_speed = track.layout.obstacle.velocity().norm();
  res.d_min = std::numeric_limits<double>::infinity();

  Eigen::VectorXd x = agent_state(s.reference.position(0.0), s.reference.velocity(0.0), s.reference.yaw);
  Eigen::MatrixXd ref(s.planner.n_h, 4);
  PlanResult prev;
  bool have_prev = false;
  double time_constrained = 0.0, time_all = 0.0;
  const double r_hat = s.obstacle.radius * s.obstacle.radius_factor;

  for (int k = 0; k < track.last_step; ++k) {
    const double t = k * dt;
    const bool active = k >= track.first_step;
    const std::size_t idx = active ? static_cast<std::size_t>(k - track.first_step) : 0;
    for (int i = 0; i < s.planner.n_h; ++i) ref.row(i) = s.reference.output(t + (i + 1) * dt).transpose();

    std::vector<ObstacleForecast> obstacles;
    if (s.planner_enabled && active && track.forecasts[idx].size() > 0) {
      obstacles.push_back(ObstacleForecast{&track.forecasts[idx], r_hat});
    }
    PlanResult plan;
    try {
      plan = planner.plan(x, ref, obstacles, have_prev ? &prev : nullptr);
    } catch (const std::exception& e) {
      res.failed = true;
      res.diagnostic = std::string("step ") + std::to_string(k) + ": " + e.what();
      break;
    }
    ++res.n_plans;
    time_all += plan.solve_time;
    if (plan.constrained) {
      ++res.n_constrained;
      time_constrained += plan.solve_time;
      if (!plan.feasible) ++res.n_infeasible;
      for (const auto& it : plan.scp_trace) {
        if (it.status != QpStatus::optimal) continue;
        res.max_kkt_stationarity = std::max(res.max_kkt_stationarity, it.kkt.stationarity);
        res.max_kkt_primal = std::max(res.max_kkt_primal, it.kkt.primal);
      }
    }

    const Eigen::VectorXd u = applied_input(plan.controls.row(0).transpose(), s.gravity, s.gain_error);
    const Eigen::Vector3d p = model.C * x;
    const Eigen::Vector3d v(x(1), x(3), x(5));
    const Eigen::Vector3d a = agent_acceleration(u, s.gravity);
    if (active) {
      for (int j = 0; j < s.substeps; ++j) {
        const double tau = j * dt / s.substeps;
        const Eigen::Vector3d pa = p + v * tau + 0.5 * a * tau * tau;
        const double d = (pa - track.truth[idx * static_cast<std::size_t>(s.substeps) + static_cast<std::size_t>(j)]).norm();
        res.d_min = std::min(res.d_min, d);
      }
    }
    if (opt.record_trajectory) {
      TrajectoryRow row;
      row.time = t;
      row.agent = p;
      row.obstacle_active = active;
      if (active) {
        row.obstacle = track.truth[idx * static_cast<std::size_t>(s.substeps)];
        row.measured = track.measured[idx];
        row.distance = (p - row.obstacle).norm();
      }
      row.constrained = plan.constrained;
      row.feasible = plan.feasible;
      res.trajectory.push_back(row);
    }
    if (opt.record_forecasts && !obstacles.empty()) res.forecasts.push_back(track.forecasts[idx]);

    x = model.A * x + model.B * u;
    prev = plan;
    have_prev = true;
  }
  if (!res.failed && track.last_step > track.first_step) {
    const auto last = static_cast<std::size_t>(track.last_step - track.first_step);
    const Eigen::Vector3d pa = model.C * x;
    res.d_min = std::min(res.d_min, (pa - track.truth[last * static_cast<std::size_t>(s.substeps)]).norm());
  }
  if (!std::isfinite(res.d_min)) res.d_min = 0.0;
  res.collided = res.d_min < s.obstacle.radius + s.planner.r_p;
  res.mean_plan_time = res.n_constrained > 0 ? time_constrained / res.n_constrained : 0.0;
  res.mean_plan_time_all = res.n_plans > 0 ? time_all / res.n_plans : 0.0;
  return res;
}

MonteCarloReport monte_carlo(const Scenario& s, int n_runs, const std::vector<double>& epsilons, int jobs,
                             const EpisodeOptions& opt)
{
  if (n_runs < 1) throw ArgumentError("monte_carlo: n_runs must be >= 1");
  for (double e : epsilons) {
    if (!(e > 0.0) || e > 1.0) throw ArgumentError("monte_carlo: epsilon must lie in (0, 1]");
  }
  s.validate();
  const double horizon = s.t_intro + (s.bootstrap.n_train - 1) * s.dt() + s.cross_delay_max + s.end_margin + 1.0;
  const auto blind = blind_track(s, horizon);

  MonteCarloReport report;
  report.episodes.assign(epsilons.size(), std::vector<EpisodeResult>(static_cast<std::size_t>(n_runs)));
  std::atomic<int> next{0};
  std::exception_ptr error;
  std::mutex error_lock;
  auto worker = [&] {
    for (int r = next++; r < n_runs; r = next++) {
      try {
        const ObstacleTrack track = prepare_obstacle(s, r, blind);
        for (std::size_t e = 0; e < epsilons.size(); ++e) {
          Scenario se = s;
          se.planner.epsilon = epsilons[e];
          report.episodes[e][static_cast<std::size_t>(r)] = run_episode(se, r, track, opt);
        }
      } catch (...) {
        std::lock_guard<std::mutex> g(error_lock);
        if (!error) error = std::current_exception();
      }
    }
  };
  if (jobs <= 0) jobs = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  jobs = std::min(jobs, n_runs);
  if (jobs == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int j = 0; j < jobs; ++j) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  if (error) std::rethrow_exception(error);

  for (std::size_t e = 0; e < epsilons.size(); ++e) {
    const auto& eps_runs = report.episodes[e];
    MonteCarloRow row;
    row.scenario = s.name;
    row.epsilon = epsilons[e];
    row.runs = n_runs;
    long constrained = 0, infeasible = 0;
    int feasible_runs = 0, successes = 0;
    double time_sum = 0.0;
    for (const auto& ep : eps_runs) {
      constrained += ep.n_constrained;
      infeasible += ep.n_infeasible;
      time_sum += ep.mean_plan_time;
      row.collisions += ep.collided ? 1 : 0;
      row.failed += ep.failed ? 1 : 0;
      if (ep.feasible_throughout()) {
        ++feasible_runs;
        if (!ep.collided) ++successes;
      }
      row.d_min.push_back(ep.d_min);
      row.seeds.push_back(ep.seed);
    }
    row.pct_feasible = constrained > 0 ? 100.0 * static_cast<double>(constrained - infeasible) / constrained : 100.0;
    row.pct_feasible_runs = 100.0 * feasible_runs / n_runs;
    row.pct_success = feasible_runs > 0 ? 100.0 * successes / feasible_runs : std::nan("");
    double mean = 0.0;
    for (double d : row.d_min) mean += d;
    mean /= n_runs;
    double var = 0.0;
    for (double d : row.d_min) var += (d - mean) * (d - mean);
    row.mean_dmin = mean;
    row.std_dmin = n_runs > 1 ? std::sqrt(var / (n_runs - 1)) : 0.0;
    row.mean_plan_time = time_sum / n_runs;
    report.rows.push_back(std::move(row));
  }
  return report;
}

TrendTest decreasing_trend_test(const std::vector<std::vector<double>>& groups)
{
  TrendTest out;
  double n_total = 0.0;
  double sum_n = 0.0, sum_n2 = 0.0, sum_n3 = 0.0, sum_g = 0.0;
  std::vector<double> all;
  for (const auto& g : groups) {
    const auto n = static_cast<double>(g.size());
    n_total += n;
    sum_g += n * (n - 1.0) * (2.0 * n + 5.0);
    sum_n2 += n * (n - 1.0) * (n - 2.0);
    sum_n3 += n * (n - 1.0);
    sum_n += n * n;
    all.insert(all.end(), g.begin(), g.end());
  }
  // Count pairs (earlier group, later group) ordered as the alternative says.
  for (std::size_t i = 0; i < groups.size(); ++i) {
    for (std::size_t j = i + 1; j < groups.size(); ++j) {
      for (double a : groups[i]) {
        for (double b : groups[j]) {
          if (b < a) out.statistic += 1.0;
          else if (b == a) out.statistic += 0.5;
        }
      }
    }
  }
  std::map<double, double> ties;
  for (double v : all) ties[v] += 1.0;
  double tie_g = 0.0, tie2 = 0.0, tie3 = 0.0;
  for (const auto& [value, t] : ties) {
    tie_g += t * (t - 1.0) * (2.0 * t + 5.0);
    tie2 += t * (t - 1.0) * (t - 2.0);
    tie3 += t * (t - 1.0);
  }
  const double n = n_total;
  out.mean = (n * n - sum_n) / 4.0;
  out.variance = (n * (n - 1.0) * (2.0 * n + 5.0) - sum_g - tie_g) / 72.0;
  if (n > 2.0) out.variance += sum_n2 * tie2 / (36.0 * n * (n - 1.0) * (n - 2.0));
  if (n > 1.0) out.variance += sum_n3 * tie3 / (8.0 * n * (n - 1.0));
  if (out.variance > 0.0) {
    out.z = (out.statistic - out.mean) / std::sqrt(out.variance);
    out.p_value = 0.5 * std::erfc(out.z / std::numbers::sqrt2);
  }
  return out;
}

}  // namespace ssampc
