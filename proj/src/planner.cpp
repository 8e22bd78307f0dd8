#include "ssampc/planner.hpp"

#include "ssampc/error.hpp"

#include <chrono>
#include <cmath>
#include <limits>
#include <string>

namespace ssampc {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

bool bounded(const Eigen::VectorXd& v, Eigen::Index j)
{
  return v.size() != 0 && std::isfinite(v(j));
}

}  // namespace

void AgentModel::validate() const
{
  const auto n = A.rows();
  if (A.cols() != n || B.rows() != n || G.cols() != n || C.cols() != n || C.rows() != 3) {
    throw DimensionError("AgentModel: inconsistent dimensions");
  }
  if (!(dt > 0.0)) throw ArgumentError("AgentModel: dt must be positive");
}

AgentModel discretize_agent(double dt, double gravity)
{
  if (!(dt > 0.0)) throw ArgumentError("discretize_agent: dt must be positive");
  AgentModel m;
  m.dt = dt;
  m.A = Eigen::MatrixXd::Identity(9, 9);
  m.B = Eigen::MatrixXd::Zero(9, 4);
  const double half = 0.5 * dt * dt;
  for (int chain = 0; chain < 4; ++chain) m.A(2 * chain, 2 * chain + 1) = dt;
  // x'' = -g theta, y'' = g phi, z'' = -u1 - g, psi'' = u4
  m.B(0, 1) = -gravity * half;
  m.B(1, 1) = -gravity * dt;
  m.B(2, 2) = gravity * half;
  m.B(3, 2) = gravity * dt;
  m.B(4, 0) = -half;
  m.B(5, 0) = -dt;
  m.B(6, 3) = half;
  m.B(7, 3) = dt;
  m.A(4, 8) = -gravity * half;
  m.A(5, 8) = -gravity * dt;

  m.G = Eigen::MatrixXd::Zero(4, 9);
  m.G(0, 0) = m.G(1, 2) = m.G(2, 4) = m.G(3, 6) = 1.0;
  m.C = m.G.topRows(3);
  return m;
}

Eigen::VectorXd hover_input(double gravity)
{
  Eigen::VectorXd u = Eigen::VectorXd::Zero(4);
  u(0) = -gravity;
  return u;
}

Eigen::VectorXd agent_state(const Eigen::Vector3d& position, const Eigen::Vector3d& velocity, double yaw,
                            double yaw_rate)
{
  Eigen::VectorXd x(9);
  x << position(0), velocity(0), position(1), velocity(1), position(2), velocity(2), yaw, yaw_rate, 1.0;
  return x;
}

void PlannerConfig::validate(const AgentModel& model) const
{
  model.validate();
  if (n_h < 1) throw ArgumentError("planner: n_h must be >= 1");
  if (!(epsilon > 0.0) || epsilon > 1.0) throw ArgumentError("planner: epsilon must lie in (0, 1]");
  if (!(tau > 0.0) || !(tau < 1.0)) throw ArgumentError("planner: tau must lie in (0, 1)");
  if (!(chi >= 0.0)) throw ArgumentError("planner: chi must be non-negative");
  if (scp_iters < 1) throw ArgumentError("planner: scp_iters must be >= 1");
  if (!(r_p >= 0.0)) throw ArgumentError("planner: r_p must be non-negative");
  const auto ny = model.G.rows();
  const auto nu = model.B.cols();
  const auto nx = model.A.rows();
  if (Q.rows() != ny || Q.cols() != ny) throw DimensionError("planner: Q must be n_y x n_y");
  if (R.rows() != nu || R.cols() != nu) throw DimensionError("planner: R must be n_u x n_u");
  auto check = [](const Eigen::VectorXd& v, Eigen::Index n, const char* what) {
    if (v.size() != 0 && v.size() != n) throw DimensionError(std::string("planner: ") + what);
  };
  check(u_trim, nu, "u_trim length");
  check(state_lower, nx, "state_lower length");
  check(state_upper, nx, "state_upper length");
  check(input_lower, nu, "input_lower length");
  check(input_upper, nu, "input_upper length");
}

Planner::Planner(AgentModel model, PlannerConfig cfg) : model_(std::move(model)), cfg_(std::move(cfg))
{
  cfg_.validate(model_);
  const int nx = model_.nx(), nu = model_.nu(), ny = model_.ny(), nh = cfg_.n_h;
  phi_.resize(nh * nx, nx);
  gamma_ = Eigen::MatrixXd::Zero(nh * nx, nh * nu);
  Eigen::MatrixXd power = model_.A;
  for (int i = 0; i < nh; ++i) {
    phi_.block(i * nx, 0, nx, nx) = power;
    power = model_.A * power;
  }
  // x_i = A^i x0 + sum_{j < i} A^(i-1-j) B u_j
  for (int i = 0; i < nh; ++i) {
    gamma_.block(i * nx, i * nu, nx, nu) = model_.B;
    for (int j = 0; j < i; ++j) {
      gamma_.block(i * nx, j * nu, nx, nu) = model_.A * gamma_.block((i - 1) * nx, j * nu, nx, nu);
    }
  }
  out_gamma_.resize(nh * ny, nh * nu);
  out_phi_.resize(nh * ny, nx);
  for (int i = 0; i < nh; ++i) {
    out_gamma_.middleRows(i * ny, ny) = model_.G * gamma_.middleRows(i * nx, nx);
    out_phi_.middleRows(i * ny, ny) = model_.G * phi_.middleRows(i * nx, nx);
  }
  Eigen::MatrixXd qbar = Eigen::MatrixXd::Zero(nh * ny, nh * ny);
  Eigen::MatrixXd rbar = Eigen::MatrixXd::Zero(nh * nu, nh * nu);
  for (int i = 0; i < nh; ++i) {
    qbar.block(i * ny, i * ny, ny, ny) = cfg_.Q;
    rbar.block(i * nu, i * nu, nu, nu) = cfg_.R;
  }
  hess_u_ = 2.0 * (out_gamma_.transpose() * qbar * out_gamma_ + rbar);
  hess_u_ = 0.5 * (hess_u_ + hess_u_.transpose()).eval();
  hess_u_ldlt_.compute(hess_u_);
}

double Planner::trust_radius(int w) const
{
  return cfg_.chi * std::pow(cfg_.tau, cfg_.trust_region_from_zero ? w - 1 : w);
}

Eigen::VectorXd Planner::tracking_gradient(const Eigen::VectorXd& x_init, const Eigen::MatrixXd& reference) const
{
  const int ny = model_.ny(), nu = model_.nu(), nh = cfg_.n_h;
  if (reference.rows() != nh || reference.cols() != ny) {
    throw DimensionError("planner: reference must be n_h x n_y");
  }
  if (x_init.size() != model_.nx()) throw DimensionError("planner: x_init has the wrong length");
  Eigen::VectorXd resid = out_phi_ * x_init;
  for (int i = 0; i < nh; ++i) resid.segment(i * ny, ny) -= reference.row(i).transpose();
  Eigen::VectorXd weighted(nh * ny);
  for (int i = 0; i < nh; ++i) weighted.segment(i * ny, ny) = cfg_.Q * resid.segment(i * ny, ny);
  Eigen::VectorXd q = 2.0 * out_gamma_.transpose() * weighted;
  if (cfg_.u_trim.size() != 0) {
    const Eigen::VectorXd r_trim = cfg_.R * cfg_.u_trim;
    for (int i = 0; i < nh; ++i) q.segment(i * nu, nu) -= 2.0 * r_trim;
  }
  return q;
}

Eigen::MatrixXd Planner::rollout(const Eigen::VectorXd& x_init, const Eigen::MatrixXd& controls) const
{
  Eigen::MatrixXd states(controls.rows() + 1, model_.nx());
  states.row(0) = x_init.transpose();
  for (Eigen::Index i = 0; i < controls.rows(); ++i) {
    states.row(i + 1) =
      (model_.A * states.row(i).transpose() + model_.B * controls.row(i).transpose()).transpose();
  }
  return states;
}

Eigen::MatrixXd Planner::tracking_optimum(const Eigen::VectorXd& x_init, const Eigen::MatrixXd& reference) const
{
  const Eigen::VectorXd u = hess_u_ldlt_.solve(-tracking_gradient(x_init, reference));
  return Eigen::Map<const Eigen::MatrixXd>(u.data(), model_.nu(), cfg_.n_h).transpose();
}

Eigen::MatrixXd Planner::warm_start_controls(const PlanResult* prev_plan, const Eigen::VectorXd& x_init,
                                             const Eigen::MatrixXd& reference) const
{
  if (prev_plan != nullptr && prev_plan->controls.rows() == cfg_.n_h &&
      prev_plan->controls.cols() == model_.nu()) {
    Eigen::MatrixXd u(cfg_.n_h, model_.nu());
    u.topRows(cfg_.n_h - 1) = prev_plan->controls.bottomRows(cfg_.n_h - 1);
    u.row(cfg_.n_h - 1) = prev_plan->controls.row(cfg_.n_h - 1);
    return u;
  }
  return tracking_optimum(x_init, reference);
}

Eigen::MatrixXd Planner::warm_start(const PlanResult* prev_plan, const Eigen::VectorXd& x_init,
                                    const Eigen::MatrixXd& reference) const
{
  return rollout(x_init, warm_start_controls(prev_plan, x_init, reference));
}

QpProblem Planner::base_problem(const Eigen::VectorXd& x_init, const Eigen::MatrixXd& reference,
                                int n_slack) const
{
  const int nu = model_.nu(), nh = cfg_.n_h;
  const int n_ctrl = nh * nu;
  const int n = n_ctrl + n_slack;
  QpProblem p;
  p.P = Eigen::MatrixXd::Zero(n, n);
  p.P.topLeftCorner(n_ctrl, n_ctrl) = hess_u_;
  p.q = Eigen::VectorXd::Zero(n);
  p.q.head(n_ctrl) = tracking_gradient(x_init, reference);
  p.lb = Eigen::VectorXd::Constant(n, -kInf);
  p.ub = Eigen::VectorXd::Constant(n, kInf);
  for (int i = 0; i < nh; ++i) {
    if (cfg_.input_lower.size() != 0) p.lb.segment(i * nu, nu) = cfg_.input_lower;
    if (cfg_.input_upper.size() != 0) p.ub.segment(i * nu, nu) = cfg_.input_upper;
  }
  p.lb.tail(n_slack).setZero();
  return p;
}

PlanResult Planner::plan(const Eigen::VectorXd& x_init, const Eigen::MatrixXd& reference,
                         const std::vector<ObstacleForecast>& obstacles, const PlanResult* prev_plan) const
{
  const auto t0 = std::chrono::steady_clock::now();
  const int nx = model_.nx(), nu = model_.nu(), nh = cfg_.n_h;
  const int n_ctrl = nh * nu;
  const int n_obs = static_cast<int>(obstacles.size());
  for (const auto& ob : obstacles) {
    if (ob.ensemble == nullptr || ob.ensemble->horizon() < nh || ob.ensemble->size() < 2) {
      throw DimensionError("planner: each obstacle needs an ensemble covering n_h steps");
    }
  }
  const int n_slack = 3 * nh * n_obs;
  const bool use_scp = n_obs > 0;

  // Rows that do not depend on the linearization: state bounds.
  std::vector<Eigen::Index> bound_state, bound_step;
  for (int i = 0; i < nh; ++i) {
    for (int j = 0; j < nx; ++j) {
      if (bounded(cfg_.state_lower, j) || bounded(cfg_.state_upper, j)) {
        bound_state.push_back(j);
        bound_step.push_back(i);
      }
    }
  }
  // Trust region only on states the controls can move.
  std::vector<int> tr_states;
  for (int j = 0; j < nx; ++j) {
    if (!gamma_.row((nh - 1) * nx + j).isZero()) tr_states.push_back(j);
  }
  const auto n_bound = static_cast<Eigen::Index>(bound_state.size());
  const auto n_tr = use_scp ? static_cast<Eigen::Index>(tr_states.size()) * nh : 0;
  const Eigen::Index n_risk = 7 * static_cast<Eigen::Index>(nh) * n_obs;

  QpProblem qp = base_problem(x_init, reference, n_slack);
  const int n = n_ctrl + n_slack;
  const Eigen::VectorXd free_states = phi_ * x_init;  // x_i with U = 0
  qp.A = Eigen::MatrixXd::Zero(n_risk + n_tr + n_bound, n);
  qp.b = Eigen::VectorXd::Constant(qp.A.rows(), kInf);
  qp.b_lower = Eigen::VectorXd::Constant(qp.A.rows(), -kInf);
  for (Eigen::Index r = 0; r < n_bound; ++r) {
    const auto i = bound_step[static_cast<std::size_t>(r)];
    const auto j = bound_state[static_cast<std::size_t>(r)];
    const Eigen::Index row = n_risk + n_tr + r;
    qp.A.block(row, 0, 1, n_ctrl) = gamma_.row(i * nx + j);
    const double offset = free_states(i * nx + j);
    if (cfg_.state_upper.size() != 0) qp.b(row) = cfg_.state_upper(j) - offset;
    if (cfg_.state_lower.size() != 0) qp.b_lower(row) = cfg_.state_lower(j) - offset;
  }

  PlanResult result;
  result.constrained = use_scp;
  Eigen::MatrixXd u_bar = warm_start_controls(prev_plan, x_init, reference);
  Eigen::MatrixXd x_bar = rollout(x_init, u_bar);
  Eigen::VectorXd z_warm = Eigen::VectorXd::Zero(n);
  z_warm.head(n_ctrl) = Eigen::Map<const Eigen::VectorXd>(Eigen::MatrixXd(u_bar.transpose()).data(), n_ctrl);
  Eigen::VectorXd z_last;

  const int iterations = use_scp ? cfg_.scp_iters : 1;
  bool ok = true;
  std::vector<AvoidanceCoeff> coeffs;
  for (int w = 1; w <= iterations && ok; ++w) {
    ScpIterate trace;
    trace.radius = use_scp ? trust_radius(w) : kInf;
    for (int k = 0; k < n_obs; ++k) {
      const auto& ens = *obstacles[static_cast<std::size_t>(k)].ensemble;
      const double r_bar = obstacles[static_cast<std::size_t>(k)].radius_estimate + cfg_.r_p;
      for (int i = 1; i <= nh; ++i) {
        Eigen::Vector3d p_bar = model_.C * x_bar.row(i).transpose();
        coeffs.clear();
        for (const auto& member : ens.members) {
          const Eigen::Vector3d y_hat = member.row(i - 1).transpose();
          if ((p_bar - y_hat).norm() <= 1e-9) p_bar(2) += 1e-6;
          coeffs.push_back(linearize_avoidance(p_bar, y_hat, r_bar, cfg_.beta_form));
        }
        const auto moments = ensemble_moments(coeffs);
        const auto offsets = schur_offsets(moments);
        const auto rows = build_risk_rows(moments, offsets, cfg_.epsilon, n_obs, model_.C);
        const Eigen::Index row0 = 7 * (static_cast<Eigen::Index>(k) * nh + (i - 1));
        const Eigen::Index slack0 = n_ctrl + 3 * (static_cast<Eigen::Index>(k) * nh + (i - 1));
        const auto lx = rows.lambda.leftCols(nx);
        qp.A.block(row0, 0, 7, n_ctrl) = lx * gamma_.middleRows((i - 1) * nx, nx);
        qp.A.block(row0, slack0, 7, 3) = rows.lambda.rightCols(3);
        qp.b.segment(row0, 7) = rows.gamma - lx * free_states.segment((i - 1) * nx, nx);
      }
    }
    if (use_scp) {
      Eigen::Index row = n_risk;
      for (int i = 1; i <= nh; ++i) {
        for (int j : tr_states) {
          qp.A.block(row, 0, 1, n_ctrl) = gamma_.row((i - 1) * nx + j);
          const double centre = x_bar(i, j) - free_states((i - 1) * nx + j);
          qp.b(row) = centre + trace.radius;
          qp.b_lower(row) = centre - trace.radius;
          ++row;
        }
      }
    }

    const QpSolution sol = solve(qp, z_warm, cfg_.qp);
    trace.status = sol.status;
    trace.qp_iterations = sol.iterations;
    trace.kkt = sol.kkt_residuals;
    trace.objective = sol.objective;
    if (sol.status != QpStatus::optimal) {
      ok = false;
    } else {
      z_last = sol.z_star;
      const Eigen::MatrixXd u_new =
        Eigen::Map<const Eigen::MatrixXd>(sol.z_star.data(), nu, nh).transpose();
      const Eigen::MatrixXd x_new = rollout(x_init, u_new);
      trace.max_deviation = use_scp ? (x_new - x_bar).cwiseAbs().maxCoeff() : 0.0;
      u_bar = u_new;
      x_bar = x_new;
      z_warm = sol.z_star;
    }
    result.scp_trace.push_back(trace);
  }

  if (ok) {
    result.feasible = true;
    result.controls = u_bar;
    result.states = x_bar;
    result.slacks.resize(nh * n_obs, 3);
    for (int r = 0; r < nh * n_obs; ++r) result.slacks.row(r) = z_last.segment(n_ctrl + 3 * r, 3).transpose();
  } else {
    result.feasible = false;
    result.controls = warm_start_controls(prev_plan, x_init, reference);
    result.states = rollout(x_init, result.controls);
    result.slacks = Eigen::MatrixXd::Zero(nh * n_obs, 3);
  }
  result.solve_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return result;
}

}  // namespace ssampc
