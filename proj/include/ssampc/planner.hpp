#pragma once

// Receding-horizon planner. States are eliminated by the linear rollout
// X_i = Phi_i x0 + Gamma_i U, so each SCP subproblem is a dense QP in the
// stacked controls U and three slacks per (step, obstacle).

#include "ssampc/bootstrap.hpp"
#include "ssampc/qp.hpp"
#include "ssampc/risk.hpp"

#include <Eigen/Dense>

#include <optional>
#include <vector>

namespace ssampc {

struct AgentModel
{
  Eigen::MatrixXd A;  // n_x x n_x
  Eigen::MatrixXd B;  // n_x x n_u
  Eigen::MatrixXd G;  // n_y x n_x, tracked outputs
  Eigen::MatrixXd C;  // 3 x n_x, position
  double dt = 0.05;

  int nx() const { return static_cast<int>(A.rows()); }
  int nu() const { return static_cast<int>(B.cols()); }
  int ny() const { return static_cast<int>(G.rows()); }
  /// Throws DimensionError / ArgumentError on inconsistent data.
  void validate() const;
};

/// Quadcopter small-angle model
///   x'' = -g theta,  y'' = g phi,  z'' = -u1 - g,  psi'' = u4
/// with state [x, vx, y, vy, z, vz, psi, psi_rate, 1] and input
/// [u1, theta, phi, u4]. The trailing constant state carries gravity.
/// Zero-order hold, exact.
AgentModel discretize_agent(double dt, double gravity = 9.81);

/// Input that holds altitude: u1 = -g, the rest zero.
Eigen::VectorXd hover_input(double gravity = 9.81);

/// State with the constant component set to 1.
Eigen::VectorXd agent_state(const Eigen::Vector3d& position, const Eigen::Vector3d& velocity,
                            double yaw = 0.0, double yaw_rate = 0.0);

struct PlannerConfig
{
  int n_h = 10;
  double epsilon = 0.05;
  double chi = 50.0;
  double tau = 0.25;
  int scp_iters = 4;
  bool trust_region_from_zero = false;  // radii chi * tau^(w-1) instead of chi * tau^w
  Eigen::MatrixXd Q;                    // n_y x n_y output weight
  Eigen::MatrixXd R;                    // n_u x n_u input weight
  Eigen::VectorXd u_trim;               // R penalizes u - u_trim; empty = 0
  Eigen::VectorXd state_lower, state_upper;  // empty = unbounded
  Eigen::VectorXd input_lower, input_upper;  // empty = unbounded
  double r_p = 0.3;                     // agent radius, meters
  BetaForm beta_form = BetaForm::corrected;
  QpSettings qp;

  void validate(const AgentModel& model) const;
};

/// Forecast of one obstacle as seen by the planner.
struct ObstacleForecast
{
  const ForecastEnsemble* ensemble = nullptr;
  double radius_estimate = 0.33;  // r_hat_k >= r_k
};

struct ScpIterate
{
  double objective = 0.0;
  double radius = 0.0;           // trust-region radius, inf when unused
  double max_deviation = 0.0;    // max_i ||x_i - x_bar_i||_inf
  QpStatus status = QpStatus::max_iter;
  int qp_iterations = 0;
  KktResiduals kkt;
};

struct PlanResult
{
  Eigen::MatrixXd controls;  // n_h x n_u
  Eigen::MatrixXd states;    // (n_h + 1) x n_x, row 0 is x_init
  Eigen::MatrixXd slacks;    // (n_h * n_obs) x 3, row (k * n_h + i - 1)
  bool feasible = false;
  bool constrained = false;  // obstacle rows were present
  std::vector<ScpIterate> scp_trace;
  double solve_time = 0.0;   // seconds
};

class Planner
{
public:
  Planner(AgentModel model, PlannerConfig cfg);

  const AgentModel& model() const { return model_; }
  const PlannerConfig& config() const { return cfg_; }

  /// `reference` is n_h x n_y: outputs wanted after 1..n_h controls.
  /// Forecast step i of every ensemble is matched to state i.
  PlanResult plan(const Eigen::VectorXd& x_init, const Eigen::MatrixXd& reference,
                  const std::vector<ObstacleForecast>& obstacles,
                  const PlanResult* prev_plan = nullptr) const;

  /// Initial control sequence: the previous plan shifted by one step with its
  /// last control repeated, otherwise the unconstrained tracking optimum.
  Eigen::MatrixXd warm_start_controls(const PlanResult* prev_plan, const Eigen::VectorXd& x_init,
                                      const Eigen::MatrixXd& reference) const;

  /// Linearization trajectory of warm_start_controls, (n_h + 1) x n_x.
  Eigen::MatrixXd warm_start(const PlanResult* prev_plan, const Eigen::VectorXd& x_init,
                             const Eigen::MatrixXd& reference) const;

  /// States after each control, (n_h + 1) x n_x.
  Eigen::MatrixXd rollout(const Eigen::VectorXd& x_init, const Eigen::MatrixXd& controls) const;

  /// Unconstrained minimizer of the tracking cost, n_h x n_u.
  Eigen::MatrixXd tracking_optimum(const Eigen::VectorXd& x_init, const Eigen::MatrixXd& reference) const;

  /// Trust-region radius of SCP iteration w (1-based).
  double trust_radius(int w) const;

private:
  Eigen::VectorXd tracking_gradient(const Eigen::VectorXd& x_init, const Eigen::MatrixXd& reference) const;
  QpProblem base_problem(const Eigen::VectorXd& x_init, const Eigen::MatrixXd& reference,
                         int n_slack) const;

  AgentModel model_;
  PlannerConfig cfg_;
  Eigen::MatrixXd phi_;        // (n_h * n_x) x n_x, block i-1 maps x0 to x_i
  Eigen::MatrixXd gamma_;      // (n_h * n_x) x (n_h * n_u)
  Eigen::MatrixXd hess_u_;     // 2 (Gamma^T G^T Q G Gamma + R)
  Eigen::MatrixXd out_gamma_;  // (n_h * n_y) x (n_h * n_u), G applied blockwise
  Eigen::MatrixXd out_phi_;    // (n_h * n_y) x n_x
  Eigen::LDLT<Eigen::MatrixXd> hess_u_ldlt_;
};

}  // namespace ssampc
