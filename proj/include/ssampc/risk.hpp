#pragma once

// Moment-based collision-avoidance constraints for one (horizon step,
// obstacle) pair. Each bootstrap member j contributes z_j = alpha_j^T p + beta_j
// where p is the agent position; z_j <= 0 is the linearized keep-out
// constraint. The ensemble moments of (alpha, beta) give the standard
// deviation Delta of z, an affine-friendly upper bound zeta, and the rows of a
// Cantelli-type deterministic constraint.

#include <Eigen/Dense>

#include <span>

namespace ssampc {

struct AvoidanceCoeff
{
  Eigen::Vector3d alpha = Eigen::Vector3d::Zero();
  double beta = 0.0;
  int obstacle_id = 0;
  int step = 0;

  double evaluate(const Eigen::Vector3d& p) const { return alpha.dot(p) + beta; }
};

/// Which offset to use for beta. `corrected` makes z <= 0 coincide with the
/// linearized constraint; `literal` keeps -(C x_bar)^T (C x_bar - y_hat).
enum class BetaForm { corrected, literal };

struct EnsembleMoments
{
  Eigen::Vector3d mean_alpha = Eigen::Vector3d::Zero();
  double mean_beta = 0.0;
  Eigen::Matrix3d cov_alpha = Eigen::Matrix3d::Zero();
  Eigen::Vector3d cov_alpha_beta = Eigen::Vector3d::Zero();
  double var_beta = 0.0;
  int n_null = 0;
  Eigen::Matrix3d sigma_tilde = Eigen::Matrix3d::Identity();       // cov_alpha + I_null
  Eigen::Matrix3d sigma_tilde_sqrt = Eigen::Matrix3d::Identity();  // symmetric root
  Eigen::Matrix3d sigma_tilde_inv = Eigen::Matrix3d::Identity();
  int samples = 0;
};

struct SchurOffsets
{
  Eigen::Vector3d h = Eigen::Vector3d::Zero();
  double k = 0.0;
};

/// Constraint block Lambda * [x; s] <= Gamma for one (step, obstacle).
struct RiskRows
{
  Eigen::MatrixXd lambda;  // 7 x (n_x + 3)
  Eigen::VectorXd gamma;   // 7
  double epsilon_n = 1.0;
  double nu = 0.0;
};

/// nu = sqrt((1 - eps_n) / eps_n); throws ArgumentError outside (0, 1].
double risk_multiplier(double epsilon_n);

/// Coefficients of z for one member, from the linearization position
/// p_bar = C x_bar. Throws DegenerateLinearizationError when p_bar == y_hat.
AvoidanceCoeff linearize_avoidance(const Eigen::Vector3d& p_bar, const Eigen::Vector3d& y_hat,
                                   double r_bar, BetaForm form = BetaForm::corrected);

AvoidanceCoeff linearize_avoidance(const Eigen::Ref<const Eigen::VectorXd>& x_bar,
                                   const Eigen::Ref<const Eigen::MatrixXd>& output_map,
                                   const Eigen::Vector3d& y_hat, double r_bar,
                                   BetaForm form = BetaForm::corrected);

/// Unbiased sample moments (divisor n - 1) plus the null-space regularization.
EnsembleMoments ensemble_moments(std::span<const AvoidanceCoeff> coeffs);

/// Standard deviation of z at position p.
double delta(const Eigen::Vector3d& p, const EnsembleMoments& m);

SchurOffsets schur_offsets(const EnsembleMoments& m);

/// zeta = 1^T |sigma_tilde^{1/2} (p - h)| + sqrt(3 k) >= delta(p, m).
double zeta(const Eigen::Vector3d& p, const EnsembleMoments& m, const SchurOffsets& s);

RiskRows build_risk_rows(const EnsembleMoments& m, const SchurOffsets& s, double epsilon, int n_obs,
                         const Eigen::Ref<const Eigen::MatrixXd>& output_map);

}  // namespace ssampc
