#include "ssampc/risk.hpp"

#include "ssampc/error.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace ssampc {

double risk_multiplier(double epsilon_n)
{
  if (!(epsilon_n > 0.0) || epsilon_n > 1.0) {
    throw ArgumentError("risk tolerance must lie in (0, 1], got " + std::to_string(epsilon_n));
  }
  return std::sqrt((1.0 - epsilon_n) / epsilon_n);
}

AvoidanceCoeff linearize_avoidance(const Eigen::Vector3d& p_bar, const Eigen::Vector3d& y_hat,
                                   double r_bar, BetaForm form)
{
  const Eigen::Vector3d d = p_bar - y_hat;
  const double dist = d.norm();
  if (!(dist > 1e-9)) {
    throw DegenerateLinearizationError("linearize_avoidance: linearization point on obstacle center");
  }
  AvoidanceCoeff c;
  c.alpha = -d;
  c.beta = form == BetaForm::corrected ? r_bar * dist + y_hat.dot(d) : r_bar * dist - p_bar.dot(d);
  return c;
}

AvoidanceCoeff linearize_avoidance(const Eigen::Ref<const Eigen::VectorXd>& x_bar,
                                   const Eigen::Ref<const Eigen::MatrixXd>& output_map,
                                   const Eigen::Vector3d& y_hat, double r_bar, BetaForm form)
{
  if (output_map.rows() != 3 || output_map.cols() != x_bar.size()) {
    throw DimensionError("linearize_avoidance: output map must be 3 x n_x");
  }
  return linearize_avoidance(Eigen::Vector3d(output_map * x_bar), y_hat, r_bar, form);
}

EnsembleMoments ensemble_moments(std::span<const AvoidanceCoeff> coeffs)
{
  const auto n = static_cast<Eigen::Index>(coeffs.size());
  if (n < 2) throw InsufficientDataError("ensemble_moments: need at least two members");

  Eigen::Matrix<double, Eigen::Dynamic, 4> joint(n, 4);
  for (Eigen::Index j = 0; j < n; ++j) {
    const auto& c = coeffs[static_cast<std::size_t>(j)];
    joint.row(j) << c.alpha.transpose(), c.beta;
  }
  const Eigen::RowVector4d mean = joint.colwise().mean();
  const Eigen::Matrix<double, Eigen::Dynamic, 4> centered = joint.rowwise() - mean;
  const Eigen::Matrix4d cov = centered.transpose() * centered / static_cast<double>(n - 1);

  EnsembleMoments m;
  m.samples = static_cast<int>(n);
  m.mean_alpha = mean.head<3>().transpose();
  m.mean_beta = mean(3);
  m.cov_alpha = cov.topLeftCorner<3, 3>();
  m.cov_alpha = 0.5 * (m.cov_alpha + m.cov_alpha.transpose()).eval();
  m.cov_alpha_beta = cov.topRightCorner<3, 1>();
  m.var_beta = std::max(0.0, cov(3, 3));

  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> eig(m.cov_alpha);
  const Eigen::Vector3d lambda = eig.eigenvalues();
  const Eigen::Matrix3d& basis = eig.eigenvectors();
  const double cutoff = 1e-10 * std::max(lambda.maxCoeff(), 1e-30);
  Eigen::Vector3d tilde;
  m.n_null = 0;
  for (int i = 0; i < 3; ++i) {
    if (lambda(i) < cutoff) {
      ++m.n_null;
      tilde(i) = std::max(lambda(i), 0.0) + 1.0;
    } else {
      tilde(i) = lambda(i);
    }
  }
  // Null directions get unit variance; the rest keep the sample spectrum.
  m.sigma_tilde = basis * tilde.asDiagonal() * basis.transpose();
  m.sigma_tilde_sqrt = basis * tilde.cwiseSqrt().asDiagonal() * basis.transpose();
  m.sigma_tilde_inv = basis * tilde.cwiseInverse().asDiagonal() * basis.transpose();
  return m;
}

double delta(const Eigen::Vector3d& p, const EnsembleMoments& m)
{
  const double radicand = p.dot(m.cov_alpha * p) + 2.0 * p.dot(m.cov_alpha_beta) + m.var_beta;
  if (radicand < -1e-6) {
    throw NumericError("delta: negative variance " + std::to_string(radicand));
  }
  return std::sqrt(std::max(radicand, 0.0));
}

SchurOffsets schur_offsets(const EnsembleMoments& m)
{
  SchurOffsets s;
  s.h = -m.sigma_tilde_inv * m.cov_alpha_beta;
  const double k = m.var_beta - m.cov_alpha_beta.dot(m.sigma_tilde_inv * m.cov_alpha_beta);
  s.k = std::max(k, 0.0);
  return s;
}

double zeta(const Eigen::Vector3d& p, const EnsembleMoments& m, const SchurOffsets& s)
{
  return (m.sigma_tilde_sqrt * (p - s.h)).cwiseAbs().sum() + std::sqrt(3.0 * s.k);
}

RiskRows build_risk_rows(const EnsembleMoments& m, const SchurOffsets& s, double epsilon, int n_obs,
                         const Eigen::Ref<const Eigen::MatrixXd>& output_map)
{
  if (n_obs < 1) throw ArgumentError("build_risk_rows: n_obs must be >= 1");
  if (output_map.rows() != 3) throw DimensionError("build_risk_rows: output map must have 3 rows");
  if (!(epsilon > 0.0) || epsilon > 1.0) {
    throw ArgumentError("build_risk_rows: epsilon must lie in (0, 1]");
  }
  const auto nx = output_map.cols();
  RiskRows rows;
  rows.epsilon_n = epsilon / n_obs;
  rows.nu = risk_multiplier(rows.epsilon_n);

  const Eigen::MatrixXd root_c = m.sigma_tilde_sqrt * output_map;
  const Eigen::Vector3d root_h = m.sigma_tilde_sqrt * s.h;

  rows.lambda = Eigen::MatrixXd::Zero(7, nx + 3);
  rows.gamma.resize(7);
  rows.lambda.block(0, 0, 1, nx) = m.mean_alpha.transpose() * output_map;
  rows.lambda.block(0, nx, 1, 3).setConstant(rows.nu);
  rows.gamma(0) = -m.mean_beta - rows.nu * std::sqrt(3.0 * s.k);

  rows.lambda.block(1, 0, 3, nx) = root_c;
  rows.lambda.block(1, nx, 3, 3) = -Eigen::Matrix3d::Identity();
  rows.gamma.segment<3>(1) = root_h;

  rows.lambda.block(4, 0, 3, nx) = -root_c;
  rows.lambda.block(4, nx, 3, 3) = -Eigen::Matrix3d::Identity();
  rows.gamma.segment<3>(4) = -root_h;
  return rows;
}

}  // namespace ssampc
