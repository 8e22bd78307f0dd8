#pragma once

// Dense convex QP
//
//   minimize    1/2 z^T P z + q^T z
//   subject to  b_lower <= A z <= b,   lb <= z <= ub
//
// solved with a Mehrotra predictor-corrector interior-point method. Infinite
// bounds are allowed everywhere; an empty b_lower/lb/ub means "unbounded".

#include <Eigen/Dense>

#include <optional>
#include <string_view>

namespace ssampc {

struct QpProblem
{
  Eigen::MatrixXd P;
  Eigen::VectorXd q;
  Eigen::MatrixXd A;        // m x n
  Eigen::VectorXd b;        // A z <= b, entries may be +inf
  Eigen::VectorXd b_lower;  // optional, A z >= b_lower, entries may be -inf
  Eigen::VectorXd lb;       // optional
  Eigen::VectorXd ub;       // optional

  int num_variables() const { return static_cast<int>(q.size()); }
  int num_rows() const { return static_cast<int>(A.rows()); }
  double objective(const Eigen::Ref<const Eigen::VectorXd>& z) const;
};

enum class QpStatus { optimal, infeasible, max_iter };

std::string_view to_string(QpStatus status);

struct KktResiduals
{
  double stationarity = 0.0;     // ||P z + q + multipliers||_inf
  double primal = 0.0;           // largest constraint violation
  double complementarity = 0.0;  // max |multiplier * slack|
};

struct QpSolution
{
  Eigen::VectorXd z_star;
  QpStatus status = QpStatus::max_iter;
  KktResiduals kkt_residuals;
  int iterations = 0;
  double objective = 0.0;
  bool regularized = false;
  bool phase_one = false;  // infeasibility was confirmed (or refuted) by a phase-1 LP
  Eigen::VectorXd row_multipliers;  // net multiplier per row of A (upper minus lower)
  Eigen::VectorXd box_multipliers;  // net multiplier per variable bound
};

struct QpSettings
{
  int max_iter = 100;
  double tolerance = 1e-9;      // relative stopping tolerance
  double regularization = 1e-8; // added to P when its smallest eigenvalue < 1e-9
  int certificate_patience = 5; // consecutive certificate hits before the phase-1 check
};

/// Throws DimensionError on inconsistent shapes and ArgumentError when
/// lb > ub or P is not symmetric.
QpSolution solve(const QpProblem& problem, const std::optional<Eigen::VectorXd>& warm_start = {},
                 int max_iter = 100);

QpSolution solve(const QpProblem& problem, const std::optional<Eigen::VectorXd>& warm_start,
                 const QpSettings& settings);

/// KKT residuals of a candidate primal/dual pair against the original problem.
KktResiduals kkt_residuals(const QpProblem& problem, const Eigen::Ref<const Eigen::VectorXd>& z,
                           const Eigen::Ref<const Eigen::VectorXd>& row_multipliers,
                           const Eigen::Ref<const Eigen::VectorXd>& box_multipliers);

}  // namespace ssampc
