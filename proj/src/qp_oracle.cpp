#include "ssampc/qp_oracle.hpp"

#include <Eigen/LU>

#include <algorithm>
#include <limits>
#include <vector>

namespace ssampc {

std::optional<Eigen::VectorXd> active_set_oracle(const QpProblem& p, double feas_tol)
{
  const auto n = p.q.size();
  const auto m = p.A.rows();
  std::optional<Eigen::VectorXd> best;
  double best_obj = std::numeric_limits<double>::infinity();

  for (std::uint32_t mask = 0; mask < (1u << m); ++mask) {
    std::vector<Eigen::Index> active;
    for (Eigen::Index r = 0; r < m; ++r) {
      if (mask & (1u << r)) active.push_back(r);
    }
    const auto k = static_cast<Eigen::Index>(active.size());
    if (k > n) continue;

    Eigen::MatrixXd kkt = Eigen::MatrixXd::Zero(n + k, n + k);
    Eigen::VectorXd rhs(n + k);
    kkt.topLeftCorner(n, n) = p.P;
    rhs.head(n) = -p.q;
    for (Eigen::Index i = 0; i < k; ++i) {
      const auto r = active[static_cast<std::size_t>(i)];
      kkt.block(n + i, 0, 1, n) = p.A.row(r);
      kkt.block(0, n + i, n, 1) = p.A.row(r).transpose();
      rhs(n + i) = p.b(r);
    }
    Eigen::FullPivLU<Eigen::MatrixXd> lu(kkt);
    if (!lu.isInvertible()) continue;
    const Eigen::VectorXd z = lu.solve(rhs).head(n);
    if (m > 0 && ((p.A * z - p.b).array() > feas_tol * (1.0 + p.b.cwiseAbs().maxCoeff())).any()) continue;
    const double obj = p.objective(z);
    if (obj < best_obj) {
      best_obj = obj;
      best = z;
    }
  }
  return best;
}

QpProblem random_qp(std::mt19937_64& rng, int n, int m)
{
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  QpProblem p;
  const Eigen::MatrixXd f = Eigen::MatrixXd::NullaryExpr(n, n, [&] { return gauss(rng); });
  p.P = f * f.transpose() + 0.1 * Eigen::MatrixXd::Identity(n, n);
  p.q = Eigen::VectorXd::NullaryExpr(n, [&] { return 3.0 * gauss(rng); });
  p.A = Eigen::MatrixXd::NullaryExpr(m, n, [&] { return gauss(rng); });
  const Eigen::VectorXd z0 = Eigen::VectorXd::NullaryExpr(n, [&] { return gauss(rng); });
  p.b = p.A * z0 + Eigen::VectorXd::NullaryExpr(m, [&] { return unit(rng); });
  return p;
}

SelftestReport run_solver_selftest(int cases, std::uint64_t seed, double tolerance)
{
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> dim_n(1, 6);
  std::uniform_int_distribution<int> dim_m(0, 8);
  SelftestReport report;
  for (int c = 0; c < cases; ++c) {
    const QpProblem p = random_qp(rng, dim_n(rng), dim_m(rng));
    const auto reference = active_set_oracle(p);
    const QpSolution sol = solve(p);
    ++report.cases;
    if (!reference || sol.status != QpStatus::optimal) {
      report.max_error = std::numeric_limits<double>::infinity();
      continue;
    }
    const double err = (sol.z_star - *reference).cwiseAbs().maxCoeff();
    report.max_error = std::max(report.max_error, err);
    if (err <= tolerance) ++report.passed;
  }
  return report;
}

}  // namespace ssampc
