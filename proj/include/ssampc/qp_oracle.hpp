#pragma once

// Brute-force reference solver for small strictly convex QPs, used to check
// the interior-point solver.

#include "ssampc/qp.hpp"

#include <cstdint>
#include <optional>
#include <random>

namespace ssampc {

/// Enumerates every active subset of the rows of A (bounds are ignored),
/// solves the equality-constrained KKT system for each, and returns the best
/// feasible point. Meant for n <= 8, m <= 12. Returns nullopt when no subset
/// yields a feasible point.
std::optional<Eigen::VectorXd> active_set_oracle(const QpProblem& problem, double feas_tol = 1e-9);

/// Random strictly convex QP with only A z <= b rows, feasible by construction.
QpProblem random_qp(std::mt19937_64& rng, int n, int m);

struct SelftestReport
{
  int cases = 0;
  int passed = 0;
  double max_error = 0.0;  // largest |z_ipm - z_oracle|_inf
};

SelftestReport run_solver_selftest(int cases, std::uint64_t seed, double tolerance = 1e-6);

}  // namespace ssampc
