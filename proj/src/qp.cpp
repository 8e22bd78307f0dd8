#include "ssampc/qp.hpp"

#include "ssampc/error.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

namespace ssampc {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

Eigen::VectorXd or_fill(const Eigen::VectorXd& v, Eigen::Index n, double fill)
{
  return v.size() == 0 ? Eigen::VectorXd::Constant(n, fill) : v;
}

// One-sided constraints g_i^T z <= h_i, stored by origin so that G v and
// G^T y never materialize G.
struct Inequalities
{
  const Eigen::MatrixXd* a = nullptr;
  std::vector<Eigen::Index> upper_rows, lower_rows, upper_vars, lower_vars;
  Eigen::VectorXd h;
  Eigen::Index n = 0;

  Eigen::Index size() const { return h.size(); }
  Eigen::Index rows_a() const { return a->rows(); }

  // Offsets of each block inside the stacked vector.
  Eigen::Index off_lr() const { return static_cast<Eigen::Index>(upper_rows.size()); }
  Eigen::Index off_uv() const { return off_lr() + static_cast<Eigen::Index>(lower_rows.size()); }
  Eigen::Index off_lv() const { return off_uv() + static_cast<Eigen::Index>(upper_vars.size()); }

  Eigen::VectorXd apply(const Eigen::VectorXd& v) const
  {
    Eigen::VectorXd out(size());
    const Eigen::VectorXd av = rows_a() > 0 ? Eigen::VectorXd(*a * v) : Eigen::VectorXd();
    Eigen::Index k = 0;
    for (auto r : upper_rows) out(k++) = av(r);
    for (auto r : lower_rows) out(k++) = -av(r);
    for (auto j : upper_vars) out(k++) = v(j);
    for (auto j : lower_vars) out(k++) = -v(j);
    return out;
  }

  // Net multiplier per row of A from a stacked vector.
  Eigen::VectorXd rows_net(const Eigen::VectorXd& y) const
  {
    Eigen::VectorXd net = Eigen::VectorXd::Zero(rows_a());
    Eigen::Index k = 0;
    for (auto r : upper_rows) net(r) += y(k++);
    for (auto r : lower_rows) net(r) -= y(k++);
    return net;
  }

  Eigen::VectorXd vars_net(const Eigen::VectorXd& y) const
  {
    Eigen::VectorXd net = Eigen::VectorXd::Zero(n);
    Eigen::Index k = off_uv();
    for (auto j : upper_vars) net(j) += y(k++);
    for (auto j : lower_vars) net(j) -= y(k++);
    return net;
  }

  Eigen::VectorXd apply_transpose(const Eigen::VectorXd& y) const
  {
    Eigen::VectorXd out = vars_net(y);
    if (rows_a() > 0) out.noalias() += a->transpose() * rows_net(y);
    return out;
  }

  // Adds G^T diag(d) G to m (lower triangle only is guaranteed).
  void add_weighted_gram(const Eigen::VectorXd& d, Eigen::MatrixXd& m) const
  {
    if (rows_a() > 0) {
      Eigen::VectorXd row_weight = Eigen::VectorXd::Zero(rows_a());
      Eigen::Index k = 0;
      for (auto r : upper_rows) row_weight(r) += d(k++);
      for (auto r : lower_rows) row_weight(r) += d(k++);
      const Eigen::MatrixXd scaled = row_weight.cwiseSqrt().asDiagonal() * (*a);
      m.selfadjointView<Eigen::Lower>().rankUpdate(scaled.transpose());
    }
    Eigen::Index k = off_uv();
    for (auto j : upper_vars) m(j, j) += d(k++);
    for (auto j : lower_vars) m(j, j) += d(k++);
  }
};

Inequalities collect(const QpProblem& p, const Eigen::VectorXd& b_lower, const Eigen::VectorXd& lb,
                     const Eigen::VectorXd& ub)
{
  Inequalities g;
  g.a = &p.A;
  g.n = p.q.size();
  std::vector<double> h;
  for (Eigen::Index r = 0; r < p.A.rows(); ++r) {
    if (std::isfinite(p.b(r))) {
      g.upper_rows.push_back(r);
      h.push_back(p.b(r));
    }
  }
  for (Eigen::Index r = 0; r < p.A.rows(); ++r) {
    if (std::isfinite(b_lower(r))) {
      g.lower_rows.push_back(r);
      h.push_back(-b_lower(r));
    }
  }
  for (Eigen::Index j = 0; j < g.n; ++j) {
    if (std::isfinite(ub(j))) {
      g.upper_vars.push_back(j);
      h.push_back(ub(j));
    }
  }
  for (Eigen::Index j = 0; j < g.n; ++j) {
    if (std::isfinite(lb(j))) {
      g.lower_vars.push_back(j);
      h.push_back(-lb(j));
    }
  }
  g.h = Eigen::Map<Eigen::VectorXd>(h.data(), static_cast<Eigen::Index>(h.size()));
  return g;
}

double max_step(const Eigen::VectorXd& v, const Eigen::VectorXd& dv)
{
  double alpha = 1.0;
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (dv(i) < 0.0) alpha = std::min(alpha, -v(i) / dv(i));
  }
  return alpha;
}

void validate(const QpProblem& p)
{
  const auto n = p.q.size();
  if (p.P.rows() != n || p.P.cols() != n) throw DimensionError("qp: P must be n x n");
  if (p.A.cols() != n && p.A.rows() > 0) throw DimensionError("qp: A must have n columns");
  if (p.b.size() != p.A.rows()) throw DimensionError("qp: b must have one entry per row of A");
  if (p.b_lower.size() != 0 && p.b_lower.size() != p.A.rows()) {
    throw DimensionError("qp: b_lower must be empty or match A");
  }
  if (p.lb.size() != 0 && p.lb.size() != n) throw DimensionError("qp: lb must be empty or length n");
  if (p.ub.size() != 0 && p.ub.size() != n) throw DimensionError("qp: ub must be empty or length n");
  if (!p.P.allFinite() || !p.q.allFinite() || !p.A.allFinite()) {
    throw NumericError("qp: non-finite problem data");
  }
  const double asym = (p.P - p.P.transpose()).cwiseAbs().maxCoeff();
  if (n > 0 && asym > 1e-10 * std::max(1.0, p.P.cwiseAbs().maxCoeff())) {
    throw ArgumentError("qp: P is not symmetric");
  }
  if (p.lb.size() != 0 && p.ub.size() != 0 && (p.lb.array() > p.ub.array()).any()) {
    throw ArgumentError("qp: lb > ub");
  }
}

struct Core
{
  Eigen::VectorXd z, y;  // primal, stacked multipliers
  int iterations = 0;
  bool converged = false;
  bool certificate = false;
};

// Interior-point iterations on P_eff (already regularized).
Core interior_point(const Eigen::MatrixXd& p_eff, const Eigen::VectorXd& q, const Inequalities& g,
                    const std::optional<Eigen::VectorXd>& warm, const QpSettings& s, int max_iter)
{
  const Eigen::Index n = q.size();
  const Eigen::Index m = g.size();
  Core out;
  out.z = warm && warm->size() == n && warm->allFinite() ? *warm : Eigen::VectorXd::Zero(n);

  const double q_scale = 1.0 + q.cwiseAbs().maxCoeff();
  const double h_scale = 1.0 + (m > 0 ? g.h.cwiseAbs().maxCoeff() : 0.0);

  if (m == 0) {
    Eigen::LDLT<Eigen::MatrixXd> ldlt(p_eff);
    out.z = ldlt.solve(-q);
    out.y.resize(0);
    out.converged = out.z.allFinite();
    out.iterations = 1;
    return out;
  }

  Eigen::VectorXd w = (g.h - g.apply(out.z)).cwiseMax(1.0);
  Eigen::VectorXd lam = Eigen::VectorXd::Ones(m);
  Eigen::MatrixXd kkt(n, n);
  int certificate_hits = 0;

  for (int it = 0; it < max_iter; ++it) {
    out.iterations = it + 1;
    const Eigen::VectorXd gz = g.apply(out.z);
    const Eigen::VectorXd rd = p_eff * out.z + q + g.apply_transpose(lam);
    const Eigen::VectorXd rp = gz + w - g.h;
    const double mu = w.dot(lam) / static_cast<double>(m);

    // Stopping test on the true slack h - G z.
    const Eigen::VectorXd slack = g.h - gz;
    const double viol = (-slack).cwiseMax(0.0).maxCoeff();
    const double comp = (lam.cwiseProduct(slack)).cwiseAbs().maxCoeff();
    const double obj_scale = 1.0 + std::abs(0.5 * out.z.dot(p_eff * out.z) + q.dot(out.z));
    if (rd.cwiseAbs().maxCoeff() <= s.tolerance * q_scale && viol <= s.tolerance * h_scale &&
        comp <= s.tolerance * obj_scale && mu <= s.tolerance * obj_scale) {
      out.converged = true;
      out.y = lam;
      return out;
    }

    // Primal infeasibility certificate: lam >= 0, G^T lam ~ 0, h^T lam < 0.
    const double lam_norm = lam.cwiseAbs().maxCoeff();
    if (lam_norm > 1e6 * q_scale) {
      const Eigen::VectorXd lhat = lam / lam_norm;
      const Eigen::VectorXd gt = g.apply_transpose(lhat);
      const double dual_res = (gt - p_eff * out.z / lam_norm).cwiseAbs().maxCoeff();
      if (dual_res <= 1e-6 && g.h.dot(lhat) < -1e-9 * h_scale) {
        if (++certificate_hits >= s.certificate_patience) {
          out.certificate = true;
          out.y = lam;
          return out;
        }
      } else {
        certificate_hits = 0;
      }
    } else {
      certificate_hits = 0;
    }

    const Eigen::VectorXd d = lam.cwiseQuotient(w);
    kkt = p_eff;
    g.add_weighted_gram(d, kkt);
    Eigen::LLT<Eigen::MatrixXd, Eigen::Lower> llt(kkt);
    if (llt.info() != Eigen::Success) {
      kkt.diagonal().array() += 1e-10 * (1.0 + kkt.diagonal().cwiseAbs().maxCoeff());
      llt.compute(kkt);
      if (llt.info() != Eigen::Success) break;
    }

    auto direction = [&](const Eigen::VectorXd& rc, Eigen::VectorXd& dz, Eigen::VectorXd& dl,
                         Eigen::VectorXd& dw) {
      const Eigen::VectorXd rc_w = rc.cwiseQuotient(w);
      dz = llt.solve(-rd - g.apply_transpose(d.cwiseProduct(rp) - rc_w));
      dl = d.cwiseProduct(g.apply(dz) + rp) - rc_w;
      dw = (-rc - w.cwiseProduct(dl)).cwiseQuotient(lam);
    };

    Eigen::VectorXd dz, dl, dw;
    const Eigen::VectorXd rc_aff = w.cwiseProduct(lam);
    direction(rc_aff, dz, dl, dw);
    const double a_aff = std::min(max_step(w, dw), max_step(lam, dl));
    const double mu_aff = (w + a_aff * dw).dot(lam + a_aff * dl) / static_cast<double>(m);
    const double sigma = std::pow(std::clamp(mu_aff / mu, 0.0, 1.0), 3);

    const Eigen::VectorXd rc =
      rc_aff + dw.cwiseProduct(dl) - Eigen::VectorXd::Constant(m, sigma * mu);
    direction(rc, dz, dl, dw);
    const double alpha = std::min(1.0, 0.99 * std::min(max_step(w, dw), max_step(lam, dl)));

    out.z += alpha * dz;
    w += alpha * dw;
    lam += alpha * dl;
    w = w.cwiseMax(1e-300);
    lam = lam.cwiseMax(1e-300);
    if (!out.z.allFinite() || !lam.allFinite()) break;
  }
  out.y = lam;
  return out;
}

bool needs_regularization(const Eigen::MatrixXd& p)
{
  if (p.size() == 0) return false;
  if (p.diagonal().minCoeff() < 1e-9) return true;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(p, Eigen::EigenvaluesOnly);
  return eig.eigenvalues().minCoeff() < 1e-9;
}

// min t  s.t.  G_rows z - t <= h_rows, box kept hard, t >= 0.
bool phase_one_infeasible(const QpProblem& p, const Eigen::VectorXd& b_lower, const Eigen::VectorXd& lb,
                          const Eigen::VectorXd& ub, const QpSettings& s)
{
  const auto n = p.q.size();
  const auto m = p.A.rows();
  QpProblem lp;
  lp.P = Eigen::MatrixXd::Identity(n + 1, n + 1) * 1e-10;
  lp.q = Eigen::VectorXd::Zero(n + 1);
  lp.q(n) = 1.0;
  lp.A.resize(m, n + 1);
  lp.A.leftCols(n) = p.A;
  lp.A.col(n).setConstant(-1.0);
  lp.b = p.b;
  // Lower rows become -A z - t <= -b_lower; expressed as b_lower <= A z + t.
  Eigen::MatrixXd lower_a(m, n + 1);
  lower_a.leftCols(n) = p.A;
  lower_a.col(n).setConstant(1.0);
  std::vector<Eigen::Index> lower_idx;
  for (Eigen::Index r = 0; r < m; ++r) {
    if (std::isfinite(b_lower(r))) lower_idx.push_back(r);
  }
  const auto extra = static_cast<Eigen::Index>(lower_idx.size());
  Eigen::MatrixXd a_all(m + extra, n + 1);
  a_all.topRows(m) = lp.A;
  Eigen::VectorXd b_all(m + extra), bl_all(m + extra);
  b_all.head(m) = lp.b;
  bl_all.head(m).setConstant(-kInf);
  for (Eigen::Index e = 0; e < extra; ++e) {
    a_all.row(m + e) = lower_a.row(lower_idx[static_cast<std::size_t>(e)]);
    b_all(m + e) = kInf;
    bl_all(m + e) = b_lower(lower_idx[static_cast<std::size_t>(e)]);
  }
  lp.A = a_all;
  lp.b = b_all;
  lp.b_lower = bl_all;
  lp.lb.resize(n + 1);
  lp.ub.resize(n + 1);
  lp.lb.head(n) = lb;
  lp.ub.head(n) = ub;
  lp.lb(n) = 0.0;
  lp.ub(n) = kInf;

  const Inequalities g = collect(lp, lp.b_lower, lp.lb, lp.ub);
  QpSettings inner = s;
  inner.certificate_patience = std::numeric_limits<int>::max();
  const Core core = interior_point(lp.P, lp.q, g, std::nullopt, inner, 200);
  const double h_scale = 1.0 + (g.size() > 0 ? g.h.cwiseAbs().maxCoeff() : 0.0);
  return core.z(n) > 1e-7 * h_scale;
}

}  // namespace

double QpProblem::objective(const Eigen::Ref<const Eigen::VectorXd>& z) const
{
  return 0.5 * z.dot(P * z) + q.dot(z);
}

std::string_view to_string(QpStatus status)
{
  switch (status) {
    case QpStatus::optimal: return "optimal";
    case QpStatus::infeasible: return "infeasible";
    case QpStatus::max_iter: return "max_iter";
  }
  return "unknown";
}

KktResiduals kkt_residuals(const QpProblem& p, const Eigen::Ref<const Eigen::VectorXd>& z,
                           const Eigen::Ref<const Eigen::VectorXd>& row_mult,
                           const Eigen::Ref<const Eigen::VectorXd>& box_mult)
{
  const auto n = p.q.size();
  const auto m = p.A.rows();
  const Eigen::VectorXd bl = or_fill(p.b_lower, m, -kInf);
  const Eigen::VectorXd lb = or_fill(p.lb, n, -kInf);
  const Eigen::VectorXd ub = or_fill(p.ub, n, kInf);

  KktResiduals r;
  Eigen::VectorXd grad = p.P * z + p.q + box_mult;
  if (m > 0) grad.noalias() += p.A.transpose() * row_mult;
  r.stationarity = n > 0 ? grad.cwiseAbs().maxCoeff() : 0.0;

  auto pair = [&](double value, double lo, double hi, double mult) {
    r.primal = std::max({r.primal, value - hi, lo - value});
    double c = 0.0;
    if (mult > 0.0) c = std::isfinite(hi) ? mult * std::abs(hi - value) : kInf;
    if (mult < 0.0) c = std::isfinite(lo) ? -mult * std::abs(value - lo) : kInf;
    r.complementarity = std::max(r.complementarity, c);
  };
  if (m > 0) {
    const Eigen::VectorXd az = p.A * z;
    for (Eigen::Index i = 0; i < m; ++i) pair(az(i), bl(i), p.b(i), row_mult(i));
  }
  for (Eigen::Index j = 0; j < n; ++j) pair(z(j), lb(j), ub(j), box_mult(j));
  r.primal = std::max(r.primal, 0.0);
  return r;
}

QpSolution solve(const QpProblem& problem, const std::optional<Eigen::VectorXd>& warm_start, int max_iter)
{
  QpSettings s;
  s.max_iter = max_iter;
  return solve(problem, warm_start, s);
}

QpSolution solve(const QpProblem& problem, const std::optional<Eigen::VectorXd>& warm_start,
                 const QpSettings& settings)
{
  validate(problem);
  const auto n = problem.q.size();
  const auto m = problem.A.rows();
  const Eigen::VectorXd bl = or_fill(problem.b_lower, m, -kInf);
  const Eigen::VectorXd lb = or_fill(problem.lb, n, -kInf);
  const Eigen::VectorXd ub = or_fill(problem.ub, n, kInf);

  QpSolution sol;
  Eigen::MatrixXd p_eff = problem.P;
  if (needs_regularization(problem.P)) {
    p_eff.diagonal().array() += settings.regularization;
    sol.regularized = true;
  }

  const Inequalities g = collect(problem, bl, lb, ub);
  const Core core = interior_point(p_eff, problem.q, g, warm_start, settings, settings.max_iter);
  sol.z_star = core.z;
  sol.iterations = core.iterations;
  sol.row_multipliers = g.rows_net(core.y.size() ? core.y : Eigen::VectorXd::Zero(g.size()));
  sol.box_multipliers = g.vars_net(core.y.size() ? core.y : Eigen::VectorXd::Zero(g.size()));
  sol.objective = problem.objective(sol.z_star);
  sol.kkt_residuals = kkt_residuals(problem, sol.z_star, sol.row_multipliers, sol.box_multipliers);

  if (core.converged) {
    sol.status = QpStatus::optimal;
    return sol;
  }
  sol.phase_one = true;
  sol.status = phase_one_infeasible(problem, bl, lb, ub, settings) ? QpStatus::infeasible
                                                                    : QpStatus::max_iter;
  return sol;
}

}  // namespace ssampc
