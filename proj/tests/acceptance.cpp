// End-to-end acceptance suite. Prints one PASS/FAIL line per criterion and
// exits non-zero when any criterion fails.

#include "ssampc/qp_oracle.hpp"
#include "ssampc/risk.hpp"
#include "ssampc/sim.hpp"
#include "ssampc/ssa.hpp"

#include "CLI11.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <iterator>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

using namespace ssampc;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0)
{
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct Outcome
{
  bool pass = true;
  std::string detail;
};

std::string fmt(const char* f, auto... args)
{
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

// ------------------------------------------------------------------ 1

Outcome ssa_exactness()
{
  constexpr double kTol = 1e-6;
  constexpr double kBudget = 5.0;
  constexpr int kWindow = 24;
  constexpr int kLength = 100;
  constexpr int kHorizon = 10;
  const auto t0 = Clock::now();

  struct Case
  {
    const char* name;
    int rank;
    double (*f)(double);
  };
  const Case cases[] = {
    {"line", 2, [](double t) { return 2.0 + 0.3 * t; }},
    {"exponential", 1, [](double t) { return 1.5 * std::pow(1.02, t); }},
    {"decay", 1, [](double t) { return 4.0 * std::exp(-0.03 * t); }},
    {"sinusoid", 2, [](double t) { return 3.0 * std::sin(2.0 * std::numbers::pi * t / 12.5 + 0.4); }},
    {"damped sinusoid", 2,
     [](double t) { return std::exp(-0.01 * t) * std::cos(2.0 * std::numbers::pi * t / 9.0 - 1.0); }},
    {"line plus sinusoid", 4,
     [](double t) { return 1.0 - 0.05 * t + 0.7 * std::sin(2.0 * std::numbers::pi * t / 17.0); }},
  };

  Outcome out;
  double worst_lrf = 0.0, worst_fc = 0.0, worst_fixed = 0.0, worst_complete = 0.0;
  for (const Case& c : cases) {
    Eigen::VectorXd y(kLength), truth(kHorizon);
    for (int t = 0; t < kLength; ++t) y(t) = c.f(t);
    for (int h = 0; h < kHorizon; ++h) truth(h) = c.f(kLength + h);
    const double scale = y.cwiseAbs().maxCoeff();

    const SpectralModel m = spectral_decompose(build_hankel(y, kWindow));
    const LrfModel lrf = lrf_coefficients(m, c.rank);
    const auto order = lrf.phi.size();
    double lrf_err = 0.0;
    for (Eigen::Index n = order; n < kLength; ++n) {
      double pred = 0.0;
      for (Eigen::Index j = 0; j < order; ++j) pred += lrf.phi(j) * y(n - 1 - j);
      lrf_err = std::max(lrf_err, std::abs(pred - y(n)) / scale);
    }
    const Eigen::VectorXd fc = forecast(y, lrf, kHorizon);
    const double fc_err = (fc - truth).cwiseAbs().maxCoeff() / truth.cwiseAbs().maxCoeff();

    const double fixed = (hankelize(build_hankel(y, kWindow).matrix) - y).cwiseAbs().maxCoeff() / scale;
    Eigen::VectorXd sum = Eigen::VectorXd::Zero(kLength);
    for (int p = 0; p < kWindow; ++p) sum += elementary_reconstruction(m, p);
    const double complete = (sum - y).cwiseAbs().maxCoeff() / scale;

    worst_lrf = std::max(worst_lrf, lrf_err);
    worst_fc = std::max(worst_fc, fc_err);
    worst_fixed = std::max(worst_fixed, fixed);
    worst_complete = std::max(worst_complete, complete);
    if (lrf_err > kTol || fc_err > kTol || fixed > kTol || complete > kTol) {
      out.pass = false;
      out.detail += fmt("%s fails (lrf %.2e, forecast %.2e, fixed point %.2e, completeness %.2e); ", c.name,
                        lrf_err, fc_err, fixed, complete);
    }
  }

  // Completeness on a full-rank noisy series.
  std::mt19937_64 rng(11);
  std::normal_distribution<double> noise(0.0, 1.0);
  Eigen::VectorXd r(kLength);
  for (auto& v : r) v = noise(rng);
  const SpectralModel rm = spectral_decompose(build_hankel(r, kWindow));
  const double rank_full = (reconstruct_leading(rm, kWindow) - r).cwiseAbs().maxCoeff() / r.cwiseAbs().maxCoeff();
  worst_complete = std::max(worst_complete, rank_full);
  if (rank_full > kTol) {
    out.pass = false;
    out.detail += fmt("noise completeness %.2e; ", rank_full);
  }

  const double elapsed = seconds_since(t0);
  if (elapsed >= kBudget) out.pass = false;
  out.detail += fmt("max rel err: recurrence %.1e, 10-step forecast %.1e, fixed point %.1e, completeness %.1e "
                    "(tol %.0e); %.3f s (budget %.0f s)",
                    worst_lrf, worst_fc, worst_fixed, worst_complete, kTol, elapsed, kBudget);
  return out;
}

// ------------------------------------------------------------------ 2

Outcome lemma_property()
{
  constexpr int kDraws = 2000;
  constexpr double kDeltaTol = 1e-10;
  constexpr double kZetaSlack = 1e-9;
  constexpr double kBudget = 10.0;
  const auto t0 = Clock::now();

  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::uniform_int_distribution<int> members(2, 60);
  auto vec = [&] { return Eigen::Vector3d(u(rng), u(rng), u(rng)); };

  Outcome out;
  double worst_delta = 0.0, min_k = INFINITY, worst_gap = -INFINITY;
  int failures = 0;
  for (int d = 0; d < kDraws; ++d) {
    const int n = members(rng);
    const Eigen::Vector3d p_bar = 5.0 * vec();
    const Eigen::Vector3d center = p_bar + 3.0 * vec();
    // Every fourth draw spreads the forecasts along a line or a plane only.
    const int spread_dims = d % 4 == 0 ? 1 + (d / 4) % 2 : 3;
    const Eigen::Vector3d dir1 = vec(), dir2 = vec();
    std::vector<AvoidanceCoeff> coeffs;
    for (int j = 0; j < n; ++j) {
      Eigen::Vector3d y = center;
      if (spread_dims == 3) {
        y += 0.8 * vec();
      } else {
        y += u(rng) * dir1;
        if (spread_dims == 2) y += u(rng) * dir2;
      }
      coeffs.push_back(linearize_avoidance(p_bar, y, 0.6 + 0.3 * (u(rng) + 1.0)));
    }
    const EnsembleMoments m = ensemble_moments(coeffs);
    const SchurOffsets s = schur_offsets(m);
    const Eigen::Vector3d p = p_bar + 4.0 * vec();

    double mean = 0.0;
    for (const auto& c : coeffs) mean += c.evaluate(p);
    mean /= n;
    double ss = 0.0;
    for (const auto& c : coeffs) ss += (c.evaluate(p) - mean) * (c.evaluate(p) - mean);
    const double direct = std::sqrt(ss / (n - 1));

    const double dl = delta(p, m);
    const double zt = zeta(p, m, s);
    worst_delta = std::max(worst_delta, std::abs(dl - direct));
    min_k = std::min(min_k, s.k);
    worst_gap = std::max(worst_gap, dl - zt);
    if (!(std::abs(dl - direct) <= kDeltaTol) || !(s.k >= 0.0) || !(dl <= zt + kZetaSlack)) ++failures;
  }
  const double elapsed = seconds_since(t0);
  out.pass = failures == 0 && elapsed < kBudget;
  out.detail = fmt("%d draws, %d failing; max |Delta - std| %.1e (tol %.0e), min k %.2e, max Delta - zeta %.2e "
                   "(slack %.0e); %.3f s (budget %.0f s)",
                   kDraws, failures, worst_delta, kDeltaTol, min_k, worst_gap, kZetaSlack, elapsed, kBudget);
  return out;
}

// ------------------------------------------------------------------ 3

Outcome cantelli_coverage()
{
  constexpr int kSamples = 100000;
  const double eps_levels[] = {0.05, 0.25, 0.5};
  std::mt19937_64 rng(77);
  Outcome out;
  for (double eps : eps_levels) {
    const double nu = risk_multiplier(eps);
    const double sigma = 0.7;
    const double mu = -nu * sigma;  // boundary of E[z] + nu sqrt(Var z) <= 0
    const double bound = eps + 3.0 * std::sqrt(eps * (1.0 - eps) / kSamples);

    std::normal_distribution<double> gauss(mu, sigma);
    const double half = std::sqrt(3.0) * sigma;
    std::uniform_real_distribution<double> unif(mu - half, mu + half);
    // Cantelli-extremal two-point law: an atom at 0 with mass eps.
    const double far = mu / (1.0 - eps);
    std::bernoulli_distribution at_zero(eps);

    int hit_g = 0, hit_u = 0, hit_t = 0;
    for (int i = 0; i < kSamples; ++i) {
      hit_g += gauss(rng) >= 0.0;
      hit_u += unif(rng) >= 0.0;
      hit_t += (at_zero(rng) ? 0.0 : far) >= 0.0;
    }
    const double pg = double(hit_g) / kSamples, pu = double(hit_u) / kSamples, pt = double(hit_t) / kSamples;
    const bool ok = pg <= bound && pu <= bound && pt <= bound;
    out.pass = out.pass && ok;
    out.detail += fmt("eps %.2f: P(z>=0) gauss %.4f uniform %.4f two-point %.4f (bound %.4f)%s; ", eps, pg, pu, pt,
                      bound, ok ? "" : " VIOLATED");
  }
  out.detail += fmt("%d samples each", kSamples);
  return out;
}

// ------------------------------------------------------------------ 4

Outcome qp_solver()
{
  constexpr int kCases = 200;
  constexpr double kTol = 1e-6;
  constexpr int kEpisodes = 5;
  const SelftestReport st = run_solver_selftest(kCases, 4242, kTol);

  double stat = 0.0, primal = 0.0;
  int subproblems = 0;
  const Scenario s = builtin_scenario("case1");
  for (double eps : {0.05, 0.25, 1.0}) {
    Scenario e = s;
    e.planner.epsilon = eps;
    for (int run = 0; run < kEpisodes; ++run) {
      const EpisodeResult r = run_episode(e, run);
      stat = std::max(stat, r.max_kkt_stationarity);
      primal = std::max(primal, r.max_kkt_primal);
      subproblems += r.n_constrained;
    }
  }
  Outcome out;
  out.pass = st.passed == st.cases && stat <= kTol && primal <= kTol;
  out.detail = fmt("oracle agreement %d/%d (max err %.1e, tol %.0e); case-1 planner KKT over %d constrained updates: "
                   "stationarity %.1e, primal %.1e (tol %.0e)",
                   st.passed, st.cases, st.max_error, kTol, subproblems, stat, primal, kTol);
  return out;
}

// ------------------------------------------------------------------ 5

Outcome over_approximation()
{
  constexpr int kPoints = 10000;
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::uniform_real_distribution<double> tiny(0.0, 1e-6);
  auto vec = [&] { return Eigen::Vector3d(u(rng), u(rng), u(rng)); };

  int violations = 0, tested = 0;
  double worst = INFINITY;
  while (tested < kPoints) {
    const Eigen::Vector3d p_bar = 10.0 * vec();
    const Eigen::Vector3d y_hat = p_bar + 4.0 * vec();
    if ((p_bar - y_hat).norm() < 1e-3) continue;
    const double r_bar = 0.2 + 2.0 * (u(rng) + 1.0);
    const AvoidanceCoeff c = linearize_avoidance(p_bar, y_hat, r_bar);
    for (int i = 0; i < 10 && tested < kPoints; ++i) {
      Eigen::Vector3d p;
      if (i % 2 == 0) {
        // Close to the tangent point: project onto the plane, then step inside.
        const Eigen::Vector3d q = y_hat + r_bar * vec();
        p = q - (c.evaluate(q) / c.alpha.squaredNorm()) * c.alpha;
        p -= tiny(rng) * c.alpha.normalized();
      } else {
        p = y_hat + 3.0 * r_bar * vec();
      }
      if (c.evaluate(p) > 0.0) continue;
      ++tested;
      const double gap = (p - y_hat).norm() - r_bar;
      worst = std::min(worst, gap / r_bar);
      if (gap < -1e-12 * r_bar) ++violations;
    }
  }
  Outcome out;
  out.pass = violations == 0;
  out.detail = fmt("%d points with alpha^T p + beta <= 0, %d inside the sphere; min (|p - y| - r) / r = %.2e",
                   tested, violations, worst);
  return out;
}

// ------------------------------------------------------------------ 6

Outcome monte_carlo_trends(int runs, int jobs)
{
  constexpr double kMinSuccess = 98.0;
  constexpr double kAlpha = 0.05;
  constexpr double kBudget = 1800.0;
  const std::vector<double> eps = {0.05, 0.25, 0.5, 1.0};
  const auto t0 = Clock::now();

  Outcome out;
  for (const char* name : {"case1", "case2", "case3"}) {
    const Scenario s = builtin_scenario(name);
    const MonteCarloReport rep = monte_carlo(s, runs, eps, jobs);
    std::vector<std::vector<double>> groups;
    for (const auto& row : rep.rows) groups.push_back(row.d_min);
    const TrendTest tt = decreasing_trend_test(groups);

    bool a = true;
    for (const auto& row : rep.rows) {
      if (row.epsilon <= 0.25 && !(row.pct_success >= kMinSuccess)) a = false;
    }
    const double succ_025 = rep.rows[1].pct_success, succ_1 = rep.rows[3].pct_success;
    const bool b = tt.p_value < kAlpha;
    const bool c = succ_1 < succ_025;
    out.pass = out.pass && a && b && c;

    std::ostringstream line;
    line << "\n    " << name << ": %Succ";
    for (const auto& row : rep.rows) line << fmt(" %.1f", row.pct_success);
    line << " | %Feas runs";
    for (const auto& row : rep.rows) line << fmt(" %.0f", row.pct_feasible_runs);
    line << " | mean d_min";
    for (const auto& row : rep.rows) line << fmt(" %.3f", row.mean_dmin);
    line << fmt(" | trend p %.2e", tt.p_value);
    line << " | (a) " << (a ? "ok" : "FAIL") << " (b) " << (b ? "ok" : "FAIL") << " (c) " << (c ? "ok" : "FAIL");
    out.detail += line.str();
    std::cerr << "  criterion 6: " << name << " done after " << fmt("%.0f", seconds_since(t0)) << " s\n";
  }
  const double elapsed = seconds_since(t0);
  if (elapsed > kBudget) out.pass = false;
  out.detail = fmt("%d runs x 4 eps per case, %.0f s (budget %.0f s); (a) %%Succ >= %.0f for eps <= 0.25, "
                   "(b) trend p < %.2f, (c) %%Succ(1) < %%Succ(0.25)",
                   runs, elapsed, kBudget, kMinSuccess, kAlpha) +
               out.detail;
  return out;
}

// ------------------------------------------------------------------ 7

Outcome planner_timing()
{
  constexpr double kBudget = 0.1;
  const Scenario s = builtin_scenario("case1");
  const double horizon = s.t_intro + (s.bootstrap.n_train - 1) * s.dt() + s.cross_delay_max + s.end_margin + 1.0;
  const auto blind = blind_track(s, horizon);
  const auto t0 = Clock::now();
  const ObstacleTrack track = prepare_obstacle(s, 0, blind);
  const double forecast_total = seconds_since(t0);
  int n_fc = 0;
  for (const auto& f : track.forecasts) n_fc += f.size() > 0;
  const double per_forecast = n_fc > 0 ? forecast_total / n_fc : 0.0;
  const EpisodeResult r = run_episode(s, 0, track);
  const double per_update = per_forecast + r.mean_plan_time;
  Outcome out;
  out.pass = per_update <= kBudget && r.n_constrained > 0;
  out.detail = fmt("case-1 run 0: %d constrained updates, plan %.4f s + ensemble %.4f s = %.4f s per update "
                   "(budget %.1f s); all updates plan-only mean %.4f s",
                   r.n_constrained, r.mean_plan_time, per_forecast, per_update, kBudget, r.mean_plan_time_all);
  return out;
}

// ------------------------------------------------------------------ 8

Outcome determinism(const std::string& cli)
{
  Outcome out;
  if (cli.empty() || !fs::exists(cli)) {
    out.pass = false;
    out.detail = "command-line tool not found: '" + cli + "'";
    return out;
  }
  const fs::path base = fs::temp_directory_path() / fmt("ssampc_accept_%d", static_cast<int>(::getpid()));
  fs::remove_all(base);
  std::vector<std::string> contents;
  for (int rep = 0; rep < 2; ++rep) {
    const fs::path dir = base / std::to_string(rep);
    const std::string cmd = "\"" + cli + "\" -q simulate --case case1 --epsilon 0.25 --seed 99 --run-index 7 --out \"" +
                            dir.string() + "\"";
    if (std::system(cmd.c_str()) != 0) {
      out.pass = false;
      out.detail = "simulate returned non-zero";
      fs::remove_all(base);
      return out;
    }
    std::ifstream in(dir / "trajectory.csv", std::ios::binary);
    contents.emplace_back(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
  }
  fs::remove_all(base);
  out.pass = !contents[0].empty() && contents[0] == contents[1];
  out.detail = fmt("two simulate runs (seed 99, run 7): %zu and %zu bytes, %s", contents[0].size(),
                   contents[1].size(), out.pass ? "identical" : "DIFFERENT");
  return out;
}

}  // namespace

int main(int argc, char** argv)
{
  CLI::App app{"Acceptance suite"};
  std::string cli;
  int runs = 100;
  int jobs = 0;
  std::vector<int> only;
  app.add_option("--cli", cli, "Path to the ssampc executable");
  app.add_option("--runs", runs, "Monte-Carlo runs per risk level");
  app.add_option("--jobs", jobs, "Monte-Carlo worker threads (0 = all cores)");
  app.add_option("--only", only, "Run only these criteria")->delimiter(',');
  CLI11_PARSE(app, argc, argv);

  auto selected = [&](int k) { return only.empty() || std::find(only.begin(), only.end(), k) != only.end(); };
  struct Criterion
  {
    int id;
    const char* title;
    std::function<Outcome()> run;
  };
  const std::vector<Criterion> criteria = {
    {1, "SSA exactness", ssa_exactness},
    {2, "Delta/zeta property", lemma_property},
    {3, "Cantelli coverage", cantelli_coverage},
    {4, "QP solver", qp_solver},
    {5, "linearized keep-out", over_approximation},
    {6, "Monte-Carlo trends", [&] { return monte_carlo_trends(runs, jobs); }},
    {7, "planner timing", planner_timing},
    {8, "determinism", [&] { return determinism(cli); }},
  };

  int failed = 0;
  for (const auto& c : criteria) {
    if (!selected(c.id)) continue;
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail = std::string("exception: ") + e.what();
    }
    failed += !o.pass;
    std::cout << (o.pass ? "PASS" : "FAIL") << " criterion " << c.id << " (" << c.title << "): " << o.detail
              << std::endl;
  }
  std::cout << (failed == 0 ? "all criteria passed" : fmt("%d criteria failed", failed)) << std::endl;
  return failed == 0 ? 0 : 1;
}
