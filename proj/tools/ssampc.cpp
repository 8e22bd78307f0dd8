// Command-line front end: forecast, simulate, montecarlo, solver-selftest.
//
// Exit codes: 0 success, 1 internal error, 2 usage or configuration error.

#include "ssampc/bootstrap.hpp"
#include "ssampc/config.hpp"
#include "ssampc/error.hpp"
#include "ssampc/qp_oracle.hpp"
#include "ssampc/sim.hpp"

#include "CLI11.hpp"
#include "json.hpp"

#include <openssl/evp.h>

#include <array>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;
using namespace ssampc;

namespace {

struct UsageError : std::runtime_error
{
  using std::runtime_error::runtime_error;
};

bool g_quiet = false;

void note(const std::string& msg)
{
  if (!g_quiet) std::cerr << msg << '\n';
}

std::string num(double v)
{
  if (std::isnan(v)) return "nan";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

json json_num(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

json json_vec(const Eigen::Vector3d& v) { return json::array({v.x(), v.y(), v.z()}); }

std::string sha256_file(const fs::path& path)
{
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr);
  char buf[1 << 16];
  while (in) {
    in.read(buf, sizeof buf);
    EVP_DigestUpdate(ctx, buf, static_cast<std::size_t>(in.gcount()));
  }
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_DigestFinal_ex(ctx, md, &len);
  EVP_MD_CTX_free(ctx);
  std::string hex;
  char byte[3];
  for (unsigned int i = 0; i < len; ++i) {
    std::snprintf(byte, sizeof byte, "%02x", md[i]);
    hex += byte;
  }
  return hex;
}

void write_text(const fs::path& path, const std::string& text)
{
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
}

// Files listed in `artifacts` are reproducible; `timing` files are not hashed.
class Manifest
{
public:
  Manifest(std::string command, int argc, char** argv)
  {
    doc_["tool"] = "ssampc";
    doc_["command"] = std::move(command);
    json args = json::array();
    for (int i = 1; i < argc; ++i) args.push_back(argv[i]);
    doc_["arguments"] = args;
  }
  json& operator[](const char* key) { return doc_[key]; }
  void artifact(const fs::path& path) { doc_["artifacts"][path.filename().string()] = sha256_file(path); }
  void write(const fs::path& dir) const { write_text(dir / "manifest.json", doc_.dump(2) + "\n"); }

private:
  json doc_;
};

json scenario_json(const Scenario& s)
{
  json out;
  for (const auto& [key, value] : scenario_entries(s)) out[key] = value;
  return out;
}

Scenario resolve_scenario(const std::string& file, const std::string& case_name,
                          const std::vector<std::string>& overrides)
{
  if (!file.empty() && !case_name.empty()) throw UsageError("use either --scenario or --case, not both");
  Scenario s = file.empty() ? builtin_scenario(case_name.empty() ? "case1" : case_name) : load_scenario(file);
  for (const auto& o : overrides) apply_override(s, o);
  return s;
}

void finalize(Scenario& s, const std::vector<double>* epsilon, const std::uint64_t* seed)
{
  if (epsilon) s.planner.epsilon = epsilon->front();
  if (seed) s.seed = *seed;
  s.validate();
}

fs::path prepare_out(const std::string& dir)
{
  fs::path out(dir);
  std::error_code ec;
  fs::create_directories(out, ec);
  if (ec) throw UsageError("cannot create output directory '" + dir + "': " + ec.message());
  return out;
}

// ---------------------------------------------------------------- forecast

std::vector<std::string> split_csv(const std::string& line)
{
  std::vector<std::string> cells;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) {
    const auto b = cell.find_first_not_of(" \t\r");
    const auto e = cell.find_last_not_of(" \t\r");
    cells.push_back(b == std::string::npos ? std::string() : cell.substr(b, e - b + 1));
  }
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

bool parse_double(const std::string& s, double& v)
{
  if (s.empty()) return false;
  char* end = nullptr;
  v = std::strtod(s.c_str(), &end);
  return end == s.c_str() + s.size() && std::isfinite(v);
}

std::vector<Eigen::Vector3d> read_xyz_csv(const std::string& path)
{
  std::ifstream in(path);
  if (!in) throw UsageError("cannot open input '" + path + "'");
  std::vector<Eigen::Vector3d> rows;
  std::array<int, 3> cols{-1, -1, -1};
  std::string line;
  int line_no = 0;
  bool first = true;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos || line[0] == '#') continue;
    const auto cells = split_csv(line);
    double probe = 0.0;
    if (first) {
      first = false;
      if (!parse_double(cells[0], probe)) {
        for (std::size_t c = 0; c < cells.size(); ++c) {
          if (cells[c] == "x") cols[0] = static_cast<int>(c);
          if (cells[c] == "y") cols[1] = static_cast<int>(c);
          if (cells[c] == "z") cols[2] = static_cast<int>(c);
        }
        if (cols[0] < 0 || cols[1] < 0 || cols[2] < 0) {
          throw UsageError(path + ": header on line " + std::to_string(line_no) + " must name x, y and z columns");
        }
        continue;
      }
      // No header: x,y,z or t,x,y,z.
      const int off = cells.size() == 4 ? 1 : 0;
      cols = {off, off + 1, off + 2};
    }
    Eigen::Vector3d v;
    for (int a = 0; a < 3; ++a) {
      const auto c = static_cast<std::size_t>(cols[static_cast<std::size_t>(a)]);
      if (c >= cells.size() || !parse_double(cells[c], v(a))) {
        throw UsageError(path + ": malformed row " + std::to_string(rows.size() + 1) + " (line " +
                         std::to_string(line_no) + "): '" + line + "'");
      }
    }
    rows.push_back(v);
  }
  return rows;
}

int cmd_forecast(const std::string& input, const std::string& scenario_file, const std::vector<std::string>& overrides,
                 const std::string& out_dir, int argc, char** argv)
{
  Scenario s = resolve_scenario(scenario_file, "", overrides);
  const BootstrapParams& p = s.bootstrap;
  try {
    p.validate();
  } catch (const Error& e) {
    throw ConfigError(e.what());
  }
  const auto rows = read_xyz_csv(input);
  if (static_cast<int>(rows.size()) < p.n_train) {
    throw UsageError(input + ": " + std::to_string(rows.size()) + " rows, need at least n_train = " +
                     std::to_string(p.n_train));
  }
  MeasurementBuffer buffer(p.history_capacity());
  for (const auto& r : rows) accumulate_measurement(buffer, r);
  const ForecastEnsemble ens = forecast_ensemble(generate_ensemble(buffer, p), buffer, p.n_h);

  const fs::path out = prepare_out(out_dir);
  std::string csv = "member,step,x,y,z\n";
  for (int j = 0; j < ens.size(); ++j) {
    const auto& m = ens.members[static_cast<std::size_t>(j)];
    for (int i = 0; i < ens.horizon(); ++i) {
      csv += std::to_string(j + 1) + "," + std::to_string(i + 1) + "," + num(m(i, 0)) + "," + num(m(i, 1)) + "," +
             num(m(i, 2)) + "\n";
    }
  }
  write_text(out / "forecast.csv", csv);

  json summary;
  summary["input_rows"] = rows.size();
  summary["history_used"] = buffer.size();
  summary["window"] = p.window;
  summary["n_strap"] = p.n_strap;
  summary["horizon"] = p.n_h;
  summary["backup_members"] = ens.backup_members;
  json steps = json::array();
  for (int i = 0; i < ens.horizon(); ++i) {
    steps.push_back({{"step", i + 1}, {"mean", json_vec(ens.mean(i))}, {"std", json_vec(ens.stddev(i))}});
  }
  summary["steps"] = steps;
  write_text(out / "summary.json", summary.dump(2) + "\n");

  Manifest man("forecast", argc, argv);
  man["input"] = {{"path", input}, {"sha256", sha256_file(input)}};
  man["config"] = scenario_json(s);
  man.artifact(out / "forecast.csv");
  man.artifact(out / "summary.json");
  man.write(out);
  note("forecast: " + std::to_string(ens.size()) + " members x " + std::to_string(ens.horizon()) + " steps -> " +
       out.string());
  return 0;
}

// ---------------------------------------------------------------- simulate

std::string trajectory_csv(const EpisodeResult& r)
{
  std::string csv =
    "time,agent_x,agent_y,agent_z,obstacle_x,obstacle_y,obstacle_z,measured_x,measured_y,measured_z,d,"
    "constrained,feasible\n";
  for (const auto& row : r.trajectory) {
    csv += num(row.time) + "," + num(row.agent.x()) + "," + num(row.agent.y()) + "," + num(row.agent.z());
    if (row.obstacle_active) {
      csv += "," + num(row.obstacle.x()) + "," + num(row.obstacle.y()) + "," + num(row.obstacle.z()) + "," +
             num(row.measured.x()) + "," + num(row.measured.y()) + "," + num(row.measured.z()) + "," +
             num(row.distance);
    } else {
      csv += ",,,,,,,";
    }
    csv += std::string(",") + (row.constrained ? "1" : "0") + "," + (row.feasible ? "1" : "0") + "\n";
  }
  return csv;
}

json episode_json(const Scenario& s, const EpisodeResult& r)
{
  json j;
  j["scenario"] = s.name;
  j["run_index"] = r.run_index;
  j["seed"] = r.seed;
  j["epsilon"] = r.epsilon;
  j["d_min"] = json_num(r.d_min);
  j["collided"] = r.collided;
  j["collision_distance"] = s.obstacle.radius + s.planner.r_p;
  j["n_plans"] = r.n_plans;
  j["n_constrained"] = r.n_constrained;
  j["n_infeasible"] = r.n_infeasible;
  j["feasible_throughout"] = r.feasible_throughout();
  j["failed"] = r.failed;
  if (r.failed) j["diagnostic"] = r.diagnostic;
  j["obstacle_speed"] = r.obstacle_speed;
  j["crossing_time"] = r.crossing_time;
  j["max_kkt_stationarity"] = r.max_kkt_stationarity;
  j["max_kkt_primal"] = r.max_kkt_primal;
  return j;
}

std::string forecasts_csv(const EpisodeResult& r)
{
  std::string csv = "origin_index,member,step,x,y,z\n";
  for (const auto& f : r.forecasts) {
    for (int j = 0; j < f.size(); ++j) {
      const auto& m = f.members[static_cast<std::size_t>(j)];
      for (int i = 0; i < f.horizon(); ++i) {
        csv += std::to_string(f.origin_index) + "," + std::to_string(j + 1) + "," + std::to_string(i + 1) + "," +
               num(m(i, 0)) + "," + num(m(i, 1)) + "," + num(m(i, 2)) + "\n";
      }
    }
  }
  return csv;
}

int cmd_simulate(Scenario s, int run_index, bool dump_forecasts, const std::string& out_dir, int argc, char** argv)
{
  if (run_index < 0) throw UsageError("--run-index must be >= 0");
  EpisodeOptions opt;
  opt.record_trajectory = true;
  opt.record_forecasts = dump_forecasts;
  const EpisodeResult r = run_episode(s, run_index, opt);

  const fs::path out = prepare_out(out_dir);
  Manifest man("simulate", argc, argv);
  man["seed"] = s.seed;
  man["run_index"] = run_index;
  man["config"] = scenario_json(s);
  write_text(out / "scenario.toml", scenario_to_text(s));
  write_text(out / "trajectory.csv", trajectory_csv(r));
  write_text(out / "episode.json", episode_json(s, r).dump(2) + "\n");
  man.artifact(out / "scenario.toml");
  man.artifact(out / "trajectory.csv");
  man.artifact(out / "episode.json");
  if (dump_forecasts) {
    write_text(out / "forecasts.csv", forecasts_csv(r));
    man.artifact(out / "forecasts.csv");
  }
  json timing = {{"mean_plan_time", r.mean_plan_time}, {"mean_plan_time_all", r.mean_plan_time_all}};
  write_text(out / "timing.json", timing.dump(2) + "\n");
  man["timing"] = "timing.json";
  man.write(out);

  note("simulate: " + s.name + " eps=" + num(r.epsilon) + " d_min=" + num(r.d_min) +
       (r.collided ? " COLLISION" : "") + " infeasible=" + std::to_string(r.n_infeasible) + "/" +
       std::to_string(r.n_constrained) + " mean plan time=" + num(r.mean_plan_time) + " s");
  if (r.failed) note("simulate: planner failure: " + r.diagnostic);
  return 0;
}

// -------------------------------------------------------------- montecarlo

std::string pct(double v)
{
  if (std::isnan(v)) return "n/a";
  char buf[16];
  std::snprintf(buf, sizeof buf, "%.1f", v);
  return buf;
}

std::string fixed(double v, int digits)
{
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

std::string summary_table(const std::vector<std::pair<Scenario, MonteCarloReport>>& results)
{
  std::ostringstream t;
  char buf[64];
  for (const auto& [s, rep] : results) {
    t << s.name << " (" << to_string(s.obstacle.kind) << "), " << rep.rows.front().runs << " runs\n";
    std::snprintf(buf, sizeof buf, "  %-14s", "epsilon");
    t << buf;
    for (const auto& row : rep.rows) {
      std::snprintf(buf, sizeof buf, "%9s", fixed(row.epsilon, 2).c_str());
      t << buf;
    }
    t << "\n";
    auto line = [&](const char* label, auto value) {
      std::snprintf(buf, sizeof buf, "  %-14s", label);
      t << buf;
      for (const auto& row : rep.rows) {
        std::snprintf(buf, sizeof buf, "%9s", value(row).c_str());
        t << buf;
      }
      t << "\n";
    };
    line("%Feas.", [](const MonteCarloRow& r) { return pct(r.pct_feasible); });
    line("%Feas. runs", [](const MonteCarloRow& r) { return pct(r.pct_feasible_runs); });
    line("%Succ.", [](const MonteCarloRow& r) { return pct(r.pct_success); });
    line("mean d_min", [](const MonteCarloRow& r) { return fixed(r.mean_dmin, 2); });
    line("sigma(d_min)", [](const MonteCarloRow& r) { return fixed(r.std_dmin, 2); });
    line("collisions", [](const MonteCarloRow& r) { return std::to_string(r.collisions); });
    std::vector<std::vector<double>> groups;
    for (const auto& row : rep.rows) groups.push_back(row.d_min);
    if (groups.size() > 1) {
      const TrendTest tt = decreasing_trend_test(groups);
      t << "  trend (d_min decreasing in epsilon): J=" << num(tt.statistic) << " z=" << fixed(tt.z, 2)
        << " p=" << num(tt.p_value) << "\n";
    }
    t << "\n";
  }
  return t.str();
}

int cmd_montecarlo(std::vector<Scenario> scenarios, int runs, std::vector<double> epsilons, int jobs,
                   bool dump_trajectories, const std::string& out_dir, int argc, char** argv)
{
  if (runs < 1) throw UsageError("--runs must be >= 1");
  if (jobs < 0) throw UsageError("--jobs must be >= 0");
  if (epsilons.empty()) epsilons = {0.05, 0.25, 0.5, 1.0};
  for (double e : epsilons) {
    if (!(e > 0.0) || e > 1.0) throw UsageError("epsilon " + num(e) + " outside (0, 1]");
  }
  const fs::path out = prepare_out(out_dir);
  Manifest man("montecarlo", argc, argv);
  man["runs"] = runs;
  man["epsilons"] = epsilons;

  EpisodeOptions opt;
  opt.record_trajectory = dump_trajectories;
  std::vector<std::pair<Scenario, MonteCarloReport>> results;
  std::string jsonl, runs_csv = "scenario,epsilon,run_index,seed,d_min,collided,n_constrained,n_infeasible,failed\n";
  json configs, timing;
  for (Scenario& s : scenarios) {
    note("montecarlo: " + s.name + ", " + std::to_string(runs) + " runs x " + std::to_string(epsilons.size()) +
         " risk levels");
    MonteCarloReport rep = monte_carlo(s, runs, epsilons, jobs, opt);
    std::vector<std::vector<double>> groups;
    for (const auto& row : rep.rows) groups.push_back(row.d_min);
    const TrendTest tt = decreasing_trend_test(groups);
    for (std::size_t e = 0; e < rep.rows.size(); ++e) {
      const MonteCarloRow& row = rep.rows[e];
      json j;
      j["scenario"] = row.scenario;
      j["obstacle"] = to_string(s.obstacle.kind);
      j["epsilon"] = row.epsilon;
      j["runs"] = row.runs;
      j["pct_feasible"] = json_num(row.pct_feasible);
      j["pct_feasible_runs"] = json_num(row.pct_feasible_runs);
      j["pct_success"] = json_num(row.pct_success);
      j["mean_dmin"] = json_num(row.mean_dmin);
      j["std_dmin"] = json_num(row.std_dmin);
      j["collisions"] = row.collisions;
      j["failed"] = row.failed;
      j["trend_p_value"] = json_num(tt.p_value);
      j["seeds"] = row.seeds;
      jsonl += j.dump() + "\n";
      timing[row.scenario + "@" + num(row.epsilon)] = row.mean_plan_time;
      for (const EpisodeResult& ep : rep.episodes[e]) {
        runs_csv += row.scenario + "," + num(row.epsilon) + "," + std::to_string(ep.run_index) + "," +
                    std::to_string(ep.seed) + "," + num(ep.d_min) + "," + (ep.collided ? "1" : "0") + "," +
                    std::to_string(ep.n_constrained) + "," + std::to_string(ep.n_infeasible) + "," +
                    (ep.failed ? "1" : "0") + "\n";
        if (dump_trajectories) {
          const fs::path dir = out / "trajectories";
          fs::create_directories(dir);
          const fs::path file =
            dir / (row.scenario + "_eps" + num(row.epsilon) + "_run" + std::to_string(ep.run_index) + ".csv");
          write_text(file, trajectory_csv(ep));
        }
      }
    }
    const std::string cfg_name = "scenario_" + s.name + ".toml";
    write_text(out / cfg_name, scenario_to_text(s));
    man.artifact(out / cfg_name);
    configs[s.name] = scenario_json(s);
    results.emplace_back(s, std::move(rep));
  }
  man["config"] = configs;
  write_text(out / "metrics.jsonl", jsonl);
  write_text(out / "runs.csv", runs_csv);
  const std::string table = summary_table(results);
  write_text(out / "table.txt", table);
  man.artifact(out / "metrics.jsonl");
  man.artifact(out / "runs.csv");
  man.artifact(out / "table.txt");
  write_text(out / "timing.json", timing.dump(2) + "\n");
  man["timing"] = "timing.json";
  man.write(out);
  std::cout << table;
  return 0;
}

// --------------------------------------------------------- solver-selftest

int cmd_selftest(int cases, std::uint64_t seed, double tol, const std::string& out_dir, int argc, char** argv)
{
  if (cases < 1) throw UsageError("--cases must be >= 1");
  const SelftestReport rep = run_solver_selftest(cases, seed, tol);
  std::cout << "solver-selftest: " << rep.passed << "/" << rep.cases << " random QPs match the active-set oracle"
            << " (max error " << num(rep.max_error) << ", tolerance " << num(tol) << ")\n";
  if (!out_dir.empty()) {
    const fs::path out = prepare_out(out_dir);
    json j = {{"cases", rep.cases}, {"passed", rep.passed}, {"max_error", rep.max_error}, {"tolerance", tol},
              {"seed", seed}};
    write_text(out / "selftest.json", j.dump(2) + "\n");
    Manifest man("solver-selftest", argc, argv);
    man["seed"] = seed;
    man.artifact(out / "selftest.json");
    man.write(out);
  }
  return rep.passed == rep.cases ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv)
{
  CLI::App app{"Bootstrapped SSA forecasting with risk-aware MPC"};
  app.require_subcommand(1);
  app.add_flag("-q,--quiet", g_quiet, "Suppress progress messages");
  app.fallthrough();

  // forecast
  auto* fc = app.add_subcommand("forecast", "Bootstrap ensemble forecast of an x,y,z CSV series");
  std::string fc_input, fc_scenario, fc_out = "out";
  std::vector<std::string> fc_set;
  int fc_window = 0, fc_train = 0, fc_step = 0, fc_sigma = -1, fc_strap = 0, fc_h = 0;
  double fc_delta = 0.0;
  fc->add_option("input", fc_input, "CSV with x,y,z columns (optional header, optional leading t column)")
    ->required();
  fc->add_option("--scenario", fc_scenario, "Scenario file supplying bootstrap parameters");
  fc->add_option("--set", fc_set, "Override, section.key=value (repeatable)");
  fc->add_option("--window", fc_window, "Embedding length L");
  fc->add_option("--n-train", fc_train, "Training window");
  fc->add_option("--n-step", fc_step, "Window growth step");
  fc->add_option("--delta-t", fc_delta, "Rank threshold");
  fc->add_option("--n-sigma", fc_sigma, "Rank relaxation steps");
  fc->add_option("--n-strap", fc_strap, "Ensemble size");
  fc->add_option("--horizon", fc_h, "Forecast steps");
  fc->add_option("--out", fc_out, "Output directory");

  // simulate
  auto* sim = app.add_subcommand("simulate", "Run one closed-loop episode");
  std::string sim_scenario, sim_case, sim_out = "out";
  std::vector<std::string> sim_set;
  std::vector<double> sim_eps;
  std::uint64_t sim_seed = 0;
  int sim_run = 0;
  bool sim_dump = false;
  sim->add_option("--scenario", sim_scenario, "Scenario file");
  sim->add_option("--case", sim_case, "Built-in scenario: case1, case2 or case3");
  sim->add_option("--epsilon", sim_eps, "Risk tolerance in (0, 1]")->expected(1);
  auto* sim_seed_opt = sim->add_option("--seed", sim_seed, "Template seed");
  sim->add_option("--run-index", sim_run, "Run index (selects the per-run seed)");
  sim->add_option("--set", sim_set, "Override, section.key=value (repeatable)");
  sim->add_flag("--dump-forecasts", sim_dump, "Also write every ensemble forecast");
  sim->add_option("--out", sim_out, "Output directory");

  // montecarlo
  auto* mc = app.add_subcommand("montecarlo", "Monte-Carlo runs over risk levels");
  std::vector<std::string> mc_scenarios, mc_cases, mc_set;
  std::vector<double> mc_eps;
  std::string mc_out = "out";
  int mc_runs = 100, mc_jobs = 1;
  std::uint64_t mc_seed = 0;
  bool mc_dump = false;
  mc->add_option("--scenario", mc_scenarios, "Scenario file (repeatable)");
  mc->add_option("--case", mc_cases, "Built-in scenario (repeatable)");
  mc->add_option("--epsilon", mc_eps, "Risk levels, comma separated (default 0.05,0.25,0.5,1)")->delimiter(',');
  mc->add_option("--runs", mc_runs, "Runs per risk level");
  auto* mc_seed_opt = mc->add_option("--seed", mc_seed, "Template seed");
  mc->add_option("--jobs", mc_jobs, "Worker threads (0 = all cores)");
  mc->add_option("--set", mc_set, "Override, section.key=value (repeatable)");
  mc->add_flag("--dump-trajectories", mc_dump, "Write one trajectory CSV per episode");
  mc->add_option("--out", mc_out, "Output directory");

  // solver-selftest
  auto* st = app.add_subcommand("solver-selftest", "Compare the QP solver with the active-set oracle");
  int st_cases = 200;
  std::uint64_t st_seed = 1;
  double st_tol = 1e-6;
  std::string st_out;
  st->add_option("--cases", st_cases, "Random problems");
  st->add_option("--seed", st_seed, "Seed");
  st->add_option("--tol", st_tol, "Agreement tolerance");
  st->add_option("--out", st_out, "Output directory (optional)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (*fc) {
      std::vector<std::string> set = fc_set;
      if (fc_window > 0) set.push_back("bootstrap.window=" + std::to_string(fc_window));
      if (fc_train > 0) set.push_back("bootstrap.n_train=" + std::to_string(fc_train));
      if (fc_step > 0) set.push_back("bootstrap.n_step=" + std::to_string(fc_step));
      if (fc_delta > 0.0) set.push_back("bootstrap.delta_t=" + num(fc_delta));
      if (fc_sigma >= 0) set.push_back("bootstrap.n_sigma=" + std::to_string(fc_sigma));
      if (fc_strap > 0) set.push_back("bootstrap.n_strap=" + std::to_string(fc_strap));
      if (fc_h > 0) set.push_back("planner.n_h=" + std::to_string(fc_h));
      return cmd_forecast(fc_input, fc_scenario, set, fc_out, argc, argv);
    }
    if (*sim) {
      Scenario s = resolve_scenario(sim_scenario, sim_case, sim_set);
      finalize(s, sim_eps.empty() ? nullptr : &sim_eps, sim_seed_opt->count() ? &sim_seed : nullptr);
      return cmd_simulate(s, sim_run, sim_dump, sim_out, argc, argv);
    }
    if (*mc) {
      for (double e : mc_eps) {
        if (!(e > 0.0) || e > 1.0) throw UsageError("epsilon " + num(e) + " outside (0, 1]");
      }
      std::vector<Scenario> scenarios;
      for (const auto& f : mc_scenarios) scenarios.push_back(resolve_scenario(f, "", mc_set));
      for (const auto& c : mc_cases) scenarios.push_back(resolve_scenario("", c, mc_set));
      if (scenarios.empty()) scenarios.push_back(resolve_scenario("", "case1", mc_set));
      for (Scenario& s : scenarios) finalize(s, nullptr, mc_seed_opt->count() ? &mc_seed : nullptr);
      return cmd_montecarlo(std::move(scenarios), mc_runs, mc_eps, mc_jobs, mc_dump, mc_out, argc, argv);
    }
    if (*st) return cmd_selftest(st_cases, st_seed, st_tol, st_out, argc, argv);
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const ArgumentError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << '\n';
    return 1;
  }
  return 2;
}
