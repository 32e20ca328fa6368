// dicsim: run, sweep, replay and report on DIC corridor simulations.
#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <thread>

#include "CLI11.hpp"
#include "dic/io.hpp"
#include "dic/metrics.hpp"
#include "dic/protocol.hpp"
#include "dic/qp.hpp"
#include "dic/sim.hpp"

namespace fs = std::filesystem;
using namespace dic;

namespace {

Scenario load(const std::string& config) { return config.empty() ? build_default_scenario() : load_scenario(config); }

RunResult run_to_dir(const Scenario& scenario, const fs::path& out, int trace_stride, bool log_rounds) {
  fs::create_directories(out);
  std::ofstream log;
  std::optional<RoundLogWriter> writer;
  RunOptions options;
  options.trace_stride_ticks = trace_stride;
  if (log_rounds) {
    log.open(out / "rounds.log");
    if (!log) throw std::runtime_error("cannot write " + (out / "rounds.log").string());
    writer.emplace(log, RoundLogHeader{kRoundLogVersion, scenario});
    options.on_round = [&](const RoundLog& r) { writer->write(r); };
  }
  auto result = run(scenario, options);
  write_outputs(out, result);
  return result;
}

void print_summary(const std::string& label, const RunResult& r) {
  const auto u = utilization(r.intervals, r.scenario.config.total_power_kw);
  const auto f = fulfillment_stats(r.exits);
  std::printf("%s: %d vehicles, %d exits, delivered %.1f of %.1f kW requested (%.4f), mean phi %.4f", label.c_str(),
              r.stats.inserted, r.stats.exited, u.delivered_kw, u.requested_kw, u.delivered_over_requested,
              f.regular.mean);
  if (!f.vut.empty()) std::printf(", VUT mean phi %.4f", f.vut.mean);
  std::printf("\n");
}

int cmd_run(const std::string& config, std::optional<std::uint64_t> seed, const std::string& strategy,
            const std::string& out, int trace_stride, bool no_log) {
  auto scenario = load(config);
  if (seed) scenario.demand.seed = *seed;
  if (!strategy.empty()) scenario.config.strategy = parse_strategy(strategy);
  const auto r = run_to_dir(scenario, out, trace_stride, !no_log);
  print_summary(out, r);
  return 0;
}

struct SweepCase {
  std::string name;
  Scenario scenario;
};

int cmd_sweep(const std::string& config, std::optional<std::uint64_t> seed, const std::string& out, int jobs,
              int trace_stride) {
  const auto base = load(config);
  std::vector<SweepCase> cases;
  for (double lambda : {5.0, 12.0, 20.0})
    for (bool vut : {false, true})
      for (auto strategy : {Strategy::benchmark, Strategy::mpc}) {
        SweepCase c{"", base};
        c.scenario.demand.lambda_vpm = lambda;
        c.scenario.demand.vut_period_s = vut ? std::optional<double>(60.0) : std::nullopt;
        c.scenario.config.strategy = strategy;
        if (seed) c.scenario.demand.seed = *seed;
        c.name = "lambda" + std::to_string(static_cast<int>(lambda)) + (vut ? "_vut_" : "_") + to_string(strategy);
        cases.push_back(std::move(c));
      }

  std::atomic<std::size_t> next{0};
  std::mutex io;
  std::exception_ptr failure;
  auto worker = [&] {
    for (std::size_t i; (i = next++) < cases.size();) {
      try {
        const auto r = run_to_dir(cases[i].scenario, fs::path(out) / cases[i].name, trace_stride, true);
        std::lock_guard lock(io);
        print_summary(cases[i].name, r);
      } catch (...) {
        std::lock_guard lock(io);
        if (!failure) failure = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  for (int j = 0; j < std::max(1, jobs); ++j) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
  return 0;
}

int cmd_replay(const std::string& path, const std::string& strategy_name, double tol) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path);
  RoundLogReader reader(in);
  if (!reader.header()) {
    std::printf("empty log, nothing to replay\n");
    return 0;
  }
  const auto& scenario = reader.header()->scenario;
  const auto strategy = parse_strategy(strategy_name);
  if (strategy != scenario.config.strategy)
    throw std::runtime_error("log was recorded with strategy " + std::string(to_string(scenario.config.strategy)));
  const RequestParams request{100.0, scenario.config.charge_time_constant_s, scenario.config.consumption};
  MpcAllocator mpc(scenario.config.mpc);
  int rounds = 0, mismatches = 0;
  double max_vehicle = 0.0, max_stripe = 0.0;
  while (auto round = reader.next()) {
    AllocationPlan plan;
    if (strategy == Strategy::mpc) {
      plan = mpc.solve_step(instance_from_reports(round->reports, scenario, round->time_s));
    } else {
      std::vector<VehicleState> vehicles;
      for (const auto& r : round->reports) vehicles.push_back(vehicle_from_report(r));
      plan = allocate_benchmark(vehicles, scenario.stripes, request, round->time_s);
    }
    const auto again = dispatch_allocations(plan, round->reports, scenario);
    bool ok = again.size() == round->allocations.size() && plan.per_stripe_kw.size() == round->stripe_kw.size();
    for (std::size_t i = 0; ok && i < again.size(); ++i) {
      const double d = std::abs(again[i].pass_kw - round->allocations[i].pass_kw);
      max_vehicle = std::max(max_vehicle, d);
      ok = again[i].id == round->allocations[i].id && again[i].stripe == round->allocations[i].stripe &&
           d <= tol * std::max(1.0, std::abs(round->allocations[i].pass_kw));
    }
    for (std::size_t s = 0; ok && s < plan.per_stripe_kw.size(); ++s) {
      const double d = std::abs(plan.per_stripe_kw[s] - round->stripe_kw[s]);
      max_stripe = std::max(max_stripe, d);
      ok = d <= tol * std::max(1.0, std::abs(round->stripe_kw[s]));
    }
    if (!ok) {
      ++mismatches;
      if (mismatches <= 5) std::printf("round at t=%g differs from the log\n", round->time_s);
    }
    ++rounds;
  }
  std::printf("replayed %d rounds: %d mismatches, max |dPASS| %.3g kW, max |dP_s| %.3g kW\n", rounds, mismatches,
              max_vehicle, max_stripe);
  return mismatches == 0 ? 0 : 1;
}

int cmd_report(const std::vector<std::string>& dirs, const std::string& out, int n_high, int n_low) {
  fs::create_directories(out);
  std::ofstream fulfillment(fs::path(out) / "fulfillment.csv");
  std::ofstream cdf(fs::path(out) / "cdf.csv");
  std::ofstream traj(fs::path(out) / "trajectories.csv");
  if (!fulfillment || !cdf || !traj) throw std::runtime_error("cannot write to " + out);
  write_fulfillment_header(fulfillment);
  write_cdf_header(cdf);
  write_trajectories_header(traj);
  nlohmann::json summary = nlohmann::json::object();
  for (const auto& dir : dirs) {
    auto path = fs::path(dir).lexically_normal();
    if (path.filename().empty()) path = path.parent_path();
    const auto label = path.filename().string();
    const auto r = read_outputs(dir);
    const auto stats = fulfillment_stats(r.exits);
    write_fulfillment_csv(fulfillment, label, r.exits);
    write_cdf_csv(cdf, label, stats);
    const auto t = trajectory_extract(r.exits, r.trace, n_high, n_low);
    write_trajectories_csv(traj, label, t);
    const auto u = utilization(r.intervals, r.scenario.config.total_power_kw);
    summary[label] = {{"strategy", to_string(r.scenario.config.strategy)},
                      {"lambda_vpm", r.scenario.demand.lambda_vpm},
                      {"utilization",
                       {{"requested_kw", u.requested_kw},
                        {"delivered_kw", u.delivered_kw},
                        {"delivered_over_requested", u.delivered_over_requested},
                        {"delivered_over_budget", u.delivered_over_budget}}},
                      {"fulfillment", {{"regular", distribution_summary(stats.regular)}, {"vut", distribution_summary(stats.vut)}}},
                      {"vut_regular_overlap", stats.vut.empty() || stats.regular.empty()
                                                  ? nlohmann::json(nullptr)
                                                  : nlohmann::json(overlap_coefficient(stats.vut, stats.regular))},
                      {"trajectories", {{"high", t.high.size()}, {"low", t.low.size()}, {"short", t.short_of_request}}}};
    if (r.trace.empty()) std::fprintf(stderr, "%s: no trace.csv, trajectories hold exit points only\n", label.c_str());
  }
  std::ofstream(fs::path(out) / "summary.json") << summary.dump(2) << '\n';
  return 0;
}

int cmd_qp(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path);
  const auto problem = qp::read_problem(in);
  const auto s = qp::solve(problem);
  std::printf("status %s, %d iterations, objective %.10g\n", qp::to_string(s.status), s.iterations, s.objective);
  std::printf("residuals: primal %.3g, dual %.3g, complementarity %.3g\n", s.primal_residual, s.dual_residual,
              s.complementarity);
  return s.status == qp::QpStatus::optimal ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Dynamic inductive charging corridor simulator"};
  app.require_subcommand(1);

  std::string config, strategy, out = "out", log, replay_strategy = "mpc", qp_file;
  std::optional<std::uint64_t> seed;
  int trace_stride = 0, jobs = 1, n_high = 3, n_low = 3;
  bool no_log = false;
  double tol = 1e-5;
  std::vector<std::string> dirs;

  auto* run_cmd = app.add_subcommand("run", "Run one simulation");
  run_cmd->add_option("--config", config, "Scenario file (JSON or key = value)");
  run_cmd->add_option("--seed", seed, "Override the demand seed");
  run_cmd->add_option("--strategy", strategy, "benchmark or mpc")->check(CLI::IsMember({"benchmark", "mpc"}));
  run_cmd->add_option("--out", out, "Output directory");
  run_cmd->add_option("--trace-stride", trace_stride, "Write trace.csv every N ticks (0: off)")
      ->check(CLI::NonNegativeNumber);
  run_cmd->add_flag("--no-log", no_log, "Skip rounds.log");

  auto* sweep_cmd = app.add_subcommand("sweep", "Run the 3 traffic levels x VUT on/off x 2 strategies grid");
  sweep_cmd->add_option("--config", config, "Base scenario file");
  sweep_cmd->add_option("--seed", seed, "Override the demand seed");
  sweep_cmd->add_option("--out", out, "Parent output directory");
  sweep_cmd->add_option("--jobs", jobs, "Runs in parallel")->check(CLI::PositiveNumber);
  sweep_cmd->add_option("--trace-stride", trace_stride, "Write trace.csv every N ticks (0: off)")
      ->check(CLI::NonNegativeNumber);

  auto* replay_cmd = app.add_subcommand("replay", "Recompute allocations from a round log and compare");
  replay_cmd->add_option("--log", log, "rounds.log")->required();
  replay_cmd->add_option("--strategy", replay_strategy, "Allocator to replay")
      ->check(CLI::IsMember({"benchmark", "mpc"}));
  replay_cmd->add_option("--tol", tol, "Relative tolerance on PASS and P_s");

  auto* report_cmd = app.add_subcommand("report", "Metrics tables from run output directories");
  report_cmd->add_option("--in", dirs, "Run output directories")->required()->expected(1, -1);
  report_cmd->add_option("--out", out, "Report directory");
  report_cmd->add_option("--high", n_high, "Highest-demand trajectories")->check(CLI::NonNegativeNumber);
  report_cmd->add_option("--low", n_low, "Lowest-demand trajectories")->check(CLI::NonNegativeNumber);

  auto* qp_cmd = app.add_subcommand("qp", "Solve a QP exchange file and print its certificate");
  qp_cmd->add_option("file", qp_file, "QP file")->required();

  CLI11_PARSE(app, argc, argv);
  try {
    if (*run_cmd) return cmd_run(config, seed, strategy, out, trace_stride, no_log);
    if (*sweep_cmd) return cmd_sweep(config, seed, out, jobs, trace_stride);
    if (*replay_cmd) return cmd_replay(log, replay_strategy, tol);
    if (*report_cmd) return cmd_report(dirs, out, n_high, n_low);
    if (*qp_cmd) return cmd_qp(qp_file);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
  return 0;
}
