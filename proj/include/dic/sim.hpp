#pragma once

#include <functional>
#include <vector>

#include "dic/allocation.hpp"
#include "dic/mpc.hpp"
#include "dic/protocol.hpp"
#include "dic/scenario.hpp"

namespace dic {

struct ExitRecord {
  int id = 0;
  bool is_vut = false;
  bool measured = false;  // entered after the warm-up
  int entry_node = 1;
  int exit_node = 5;
  double capacity_kwh = 0.0;
  double soc_init = 0.0;
  double soc_target = 1.0;
  double soc_exit = 0.0;
  double entry_time_s = 0.0;
  double exit_time_s = 0.0;
  double energy_kwh = 0.0;  // delivered at the coil, before efficiency
};

/// Per control interval, powers averaged over its ticks.
struct IntervalRecord {
  double time_s = 0.0;
  bool measured = false;
  int vehicles = 0;
  double requested_kw = 0.0;
  double delivered_kw = 0.0;
  std::vector<double> stripe_requested_kw;
  std::vector<double> stripe_delivered_kw;
  std::vector<double> stripe_allocated_kw;
};

struct TraceSample {
  double time_s = 0.0;
  int id = 0;
  double position_m = 0.0;
  double speed_mps = 0.0;
  double soc = 0.0;
  double energy_kwh = 0.0;
};

/// Whole-run energy bookkeeping in kWh. The battery gain plus the clamp
/// corrections equals the efficiency-weighted delivery minus consumption.
struct EnergyBalance {
  double delivered_kwh = 0.0;
  double stored_kwh = 0.0;  // efficiency-weighted delivery
  double consumed_kwh = 0.0;
  double clamp_kwh = 0.0;
  int clamp_events = 0;
  double battery_gain_kwh = 0.0;

  double residual() const { return battery_gain_kwh + clamp_kwh - (stored_kwh - consumed_kwh); }
};

struct RunStats {
  int inserted = 0;
  int exited = 0;
  int on_road_at_end = 0;
  int rounds = 0;
  double max_plan_violation_kw = 0.0;
  double max_clip_kw = 0.0;
  double max_budget_excess_kw = 0.0;  // interval delivery above P_tot
  double max_stripe_excess_kw = 0.0;  // delivery above the stripe allocation
  double total_solve_ms = 0.0;
  double max_solve_ms = 0.0;
  long total_iterations = 0;
};

struct RunResult {
  Scenario scenario;
  std::vector<ExitRecord> exits;
  std::vector<IntervalRecord> intervals;
  std::vector<TraceSample> trace;
  std::vector<MpcStats> qp_stats;
  EnergyBalance energy;
  RunStats stats;
};

struct RunOptions {
  int trace_stride_ticks = 0;  // 0 disables the trace
  bool record_qp_stats = false;
  /// Called once per control round, after the allocation is dispatched.
  std::function<void(const RoundLog&)> on_round;
};

struct TickDelivery {
  std::vector<double> vehicle_kw;  // aligned with the vehicle list
  std::vector<double> stripe_kw;
};

/// Power drawn during one tick. A vehicle draws its allocation only while it
/// is on the stripe the allocation names, capped by pad and coil ratings.
/// Throws std::logic_error if a stripe would deliver more than its plan.
TickDelivery deliver(const AllocationPlan& plan, const std::vector<VehicleState>& vehicles,
                     const std::vector<StripeSpec>& stripes, double tolerance_kw = 1e-6);

/// Runs warm-up plus measurement for the configured strategy. Both strategies
/// see the same arrivals and battery profiles for a given seed.
RunResult run(const Scenario& scenario, const RunOptions& options = {});

}  // namespace dic
