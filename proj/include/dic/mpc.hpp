#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "dic/allocation.hpp"
#include "dic/mobility.hpp"
#include "dic/qp.hpp"
#include "dic/scenario.hpp"

namespace dic {

/// Everything the allocator knows about one vehicle at a control boundary.
struct MpcVehicle {
  int id = 0;
  double soc = 0.0;
  double soc_target = 1.0;
  double capacity_kwh = 50.0;
  double p_on_kw = 150.0;
  OccupancyPrediction prediction;
  std::vector<double> consumption_kwh;  // forecast per horizon step
};

struct MpcInstance {
  double time_s = 0.0;
  std::vector<MpcVehicle> vehicles;
  std::vector<StripeSpec> stripes;
  double total_power_kw = 0.0;
  MpcConfig config;

  /// Every vehicle carries a full-horizon prediction and non-negative
  /// consumption forecasts.
  void validate() const;
};

/// Consumption forecast at the mean speed, zero after the predicted exit and
/// capped so the battery never runs dry inside the horizon.
std::vector<double> forecast_consumption(const MpcVehicle& v, const ConsumptionModel& model, double dt_s);

/// Allocator view of one vehicle given its mean speed over the averaging
/// window.
MpcVehicle make_mpc_vehicle(const VehicleState& v, double mean_speed_mps, const Scenario& scenario);

/// Snapshot of the current traffic as seen by the allocator.
MpcInstance make_instance(const std::vector<VehicleState>& vehicles, const Scenario& scenario, double now_s);

/// Battery gap over remaining time, with `tau_min_s` as a floor on the time.
double urgency(double soc, double soc_target, double tau_s, double tau_min_s);

/// Index bookkeeping for the horizon QP. Per vehicle: K powers then K+1 SoC
/// values (energy, see soc_unit). Stripe powers follow all vehicles, then one
/// slack per stripe and step holding the unused stripe power.
struct MpcLayout {
  int vehicles = 0;
  int stripes = 0;
  int horizon = 1;

  int per_vehicle() const { return 2 * horizon + 1; }
  int vehicle_power(int v, int k) const { return v * per_vehicle() + k; }
  int soc(int v, int k) const { return v * per_vehicle() + horizon + k; }
  int stripe_power(int s, int k) const { return vehicles * per_vehicle() + s * horizon + k; }
  int slack(int s, int k) const { return vehicles * per_vehicle() + (stripes + s) * horizon + k; }
  int num_vars() const { return vehicles * per_vehicle() + 2 * stripes * horizon; }

  int dynamics_row(int v, int k) const { return v * horizon + k; }
  int budget_row(int k) const { return vehicles * horizon + k; }
  int slack_row(int s, int k) const { return (vehicles + 1 + s) * horizon + k; }
  int num_eq() const { return (vehicles + 1 + stripes) * horizon; }

  // One bound row per variable. The stripe capacity constraint is the
  // lower bound of the slack.
  int capacity_row(int s, int k) const { return slack(s, k); }
  int num_ineq() const { return num_vars(); }
};

/// Inside the QP the SoC of a vehicle is stored as battery energy in units of
/// kW x delta_t, so one kW held for one step moves it by the efficiency.
inline double soc_unit(double capacity_kwh, double delta_t_s) { return capacity_kwh * 3600.0 / delta_t_s; }

/// Multiplier on the urgency weight of the tracking term (SoC as a
/// fraction). Without it the tracking term is orders of magnitude below the
/// revenue and assignment terms at the default weights.
inline constexpr double kTrackingWeight = 1e6;

/// The horizon QP for all vehicles of the instance.
qp::QpProblem build_qp(const MpcInstance& instance);

struct MpcStats {
  double time_s = 0.0;
  int vehicles = 0;
  int variables = 0;
  int constraints = 0;
  int iterations = 0;
  double objective = 0.0;
  double primal_residual = 0.0;
  double dual_residual = 0.0;
  double max_clip_kw = 0.0;
  double solve_ms = 0.0;
  qp::QpStatus status = qp::QpStatus::optimal;
};

class MpcError : public std::runtime_error {
 public:
  MpcError(const std::string& what, MpcStats stats) : std::runtime_error(what), stats_(stats) {}
  const MpcStats& stats() const { return stats_; }

 private:
  MpcStats stats_;
  qp::Vector empty_;
};

/// Receding-horizon allocator. Keeps the previous solution to warm-start the
/// next one, shifted by one step.
class MpcAllocator {
 public:
  explicit MpcAllocator(MpcConfig config = {}) : config_(config) {}

  /// Solves the horizon problem and returns the first-step plan, clipped to
  /// the exact first-step bounds. Vehicles that cannot couple to any stripe
  /// within the horizon are fixed at zero and left out of the QP; their
  /// variables do not interact with anyone else's.
  AllocationPlan solve_step(const MpcInstance& instance);

  const MpcStats& last_stats() const { return stats_; }
  /// Full horizon solution of the last successful solve, in the layout of
  /// the pruned instance (coupled vehicles only, in input order).
  const qp::Vector& last_solution() const { return previous_ ? previous_->x : empty_; }
  void reset() { previous_.reset(); }

 private:
  struct Previous {
    std::vector<int> vehicle_ids;
    MpcLayout layout;
    qp::Vector x;
    qp::Vector y;
  };

  qp::WarmStart shifted_warm_start(const MpcInstance& reduced, const MpcLayout& layout) const;

  MpcConfig config_;
  std::optional<Previous> previous_;
  MpcStats stats_;
  qp::Vector empty_;
};

/// Checks the first-step plan against the per-vehicle caps, stripe bounds,
/// stripe capacity and total budget; returns the worst violation in kW.
double plan_violation(const AllocationPlan& plan, const MpcInstance& instance);

}  // namespace dic
