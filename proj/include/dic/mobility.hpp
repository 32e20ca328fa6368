#pragma once

#include <deque>
#include <optional>
#include <vector>

#include "dic/scenario.hpp"

namespace dic {

struct OdometerSample {
  double time_s = 0.0;
  double odometer_m = 0.0;
};

struct VehicleState {
  int id = 0;
  Direction direction = Direction::southbound;
  double position_m = 0.0;
  double speed_mps = 0.0;
  int entry_node = 1;
  int exit_node = 5;
  double entry_time_s = 0.0;
  double soc = 0.0;
  double soc_init = 0.0;
  double soc_target = 1.0;
  double capacity_kwh = 50.0;
  double p_on_kw = 150.0;
  bool is_vut = false;
  double energy_kwh = 0.0;  // delivered so far

  double odometer_m = 0.0;
  std::deque<OdometerSample> history;  // trailing window, oldest first
};

/// Places a freshly arrived vehicle at its entry node.
VehicleState make_vehicle(int id, const Arrival& arrival, const BatteryProfile& profile, const CorridorSpec& corridor,
                          double p_on_kw);

/// Signed distance still to drive before the vehicle reaches its exit node.
double distance_to_exit(const VehicleState& v, const CorridorSpec& corridor);

/// Greenshields speed with a 10% floor so flow never stalls.
double congested_speed(double free_flow_mps, double density_per_lane, double jam_density);

inline constexpr double kDensityWindowM = 200.0;
inline constexpr double kMinPredictionSpeed = 0.1;  // m/s

struct ExitEvent {
  VehicleState vehicle;
  double exit_time_s = 0.0;
};

/// Recomputes every speed from downstream density, advances all vehicles by
/// speed * tick and removes those that reached their exit node. `now` is the
/// time at the start of the tick.
std::vector<ExitEvent> step(std::vector<VehicleState>& vehicles, const CorridorSpec& corridor, double tick_s,
                            double now_s, double avg_window_s);

/// Speeds the next step() would assign, without moving anything.
void update_speeds(std::vector<VehicleState>& vehicles, const CorridorSpec& corridor);

/// Index of the stripe the vehicle is coupled to, if any. Stripe ids equal
/// their index in `stripes`.
std::optional<int> occupancy(const VehicleState& v, const std::vector<StripeSpec>& stripes);

/// Mean speed over the trailing window; falls back to the current speed when
/// the vehicle has no history yet.
double mean_speed(const VehicleState& v, double now_s, double window_s);

struct OccupancyPrediction {
  int vehicle_id = 0;
  std::vector<std::optional<int>> stripe;  // one entry per horizon step
  double tau_s = 0.0;
  double mean_speed_mps = 0.0;
};

/// Constant-speed extrapolation over `horizon` steps of `dt_s`. Step k is
/// assigned the stripe holding the predicted position at the start of the
/// step, and no stripe once the exit node is reached.
OccupancyPrediction predict(const VehicleState& v, const std::vector<StripeSpec>& stripes, const CorridorSpec& corridor,
                            int horizon, double dt_s, double mean_speed_mps);

}  // namespace dic
