#include "dic/mobility.hpp"

#include <algorithm>
#include <cmath>

namespace dic {

VehicleState make_vehicle(int id, const Arrival& arrival, const BatteryProfile& profile, const CorridorSpec& corridor,
                          double p_on_kw) {
  VehicleState v;
  v.id = id;
  v.entry_node = arrival.entry;
  v.exit_node = arrival.exit;
  v.direction = arrival.exit > arrival.entry ? Direction::southbound : Direction::northbound;
  v.position_m = corridor.node_position(arrival.entry);
  v.speed_mps = corridor.free_flow_speed_mps;
  v.entry_time_s = arrival.time_s;
  v.soc = profile.soc_init;
  v.soc_init = profile.soc_init;
  v.soc_target = profile.soc_target;
  v.capacity_kwh = profile.capacity_kwh;
  v.p_on_kw = p_on_kw;
  v.is_vut = arrival.is_vut;
  return v;
}

double distance_to_exit(const VehicleState& v, const CorridorSpec& corridor) {
  return sign(v.direction) * (corridor.node_position(v.exit_node) - v.position_m);
}

double congested_speed(double free_flow_mps, double density_per_lane, double jam_density) {
  return free_flow_mps * std::max(0.1, 1.0 - density_per_lane / jam_density);
}

void update_speeds(std::vector<VehicleState>& vehicles, const CorridorSpec& corridor) {
  // Per direction, order vehicles along the direction of travel and count the
  // others within the downstream window with a sliding pointer.
  for (Direction d : {Direction::southbound, Direction::northbound}) {
    std::vector<std::pair<double, std::size_t>> order;  // (progress along travel, index)
    for (std::size_t i = 0; i < vehicles.size(); ++i)
      if (vehicles[i].direction == d) order.emplace_back(sign(d) * vehicles[i].position_m, i);
    std::sort(order.begin(), order.end());

    const double lanes = corridor.lanes_per_direction;
    std::size_t hi = 0;
    for (std::size_t lo = 0; lo < order.size(); ++lo) {
      if (hi < lo) hi = lo;
      while (hi + 1 < order.size() && order[hi + 1].first - order[lo].first <= kDensityWindowM) ++hi;
      // Vehicles tied at the same progress all count each other.
      std::size_t first_tied = lo;
      while (first_tied > 0 && order[first_tied - 1].first == order[lo].first) --first_tied;
      const auto others = static_cast<double>(hi - first_tied);
      const double density = others / (kDensityWindowM * lanes);
      vehicles[order[lo].second].speed_mps =
          congested_speed(corridor.free_flow_speed_mps, density, corridor.jam_density());
    }
  }
}

std::vector<ExitEvent> step(std::vector<VehicleState>& vehicles, const CorridorSpec& corridor, double tick_s,
                            double now_s, double avg_window_s) {
  update_speeds(vehicles, corridor);
  const double t_end = now_s + tick_s;
  std::vector<ExitEvent> exits;
  std::vector<VehicleState> staying;
  staying.reserve(vehicles.size());
  for (auto& v : vehicles) {
    if (v.history.empty()) v.history.push_back({now_s, v.odometer_m});
    const double remaining = distance_to_exit(v, corridor);
    const double travel = v.speed_mps * tick_s;
    v.odometer_m += travel;
    v.history.push_back({t_end, v.odometer_m});
    while (v.history.size() > 1 && v.history[1].time_s <= t_end - avg_window_s) v.history.pop_front();
    if (travel >= remaining) {
      v.position_m = corridor.node_position(v.exit_node);
      exits.push_back({std::move(v), t_end});
    } else {
      v.position_m += sign(v.direction) * travel;
      staying.push_back(std::move(v));
    }
  }
  vehicles = std::move(staying);
  return exits;
}

std::optional<int> occupancy(const VehicleState& v, const std::vector<StripeSpec>& stripes) {
  for (const auto& s : stripes)
    if (s.contains(v.direction, v.position_m)) return s.id;
  return std::nullopt;
}

double mean_speed(const VehicleState& v, double now_s, double window_s) {
  if (v.history.size() < 2) return v.speed_mps;
  // Oldest sample inside the window.
  const OdometerSample* start = &v.history.front();
  for (const auto& s : v.history) {
    if (s.time_s >= now_s - window_s - 1e-9) {
      start = &s;
      break;
    }
  }
  const auto& last = v.history.back();
  const double dt = last.time_s - start->time_s;
  if (dt <= 0.0) return v.speed_mps;
  return (last.odometer_m - start->odometer_m) / dt;
}

OccupancyPrediction predict(const VehicleState& v, const std::vector<StripeSpec>& stripes, const CorridorSpec& corridor,
                            int horizon, double dt_s, double mean_speed_mps) {
  OccupancyPrediction p;
  p.vehicle_id = v.id;
  p.mean_speed_mps = mean_speed_mps;
  const double remaining = std::max(0.0, distance_to_exit(v, corridor));
  p.tau_s = remaining / std::max(mean_speed_mps, kMinPredictionSpeed);
  p.stripe.assign(static_cast<std::size_t>(horizon), std::nullopt);

  const double dir = sign(v.direction);
  const double step_m = std::max(mean_speed_mps, 0.0) * dt_s;
  for (int k = 0; k < horizon; ++k) {
    const double ahead = k * step_m;
    if (k > 0 && ahead >= remaining) break;
    const double x = v.position_m + dir * ahead;
    for (const auto& s : stripes)
      if (s.contains(v.direction, x)) {
        p.stripe[static_cast<std::size_t>(k)] = s.id;
        break;
      }
  }
  return p;
}

}  // namespace dic
