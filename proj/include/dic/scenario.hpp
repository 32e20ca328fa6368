#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

namespace dic {

inline constexpr int kNodeCount = 5;

/// Travel direction along the corridor. Nodes are numbered 1..5 from north
/// to south and positions grow southwards, so southbound traffic moves
/// towards larger positions.
enum class Direction : int { southbound = 0, northbound = 1 };

inline int sign(Direction d) { return d == Direction::southbound ? 1 : -1; }
const char* to_string(Direction d);

enum class Strategy { benchmark, mpc };
const char* to_string(Strategy s);
Strategy parse_strategy(const std::string& s);

struct Range {
  double lo = 0.0;
  double hi = 0.0;
};

struct CorridorSpec {
  double length_m = 9650.0;
  int directions = 2;
  int lanes_per_direction = 2;
  std::array<double, kNodeCount> node_positions_m{0.0, 2400.0, 4800.0, 7200.0, 9650.0};
  double free_flow_speed_mps = 11.1;
  double jam_spacing_m = 10.0;

  /// Jam density per lane, vehicles per meter.
  double jam_density() const { return 1.0 / jam_spacing_m; }
  double node_position(int node) const { return node_positions_m.at(static_cast<std::size_t>(node - 1)); }
  void validate() const;
};

struct StripeSpec {
  int id = 0;
  Direction direction = Direction::southbound;
  double start_m = 0.0;
  double end_m = 0.0;
  double coil_spacing_m = 1.0;
  double coil_power_nom_kw = 100.0;
  double efficiency = 0.95;
  double p_min_kw = 1.0;
  double static_share_kw = 0.0;

  double length() const { return end_m - start_m; }
  bool contains(Direction d, double position_m) const {
    return d == direction && position_m >= start_m && position_m <= end_m;
  }
};

/// Maximum power a stripe can deliver: two coil strings (one per lane) of
/// floor(L / d_c) coils at efficiency-scaled nominal power.
double deliverable_power(const StripeSpec& stripe);

/// Splits `total_kw` across stripes proportionally to their length in whole
/// kW; leftover units go to the largest fractional remainders so the shares
/// sum to the total exactly.
void assign_static_shares(std::vector<StripeSpec>& stripes, double total_kw);

/// Rejects inverted or overlapping stripes and stripes that cover a node.
void validate_stripes(const std::vector<StripeSpec>& stripes, const CorridorSpec& corridor);

using RelationMatrix = std::array<std::array<double, kNodeCount>, kNodeCount>;

/// Origin-destination fractions of lambda between entry/exit nodes 1..5.
RelationMatrix default_relations();

struct TrafficDemand {
  double lambda_vpm = 12.0;
  RelationMatrix relations = default_relations();
  std::optional<double> vut_period_s;
  std::uint64_t seed = 1;

  /// Arrival rate of an origin-destination pair in vehicles per minute.
  double rate_vpm(int entry, int exit) const {
    return lambda_vpm * relations.at(static_cast<std::size_t>(entry - 1)).at(static_cast<std::size_t>(exit - 1));
  }
  void validate() const;
};

struct ConsumptionModel {
  double idle_kw = 2.0;
  double per_speed_kw = 0.72;  // kW per m/s

  double drive_power(double speed_mps) const { return idle_kw + per_speed_kw * speed_mps; }
};

struct QpSettings {
  double tol = 1e-5;
  int max_iter = 20000;
};

struct MpcConfig {
  int horizon = 6;
  double delta_t_s = 5.0;
  double lambda = 0.001;
  double xi = 0.01;
  double rho = 4.0;
  double tau_min_s = 10.0;
  double price = 1.0;
  double p_min_s_kw = 1.0;
  QpSettings qp;

  void validate() const;
};

struct SimConfig {
  double tick_s = 1.0;
  double control_interval_s = 5.0;
  double warmup_s = 900.0;
  double measure_s = 3600.0;
  double total_power_kw = 16000.0;
  Strategy strategy = Strategy::mpc;
  MpcConfig mpc;
  Range init_soc{0.1, 0.5};
  Range target_soc{0.5, 1.0};
  Range capacity_kwh{40.0, 80.0};
  double p_on_kw = 150.0;
  double charge_time_constant_s = 300.0;
  double avg_speed_window_s = 60.0;
  ConsumptionModel consumption;

  /// Number of mobility ticks per control interval.
  int ticks_per_interval() const;
  void validate() const;
};

struct Scenario {
  CorridorSpec corridor;
  std::vector<StripeSpec> stripes;
  TrafficDemand demand;
  SimConfig config;

  /// Checks cross-module invariants: stripe layout, budget headroom below the
  /// deliverable power, and P_min <= static share so the MPC stays feasible.
  void validate() const;
};

/// The default corridor: 10 mirrored stripes, 16 MW budget, 5 s control.
Scenario build_default_scenario();

/// Per-stripe lengths used by build_default_scenario(), one direction.
inline constexpr std::array<double, 5> kDefaultStripeLengths{628.0, 900.0, 1100.0, 1276.0, 1000.0};

struct Arrival {
  double time_s = 0.0;
  int entry = 1;
  int exit = 5;
  bool is_vut = false;
};

struct TimeWindow {
  double t0 = 0.0;
  double t1 = 0.0;
};

/// Poisson arrivals per origin-destination pair plus periodic VUT
/// injections, sorted by time. Deterministic for a fixed demand seed.
std::vector<Arrival> generate_arrivals(const TrafficDemand& demand, TimeWindow window);

struct BatteryProfile {
  double soc_init = 0.0;
  double soc_target = 1.0;
  double capacity_kwh = 50.0;
};

inline constexpr double kVutInitialSoc = 0.02;
inline constexpr double kVutTargetSoc = 1.0;

/// Draws initial SoC, target SoC and capacity for every arrival from a
/// stream independent of the arrival times.
std::vector<BatteryProfile> sample_profiles(const std::vector<Arrival>& arrivals, const SimConfig& config,
                                            std::uint64_t seed);

// Configuration I/O. JSON documents mirror the structs above; key = value
// files use dotted paths into the same document (e.g. `mpc.horizon = 8`).
nlohmann::json to_json(const Scenario& scenario);
Scenario scenario_from_json(const nlohmann::json& doc);
Scenario load_scenario(const std::string& path);
Scenario parse_scenario_text(const std::string& text);

}  // namespace dic
