#pragma once

#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "dic/allocation.hpp"
#include "dic/mobility.hpp"
#include "dic/mpc.hpp"
#include "dic/scenario.hpp"

namespace dic {

struct Route {
  int entry_node = 1;
  int exit_node = 5;
  double position_m = 0.0;

  bool operator==(const Route&) const = default;
};

/// Vehicle to ITS-PM. Besides the battery and pad fields the report carries
/// the kinematics the allocator extrapolates from (direction, current and
/// mean speed).
struct VehicleReport {
  int id = 0;
  double bc_kwh = 0.0;  // BC
  double bl = 0.0;      // BL
  double bte = 1.0;     // BTE
  double padp_kw = 0.0; // PADP
  Route route;          // ROUTE
  Direction direction = Direction::southbound;
  double speed_mps = 0.0;
  double mean_speed_mps = 0.0;
  bool is_vut = false;

  bool operator==(const VehicleReport&) const = default;
};

/// ITS-PM to vehicle. `stripe` names the stripe PASS is drawn from.
struct AllocationMsg {
  int id = 0;
  double pcoil_kw = 0.0;  // PCOIL
  double pass_kw = 0.0;   // PASS
  double dt_s = 0.0;      // DT
  double ptol_kw = 0.0;   // PTOL
  double exit_m = 0.0;    // EXIT
  double tex_s = 0.0;     // TEX
  std::optional<int> stripe;

  bool operator==(const AllocationMsg&) const = default;
};

struct RoundLog {
  double time_s = 0.0;
  std::vector<VehicleReport> reports;
  std::vector<AllocationMsg> allocations;
  std::vector<double> stripe_kw;  // P_s for the coming interval
  double solve_ms = 0.0;

  bool operator==(const RoundLog&) const = default;
};

class ProtocolError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// One report per vehicle on the corridor, in input order.
std::vector<VehicleReport> collect_reports(const std::vector<VehicleState>& vehicles, double now_s, double window_s);

/// Vehicle state as far as the allocator can reconstruct it from a report.
VehicleState vehicle_from_report(const VehicleReport& r);

/// MPC input built from reports alone, so a replayed log yields identical
/// allocator inputs.
MpcInstance instance_from_reports(const std::vector<VehicleReport>& reports, const Scenario& scenario, double now_s);

/// One message per report. Throws ProtocolError if the plan misses a vehicle.
std::vector<AllocationMsg> dispatch_allocations(const AllocationPlan& plan, const std::vector<VehicleReport>& reports,
                                                const Scenario& scenario);

// JSONL round log: a header line followed by one record per round.
inline constexpr int kRoundLogVersion = 1;

struct RoundLogHeader {
  int version = kRoundLogVersion;
  Scenario scenario;  // strategy of the logged run included
};

nlohmann::json to_json(const VehicleReport& r);
nlohmann::json to_json(const AllocationMsg& m);
nlohmann::json to_json(const RoundLog& r);
VehicleReport report_from_json(const nlohmann::json& j);
AllocationMsg allocation_from_json(const nlohmann::json& j);
RoundLog round_from_json(const nlohmann::json& j);

class RoundLogWriter {
 public:
  RoundLogWriter(std::ostream& out, const RoundLogHeader& header);
  void write(const RoundLog& round);

 private:
  std::ostream& out_;
};

/// Streams records back. An empty input has no header and no rounds.
class RoundLogReader {
 public:
  explicit RoundLogReader(std::istream& in);
  const std::optional<RoundLogHeader>& header() const { return header_; }
  std::optional<RoundLog> next();
  int line() const { return line_; }

 private:
  std::optional<std::string> next_line();

  std::istream& in_;
  std::optional<RoundLogHeader> header_;
  int line_ = 0;
};

}  // namespace dic
