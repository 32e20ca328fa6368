#include "dic/protocol.hpp"

#include <istream>
#include <ostream>

namespace dic {

std::vector<VehicleReport> collect_reports(const std::vector<VehicleState>& vehicles, double now_s, double window_s) {
  std::vector<VehicleReport> out;
  out.reserve(vehicles.size());
  for (const auto& v : vehicles) {
    VehicleReport r;
    r.id = v.id;
    r.bc_kwh = v.capacity_kwh;
    r.bl = v.soc;
    r.bte = v.soc_target;
    r.padp_kw = v.p_on_kw;
    r.route = {v.entry_node, v.exit_node, v.position_m};
    r.direction = v.direction;
    r.speed_mps = v.speed_mps;
    r.mean_speed_mps = mean_speed(v, now_s, window_s);
    r.is_vut = v.is_vut;
    out.push_back(r);
  }
  return out;
}

VehicleState vehicle_from_report(const VehicleReport& r) {
  VehicleState v;
  v.id = r.id;
  v.direction = r.direction;
  v.position_m = r.route.position_m;
  v.speed_mps = r.speed_mps;
  v.entry_node = r.route.entry_node;
  v.exit_node = r.route.exit_node;
  v.soc = r.bl;
  v.soc_target = r.bte;
  v.capacity_kwh = r.bc_kwh;
  v.p_on_kw = r.padp_kw;
  v.is_vut = r.is_vut;
  return v;
}

MpcInstance instance_from_reports(const std::vector<VehicleReport>& reports, const Scenario& scenario, double now_s) {
  MpcInstance inst;
  inst.time_s = now_s;
  inst.stripes = scenario.stripes;
  inst.total_power_kw = scenario.config.total_power_kw;
  inst.config = scenario.config.mpc;
  inst.vehicles.reserve(reports.size());
  for (const auto& r : reports)
    inst.vehicles.push_back(make_mpc_vehicle(vehicle_from_report(r), r.mean_speed_mps, scenario));
  return inst;
}

std::vector<AllocationMsg> dispatch_allocations(const AllocationPlan& plan, const std::vector<VehicleReport>& reports,
                                                const Scenario& scenario) {
  std::vector<AllocationMsg> out;
  out.reserve(reports.size());
  for (const auto& r : reports) {
    const auto it = plan.per_vehicle.find(r.id);
    if (it == plan.per_vehicle.end())
      throw ProtocolError("allocation plan has no entry for vehicle " + std::to_string(r.id));
    const auto v = vehicle_from_report(r);
    AllocationMsg m;
    m.id = r.id;
    m.stripe = it->second.stripe;
    m.pcoil_kw = m.stripe ? scenario.stripes.at(static_cast<std::size_t>(*m.stripe)).coil_power_nom_kw : 0.0;
    m.pass_kw = it->second.power_kw;
    m.dt_s = scenario.config.control_interval_s;
    m.ptol_kw = 0.0;
    m.exit_m = scenario.corridor.node_position(r.route.exit_node);
    m.tex_s = std::max(0.0, distance_to_exit(v, scenario.corridor)) / std::max(r.mean_speed_mps, kMinPredictionSpeed);
    out.push_back(m);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Codec

namespace {

Direction direction_from(const std::string& s) {
  if (s == "southbound") return Direction::southbound;
  if (s == "northbound") return Direction::northbound;
  throw ProtocolError("unknown direction '" + s + "'");
}

}  // namespace

nlohmann::json to_json(const VehicleReport& r) {
  return {{"id", r.id},
          {"BC", r.bc_kwh},
          {"BL", r.bl},
          {"BTE", r.bte},
          {"PADP", r.padp_kw},
          {"ROUTE", {r.route.entry_node, r.route.exit_node, r.route.position_m}},
          {"dir", to_string(r.direction)},
          {"speed", r.speed_mps},
          {"mean_speed", r.mean_speed_mps},
          {"vut", r.is_vut}};
}

nlohmann::json to_json(const AllocationMsg& m) {
  return {{"id", m.id},
          {"PCOIL", m.pcoil_kw},
          {"PASS", m.pass_kw},
          {"DT", m.dt_s},
          {"PTOL", m.ptol_kw},
          {"EXIT", m.exit_m},
          {"TEX", m.tex_s},
          {"stripe", m.stripe ? nlohmann::json(*m.stripe) : nlohmann::json(nullptr)}};
}

nlohmann::json to_json(const RoundLog& r) {
  nlohmann::json reports = nlohmann::json::array();
  for (const auto& x : r.reports) reports.push_back(to_json(x));
  nlohmann::json allocations = nlohmann::json::array();
  for (const auto& x : r.allocations) allocations.push_back(to_json(x));
  return {{"t", r.time_s},
          {"solve_ms", r.solve_ms},
          {"stripes", r.stripe_kw},
          {"reports", reports},
          {"allocations", allocations}};
}

VehicleReport report_from_json(const nlohmann::json& j) {
  VehicleReport r;
  r.id = j.at("id").get<int>();
  r.bc_kwh = j.at("BC").get<double>();
  r.bl = j.at("BL").get<double>();
  r.bte = j.at("BTE").get<double>();
  r.padp_kw = j.at("PADP").get<double>();
  const auto& route = j.at("ROUTE");
  if (!route.is_array() || route.size() != 3) throw ProtocolError("ROUTE must be [entry, exit, position]");
  r.route = {route[0].get<int>(), route[1].get<int>(), route[2].get<double>()};
  r.direction = direction_from(j.at("dir").get<std::string>());
  r.speed_mps = j.at("speed").get<double>();
  r.mean_speed_mps = j.at("mean_speed").get<double>();
  r.is_vut = j.at("vut").get<bool>();
  if (!(r.bc_kwh > 0.0) || !(r.bl >= 0.0 && r.bl <= 1.0) || !(r.bte > 0.0 && r.bte <= 1.0) || !(r.padp_kw > 0.0))
    throw ProtocolError("vehicle report " + std::to_string(r.id) + " out of range");
  return r;
}

AllocationMsg allocation_from_json(const nlohmann::json& j) {
  AllocationMsg m;
  m.id = j.at("id").get<int>();
  m.pcoil_kw = j.at("PCOIL").get<double>();
  m.pass_kw = j.at("PASS").get<double>();
  m.dt_s = j.at("DT").get<double>();
  m.ptol_kw = j.at("PTOL").get<double>();
  m.exit_m = j.at("EXIT").get<double>();
  m.tex_s = j.at("TEX").get<double>();
  if (j.contains("stripe") && !j.at("stripe").is_null()) m.stripe = j.at("stripe").get<int>();
  if (!(m.pass_kw >= 0.0) || !(m.dt_s > 0.0))
    throw ProtocolError("allocation for vehicle " + std::to_string(m.id) + " out of range");
  return m;
}

RoundLog round_from_json(const nlohmann::json& j) {
  RoundLog r;
  r.time_s = j.at("t").get<double>();
  r.solve_ms = j.at("solve_ms").get<double>();
  r.stripe_kw = j.at("stripes").get<std::vector<double>>();
  for (const auto& x : j.at("reports")) r.reports.push_back(report_from_json(x));
  for (const auto& x : j.at("allocations")) r.allocations.push_back(allocation_from_json(x));
  if (r.reports.size() != r.allocations.size()) throw ProtocolError("round has unequal report and allocation counts");
  return r;
}

RoundLogWriter::RoundLogWriter(std::ostream& out, const RoundLogHeader& header) : out_(out) {
  out_ << nlohmann::json{{"format", "dic-rounds"}, {"version", header.version}, {"scenario", to_json(header.scenario)}}
              .dump()
       << '\n';
}

void RoundLogWriter::write(const RoundLog& round) { out_ << to_json(round).dump() << '\n'; }

RoundLogReader::RoundLogReader(std::istream& in) : in_(in) {
  const auto first = next_line();
  if (!first) return;
  try {
    const auto doc = nlohmann::json::parse(*first);
    if (doc.at("format").get<std::string>() != "dic-rounds") throw ProtocolError("not a round log");
    RoundLogHeader h;
    h.version = doc.at("version").get<int>();
    if (h.version != kRoundLogVersion) throw ProtocolError("unsupported round log version " + std::to_string(h.version));
    h.scenario = scenario_from_json(doc.at("scenario"));
    header_ = std::move(h);
  } catch (const std::exception& e) {
    throw ProtocolError("round log line " + std::to_string(line_) + ": " + e.what());
  }
}

std::optional<std::string> RoundLogReader::next_line() {
  std::string s;
  while (std::getline(in_, s)) {
    ++line_;
    if (s.find_first_not_of(" \t\r") != std::string::npos) return s;
  }
  return std::nullopt;
}

std::optional<RoundLog> RoundLogReader::next() {
  const auto s = next_line();
  if (!s) return std::nullopt;
  try {
    return round_from_json(nlohmann::json::parse(*s));
  } catch (const std::exception& e) {
    throw ProtocolError("round log line " + std::to_string(line_) + ": " + e.what());
  }
}

}  // namespace dic
