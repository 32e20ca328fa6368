#include "dic/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>
#include <stdexcept>

namespace dic {

const char* to_string(Direction d) { return d == Direction::southbound ? "southbound" : "northbound"; }

const char* to_string(Strategy s) { return s == Strategy::benchmark ? "benchmark" : "mpc"; }

Strategy parse_strategy(const std::string& s) {
  if (s == "benchmark" || s == "bench") return Strategy::benchmark;
  if (s == "mpc" || s == "opt") return Strategy::mpc;
  throw std::invalid_argument("unknown strategy '" + s + "' (expected benchmark or mpc)");
}

namespace {

Direction parse_direction(const std::string& s) {
  if (s == "southbound") return Direction::southbound;
  if (s == "northbound") return Direction::northbound;
  throw std::invalid_argument("unknown direction '" + s + "'");
}

void require(bool condition, const std::string& message) {
  if (!condition) throw std::invalid_argument(message);
}

}  // namespace

void CorridorSpec::validate() const {
  require(length_m > 0.0, "corridor length must be positive");
  require(directions == 2, "corridor must have two directions");
  require(lanes_per_direction >= 1, "corridor needs at least one lane per direction");
  require(node_positions_m.front() == 0.0, "first node must sit at position 0");
  require(node_positions_m.back() == length_m, "last node must sit at the corridor length");
  for (std::size_t i = 1; i < node_positions_m.size(); ++i)
    require(node_positions_m[i] > node_positions_m[i - 1], "node positions must be strictly increasing");
  require(free_flow_speed_mps > 0.0, "free-flow speed must be positive");
  require(jam_spacing_m > 0.0, "jam spacing must be positive");
}

double deliverable_power(const StripeSpec& stripe) {
  const double coils = std::floor(stripe.length() / stripe.coil_spacing_m);
  return 2.0 * coils * stripe.efficiency * stripe.coil_power_nom_kw;
}

void assign_static_shares(std::vector<StripeSpec>& stripes, double total_kw) {
  if (stripes.empty()) return;
  const double total_length =
      std::accumulate(stripes.begin(), stripes.end(), 0.0, [](double acc, const StripeSpec& s) { return acc + s.length(); });
  require(total_length > 0.0, "stripes have zero total length");
  require(total_kw >= 0.0 && std::floor(total_kw) == total_kw, "total power must be a whole number of kW");

  std::vector<double> floors(stripes.size());
  std::vector<double> remainders(stripes.size());
  double assigned = 0.0;
  for (std::size_t i = 0; i < stripes.size(); ++i) {
    const double exact = total_kw * stripes[i].length() / total_length;
    floors[i] = std::floor(exact);
    remainders[i] = exact - floors[i];
    assigned += floors[i];
  }
  auto leftover = static_cast<long>(std::llround(total_kw - assigned));

  std::vector<std::size_t> order(stripes.size());
  std::iota(order.begin(), order.end(), 0);
  // Ties go to the lower index.
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return remainders[a] > remainders[b]; });
  for (std::size_t k = 0; k < order.size() && leftover > 0; ++k, --leftover) floors[order[k]] += 1.0;

  for (std::size_t i = 0; i < stripes.size(); ++i) stripes[i].static_share_kw = floors[i];
}

void validate_stripes(const std::vector<StripeSpec>& stripes, const CorridorSpec& corridor) {
  for (const auto& s : stripes) {
    const std::string tag = "stripe " + std::to_string(s.id) + ": ";
    require(s.end_m > s.start_m, tag + "end must lie after start");
    require(s.start_m >= 0.0 && s.end_m <= corridor.length_m, tag + "must lie inside the corridor");
    require(s.coil_spacing_m > 0.0, tag + "coil spacing must be positive");
    require(s.coil_power_nom_kw > 0.0, tag + "nominal coil power must be positive");
    require(s.efficiency > 0.0 && s.efficiency <= 1.0, tag + "efficiency must lie in (0, 1]");
    require(s.p_min_kw > 0.0, tag + "minimum power must be positive");
    require(s.static_share_kw <= deliverable_power(s), tag + "static share exceeds deliverable power");
    for (double node : corridor.node_positions_m)
      require(node < s.start_m || node > s.end_m, tag + "must not cover a node");
  }
  for (std::size_t i = 0; i < stripes.size(); ++i) {
    for (std::size_t j = i + 1; j < stripes.size(); ++j) {
      const auto& a = stripes[i];
      const auto& b = stripes[j];
      require(a.id != b.id, "duplicate stripe id " + std::to_string(a.id));
      if (a.direction != b.direction) continue;
      require(a.end_m < b.start_m || b.end_m < a.start_m,
              "stripes " + std::to_string(a.id) + " and " + std::to_string(b.id) + " overlap");
    }
  }
}

RelationMatrix default_relations() {
  RelationMatrix m{};
  m[0] = {0.0, 1.0 / 8, 1.0 / 8, 1.0 / 4, 1.0 / 2};
  m[1] = {1.0 / 8, 0.0, 0.0, 0.0, 1.0 / 8};
  m[2] = {1.0 / 8, 0.0, 0.0, 0.0, 1.0 / 8};
  m[3] = {1.0 / 4, 0.0, 0.0, 0.0, 1.0 / 4};
  m[4] = {1.0 / 2, 1.0 / 8, 1.0 / 8, 1.0 / 4, 0.0};
  return m;
}

void TrafficDemand::validate() const {
  require(lambda_vpm >= 0.0, "lambda must be non-negative");
  for (int i = 1; i <= kNodeCount; ++i) {
    for (int j = 1; j <= kNodeCount; ++j) {
      const double f = relations[i - 1][j - 1];
      require(f >= 0.0, "relation fractions must be non-negative");
      if (i == j) require(f == 0.0, "relation matrix diagonal must be zero");
      const bool terminal = i == 1 || i == kNodeCount || j == 1 || j == kNodeCount;
      if (!terminal) require(f == 0.0, "traffic between intermediate nodes is not supported");
    }
  }
  if (vut_period_s) require(*vut_period_s > 0.0, "VUT period must be positive");
}

void MpcConfig::validate() const {
  require(horizon >= 1, "MPC horizon must be at least one step");
  require(delta_t_s > 0.0, "MPC step must be positive");
  require(rho > 1.0, "stripe transfer coefficient rho must exceed 1");
  require(tau_min_s > 0.0, "tau_min must be positive");
  require(xi >= 0.0, "xi must be non-negative");
  require(lambda >= 0.0, "lambda must be non-negative");
  require(p_min_s_kw > 0.0, "stripe minimum power must be positive");
  require(qp.tol > 0.0 && qp.max_iter > 0, "QP settings must be positive");
}

int SimConfig::ticks_per_interval() const { return static_cast<int>(std::llround(control_interval_s / tick_s)); }

void SimConfig::validate() const {
  require(tick_s > 0.0, "tick must be positive");
  require(control_interval_s > 0.0, "control interval must be positive");
  const double ratio = control_interval_s / tick_s;
  require(std::abs(ratio - std::round(ratio)) < 1e-9 && ratio >= 1.0,
          "control interval must be an integer multiple of the tick");
  require(warmup_s >= 0.0 && measure_s >= 0.0 && warmup_s + measure_s > 0.0, "run must have positive duration");
  require(total_power_kw > 0.0, "total power must be positive");
  auto in_unit = [](Range r) { return 0.0 <= r.lo && r.lo <= r.hi && r.hi <= 1.0; };
  require(in_unit(init_soc), "initial SoC range must lie within [0, 1]");
  require(in_unit(target_soc) && target_soc.lo > 0.0, "target SoC range must lie within (0, 1]");
  require(capacity_kwh.lo > 0.0 && capacity_kwh.lo <= capacity_kwh.hi, "capacity range must be positive");
  require(p_on_kw > 0.0, "on-board pad power must be positive");
  require(charge_time_constant_s > 0.0, "charge time constant must be positive");
  require(avg_speed_window_s > 0.0, "speed averaging window must be positive");
  require(consumption.idle_kw >= 0.0 && consumption.per_speed_kw >= 0.0, "consumption coefficients must be >= 0");
  mpc.validate();
  require(std::abs(mpc.delta_t_s - control_interval_s) < 1e-12, "MPC step must equal the control interval");
}

void Scenario::validate() const {
  corridor.validate();
  validate_stripes(stripes, corridor);
  demand.validate();
  config.validate();
  require(!stripes.empty(), "scenario needs at least one stripe");
  double shares = 0.0;
  double deliverable = 0.0;
  for (const auto& s : stripes) {
    shares += s.static_share_kw;
    deliverable += deliverable_power(s);
    require(s.static_share_kw < deliverable_power(s), "static share must stay below deliverable power");
    require(s.p_min_kw <= s.static_share_kw, "stripe minimum power exceeds its static share");
  }
  require(std::abs(shares - config.total_power_kw) < 1e-6, "static shares must sum to the total power");
  require(config.total_power_kw < deliverable, "total power must stay below the deliverable power");
}

Scenario build_default_scenario() {
  Scenario sc;
  // Two stripes between nodes 1 and 2, one in each of the other sections.
  const std::array<double, 5> starts{300.0, 1300.0, 3000.0, 5400.0, 8000.0};
  int id = 0;
  for (Direction d : {Direction::southbound, Direction::northbound}) {
    for (std::size_t i = 0; i < starts.size(); ++i) {
      StripeSpec s;
      s.id = id++;
      s.direction = d;
      s.start_m = starts[i];
      s.end_m = starts[i] + kDefaultStripeLengths[i];
      s.p_min_kw = sc.config.mpc.p_min_s_kw;
      sc.stripes.push_back(s);
    }
  }
  assign_static_shares(sc.stripes, sc.config.total_power_kw);
  sc.demand.vut_period_s.reset();
  sc.demand.seed = 1;
  return sc;
}

std::vector<Arrival> generate_arrivals(const TrafficDemand& demand, TimeWindow window) {
  if (!(window.t1 > window.t0)) throw std::invalid_argument("arrival window must satisfy t1 > t0");
  std::mt19937_64 rng(demand.seed);
  std::vector<Arrival> out;
  for (int entry = 1; entry <= kNodeCount; ++entry) {
    for (int exit = 1; exit <= kNodeCount; ++exit) {
      const double rate_per_s = demand.rate_vpm(entry, exit) / 60.0;
      if (rate_per_s <= 0.0) continue;
      std::exponential_distribution<double> gap(rate_per_s);
      for (double t = window.t0 + gap(rng); t < window.t1; t += gap(rng)) out.push_back({t, entry, exit, false});
    }
  }
  if (demand.vut_period_s) {
    bool southbound = true;
    for (double t = window.t0; t < window.t1; t += *demand.vut_period_s) {
      out.push_back({t, southbound ? 1 : kNodeCount, southbound ? kNodeCount : 1, true});
      southbound = !southbound;
    }
  }
  std::stable_sort(out.begin(), out.end(), [](const Arrival& a, const Arrival& b) { return a.time_s < b.time_s; });
  return out;
}

std::vector<BatteryProfile> sample_profiles(const std::vector<Arrival>& arrivals, const SimConfig& config,
                                            std::uint64_t seed) {
  // Separate stream so profiles do not shift when arrival rates change.
  std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ULL);
  std::uniform_real_distribution<double> init(config.init_soc.lo, config.init_soc.hi);
  std::uniform_real_distribution<double> target(config.target_soc.lo, config.target_soc.hi);
  std::uniform_real_distribution<double> capacity(config.capacity_kwh.lo, config.capacity_kwh.hi);
  std::vector<BatteryProfile> out;
  out.reserve(arrivals.size());
  for (const auto& a : arrivals) {
    BatteryProfile p;
    p.soc_init = init(rng);
    p.soc_target = target(rng);
    p.capacity_kwh = capacity(rng);
    if (a.is_vut) {
      p.soc_init = kVutInitialSoc;
      p.soc_target = kVutTargetSoc;
    }
    // Targets below the starting level would make the vehicle a non-customer.
    p.soc_init = std::min(p.soc_init, p.soc_target);
    out.push_back(p);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Configuration I/O

nlohmann::json to_json(const Scenario& sc) {
  using nlohmann::json;
  json doc;
  const auto& c = sc.corridor;
  doc["corridor"] = {{"length_m", c.length_m},
                     {"directions", c.directions},
                     {"lanes_per_direction", c.lanes_per_direction},
                     {"node_positions_m", c.node_positions_m},
                     {"free_flow_speed_mps", c.free_flow_speed_mps},
                     {"jam_spacing_m", c.jam_spacing_m}};
  json stripes = json::array();
  for (const auto& s : sc.stripes) {
    stripes.push_back({{"id", s.id},
                       {"direction", to_string(s.direction)},
                       {"start_m", s.start_m},
                       {"end_m", s.end_m},
                       {"coil_spacing_m", s.coil_spacing_m},
                       {"coil_power_nom_kw", s.coil_power_nom_kw},
                       {"efficiency", s.efficiency},
                       {"p_min_kw", s.p_min_kw},
                       {"static_share_kw", s.static_share_kw}});
  }
  doc["stripes"] = stripes;
  const auto& d = sc.demand;
  doc["demand"] = {{"lambda_vpm", d.lambda_vpm},
                   {"relations", d.relations},
                   {"vut_period_s", d.vut_period_s ? json(*d.vut_period_s) : json(nullptr)},
                   {"seed", d.seed}};
  const auto& k = sc.config;
  const auto& m = k.mpc;
  doc["sim"] = {{"tick_s", k.tick_s},
                {"control_interval_s", k.control_interval_s},
                {"warmup_s", k.warmup_s},
                {"measure_s", k.measure_s},
                {"total_power_kw", k.total_power_kw},
                {"strategy", to_string(k.strategy)},
                {"init_soc", {k.init_soc.lo, k.init_soc.hi}},
                {"target_soc", {k.target_soc.lo, k.target_soc.hi}},
                {"capacity_kwh", {k.capacity_kwh.lo, k.capacity_kwh.hi}},
                {"p_on_kw", k.p_on_kw},
                {"charge_time_constant_s", k.charge_time_constant_s},
                {"avg_speed_window_s", k.avg_speed_window_s},
                {"consumption", {{"idle_kw", k.consumption.idle_kw}, {"per_speed_kw", k.consumption.per_speed_kw}}}};
  doc["mpc"] = {{"horizon", m.horizon},
                {"delta_t_s", m.delta_t_s},
                {"lambda", m.lambda},
                {"xi", m.xi},
                {"rho", m.rho},
                {"tau_min_s", m.tau_min_s},
                {"price", m.price},
                {"p_min_s_kw", m.p_min_s_kw},
                {"qp_tol", m.qp.tol},
                {"qp_max_iter", m.qp.max_iter}};
  return doc;
}

namespace {

template <typename T>
void read(const nlohmann::json& obj, const char* key, T& field) {
  if (obj.contains(key) && !obj.at(key).is_null()) field = obj.at(key).get<T>();
}

void read_range(const nlohmann::json& obj, const char* key, Range& r) {
  if (!obj.contains(key)) return;
  const auto& v = obj.at(key);
  require(v.is_array() && v.size() == 2, std::string(key) + " must be a [lo, hi] pair");
  r = {v[0].get<double>(), v[1].get<double>()};
}

}  // namespace

Scenario scenario_from_json(const nlohmann::json& doc) {
  Scenario sc = build_default_scenario();
  require(doc.is_object(), "configuration must be a JSON object");
  for (const auto& [key, _] : doc.items())
    require(key == "corridor" || key == "stripes" || key == "demand" || key == "sim" || key == "mpc",
            "unknown configuration section '" + key + "'");

  if (doc.contains("corridor")) {
    const auto& j = doc.at("corridor");
    auto& c = sc.corridor;
    read(j, "length_m", c.length_m);
    read(j, "directions", c.directions);
    read(j, "lanes_per_direction", c.lanes_per_direction);
    read(j, "node_positions_m", c.node_positions_m);
    read(j, "free_flow_speed_mps", c.free_flow_speed_mps);
    read(j, "jam_spacing_m", c.jam_spacing_m);
  }
  if (doc.contains("mpc")) {
    const auto& j = doc.at("mpc");
    auto& m = sc.config.mpc;
    read(j, "horizon", m.horizon);
    read(j, "delta_t_s", m.delta_t_s);
    read(j, "lambda", m.lambda);
    read(j, "xi", m.xi);
    read(j, "rho", m.rho);
    read(j, "tau_min_s", m.tau_min_s);
    read(j, "price", m.price);
    read(j, "p_min_s_kw", m.p_min_s_kw);
    read(j, "qp_tol", m.qp.tol);
    read(j, "qp_max_iter", m.qp.max_iter);
  }
  if (doc.contains("sim")) {
    const auto& j = doc.at("sim");
    auto& k = sc.config;
    read(j, "tick_s", k.tick_s);
    read(j, "control_interval_s", k.control_interval_s);
    read(j, "warmup_s", k.warmup_s);
    read(j, "measure_s", k.measure_s);
    read(j, "total_power_kw", k.total_power_kw);
    if (j.contains("strategy")) k.strategy = parse_strategy(j.at("strategy").get<std::string>());
    read_range(j, "init_soc", k.init_soc);
    read_range(j, "target_soc", k.target_soc);
    read_range(j, "capacity_kwh", k.capacity_kwh);
    read(j, "p_on_kw", k.p_on_kw);
    read(j, "charge_time_constant_s", k.charge_time_constant_s);
    read(j, "avg_speed_window_s", k.avg_speed_window_s);
    if (j.contains("consumption")) {
      read(j.at("consumption"), "idle_kw", k.consumption.idle_kw);
      read(j.at("consumption"), "per_speed_kw", k.consumption.per_speed_kw);
    }
    // The MPC step follows the control interval unless set explicitly.
    if (!(doc.contains("mpc") && doc.at("mpc").contains("delta_t_s"))) k.mpc.delta_t_s = k.control_interval_s;
  }
  if (doc.contains("demand")) {
    const auto& j = doc.at("demand");
    auto& d = sc.demand;
    read(j, "lambda_vpm", d.lambda_vpm);
    read(j, "relations", d.relations);
    if (j.contains("vut_period_s")) {
      const auto& v = j.at("vut_period_s");
      if (v.is_null() || (v.is_number() && v.get<double>() <= 0.0))
        d.vut_period_s.reset();
      else
        d.vut_period_s = v.get<double>();
    }
    read(j, "seed", d.seed);
  }

  bool explicit_shares = false;
  if (doc.contains("stripes")) {
    const auto& arr = doc.at("stripes");
    require(arr.is_array() && !arr.empty(), "stripes must be a non-empty array");
    sc.stripes.clear();
    explicit_shares = true;
    int next_id = 0;
    for (const auto& j : arr) {
      StripeSpec s;
      s.id = next_id++;
      s.p_min_kw = sc.config.mpc.p_min_s_kw;
      read(j, "id", s.id);
      if (j.contains("direction")) s.direction = parse_direction(j.at("direction").get<std::string>());
      read(j, "start_m", s.start_m);
      read(j, "end_m", s.end_m);
      read(j, "coil_spacing_m", s.coil_spacing_m);
      read(j, "coil_power_nom_kw", s.coil_power_nom_kw);
      read(j, "efficiency", s.efficiency);
      read(j, "p_min_kw", s.p_min_kw);
      explicit_shares = explicit_shares && j.contains("static_share_kw");
      read(j, "static_share_kw", s.static_share_kw);
      sc.stripes.push_back(s);
    }
  } else {
    for (auto& s : sc.stripes) s.p_min_kw = sc.config.mpc.p_min_s_kw;
  }
  if (!explicit_shares) assign_static_shares(sc.stripes, sc.config.total_power_kw);
  sc.validate();
  return sc;
}

namespace {

void set_dotted(nlohmann::json& doc, const std::string& path, nlohmann::json value) {
  nlohmann::json* node = &doc;
  std::size_t begin = 0;
  while (true) {
    const auto dot = path.find('.', begin);
    const std::string part = path.substr(begin, dot == std::string::npos ? std::string::npos : dot - begin);
    require(!part.empty(), "malformed key '" + path + "'");
    if (dot == std::string::npos) {
      (*node)[part] = std::move(value);
      return;
    }
    node = &(*node)[part];
    begin = dot + 1;
  }
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace

Scenario parse_scenario_text(const std::string& text) {
  const auto first = text.find_first_not_of(" \t\r\n");
  if (first != std::string::npos && text[first] == '{') return scenario_from_json(nlohmann::json::parse(text));

  nlohmann::json doc = nlohmann::json::object();
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument("config line " + std::to_string(line_no) + ": expected 'key = value'");
    const std::string key = trim(line.substr(0, eq));
    const std::string raw = trim(line.substr(eq + 1));
    nlohmann::json value = nlohmann::json::parse(raw, nullptr, false);
    if (value.is_discarded()) value = raw;
    set_dotted(doc, key, std::move(value));
  }
  return scenario_from_json(doc);
}

Scenario load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file " + path);
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_scenario_text(buffer.str());
}

}  // namespace dic
