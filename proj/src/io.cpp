#include "dic/io.hpp"

#include <charconv>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace dic {

std::string format_number(double x) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, r.ptr);
}

namespace {

class Row {
 public:
  explicit Row(std::ostream& out) : out_(out) {}
  Row& operator<<(double x) { return put(format_number(x)); }
  Row& operator<<(int x) { return put(std::to_string(x)); }
  Row& operator<<(bool x) { return put(x ? "1" : "0"); }
  Row& operator<<(const std::string& s) { return put(s); }
  ~Row() { out_ << '\n'; }

 private:
  Row& put(const std::string& s) {
    if (!first_) out_ << ',';
    out_ << s;
    first_ = false;
    return *this;
  }
  std::ostream& out_;
  bool first_ = true;
};

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

// Reads a header and rows, checking the column count of each row.
class CsvReader {
 public:
  CsvReader(std::istream& in, const std::string& name) : in_(in), name_(name) {
    std::string line;
    if (!std::getline(in_, line)) throw std::runtime_error(name_ + ": missing header");
    header_ = split(strip(line));
  }

  const std::vector<std::string>& header() const { return header_; }

  bool next(std::vector<std::string>& cells) {
    std::string line;
    while (std::getline(in_, line)) {
      ++line_;
      line = strip(line);
      if (line.empty()) continue;
      cells = split(line);
      if (cells.size() != header_.size())
        fail("expected " + std::to_string(header_.size()) + " fields, got " + std::to_string(cells.size()));
      return true;
    }
    return false;
  }

  double number(const std::string& s) const {
    double x = 0.0;
    const auto r = std::from_chars(s.data(), s.data() + s.size(), x);
    if (r.ec != std::errc() || r.ptr != s.data() + s.size()) fail("bad number '" + s + "'");
    return x;
  }

  int integer(const std::string& s) const {
    int x = 0;
    const auto r = std::from_chars(s.data(), s.data() + s.size(), x);
    if (r.ec != std::errc() || r.ptr != s.data() + s.size()) fail("bad integer '" + s + "'");
    return x;
  }

  bool flag(const std::string& s) const {
    if (s == "1") return true;
    if (s == "0") return false;
    fail("bad flag '" + s + "'");
  }

  [[noreturn]] void fail(const std::string& what) const {
    throw std::runtime_error(name_ + " line " + std::to_string(line_ + 1) + ": " + what);
  }

 private:
  static std::string strip(std::string s) {
    while (!s.empty() && (s.back() == '\r' || s.back() == ' ')) s.pop_back();
    return s;
  }

  std::istream& in_;
  std::string name_;
  std::vector<std::string> header_;
  int line_ = 0;
};

const std::vector<std::string> kExitColumns{"id",         "vut",        "measured",   "entry_node",  "exit_node",
                                            "capacity_kwh", "soc_init", "soc_target", "soc_exit",    "entry_time_s",
                                            "exit_time_s", "energy_kwh"};
const std::vector<std::string> kTraceColumns{"time_s", "id", "position_m", "speed_mps", "soc", "energy_kwh"};
const std::vector<std::string> kIntervalColumns{"time_s", "measured", "vehicles", "requested_kw", "delivered_kw"};

void write_header(std::ostream& out, const std::vector<std::string>& cols) {
  Row r(out);
  for (const auto& c : cols) r << c;
}

void expect_header(const CsvReader& csv, const std::vector<std::string>& cols) {
  if (csv.header() != cols) csv.fail("unexpected columns");
}

}  // namespace

void write_exits_csv(std::ostream& out, const std::vector<ExitRecord>& exits) {
  write_header(out, kExitColumns);
  for (const auto& e : exits)
    Row(out) << e.id << e.is_vut << e.measured << e.entry_node << e.exit_node << e.capacity_kwh << e.soc_init
             << e.soc_target << e.soc_exit << e.entry_time_s << e.exit_time_s << e.energy_kwh;
}

std::vector<ExitRecord> read_exits_csv(std::istream& in) {
  CsvReader csv(in, "exits.csv");
  expect_header(csv, kExitColumns);
  std::vector<ExitRecord> out;
  std::vector<std::string> c;
  while (csv.next(c)) {
    ExitRecord e;
    e.id = csv.integer(c[0]);
    e.is_vut = csv.flag(c[1]);
    e.measured = csv.flag(c[2]);
    e.entry_node = csv.integer(c[3]);
    e.exit_node = csv.integer(c[4]);
    e.capacity_kwh = csv.number(c[5]);
    e.soc_init = csv.number(c[6]);
    e.soc_target = csv.number(c[7]);
    e.soc_exit = csv.number(c[8]);
    e.entry_time_s = csv.number(c[9]);
    e.exit_time_s = csv.number(c[10]);
    e.energy_kwh = csv.number(c[11]);
    out.push_back(e);
  }
  return out;
}

void write_intervals_csv(std::ostream& out, const std::vector<IntervalRecord>& intervals) {
  const std::size_t stripes = intervals.empty() ? 0 : intervals.front().stripe_delivered_kw.size();
  auto cols = kIntervalColumns;
  for (const char* kind : {"requested_s", "delivered_s", "allocated_s"})
    for (std::size_t s = 0; s < stripes; ++s) cols.push_back(kind + std::to_string(s));
  write_header(out, cols);
  for (const auto& r : intervals) {
    Row row(out);
    row << r.time_s << r.measured << r.vehicles << r.requested_kw << r.delivered_kw;
    for (const auto* v : {&r.stripe_requested_kw, &r.stripe_delivered_kw, &r.stripe_allocated_kw})
      for (double x : *v) row << x;
  }
}

std::vector<IntervalRecord> read_intervals_csv(std::istream& in) {
  CsvReader csv(in, "intervals.csv");
  const auto& h = csv.header();
  if (h.size() < kIntervalColumns.size() || (h.size() - kIntervalColumns.size()) % 3 != 0 ||
      !std::equal(kIntervalColumns.begin(), kIntervalColumns.end(), h.begin()))
    csv.fail("unexpected columns");
  const std::size_t stripes = (h.size() - kIntervalColumns.size()) / 3;
  std::vector<IntervalRecord> out;
  std::vector<std::string> c;
  while (csv.next(c)) {
    IntervalRecord r;
    r.time_s = csv.number(c[0]);
    r.measured = csv.flag(c[1]);
    r.vehicles = csv.integer(c[2]);
    r.requested_kw = csv.number(c[3]);
    r.delivered_kw = csv.number(c[4]);
    std::size_t k = kIntervalColumns.size();
    for (auto* v : {&r.stripe_requested_kw, &r.stripe_delivered_kw, &r.stripe_allocated_kw})
      for (std::size_t s = 0; s < stripes; ++s) v->push_back(csv.number(c[k++]));
    out.push_back(std::move(r));
  }
  return out;
}

void write_trace_csv(std::ostream& out, const std::vector<TraceSample>& trace) {
  write_header(out, kTraceColumns);
  for (const auto& s : trace) Row(out) << s.time_s << s.id << s.position_m << s.speed_mps << s.soc << s.energy_kwh;
}

std::vector<TraceSample> read_trace_csv(std::istream& in) {
  CsvReader csv(in, "trace.csv");
  expect_header(csv, kTraceColumns);
  std::vector<TraceSample> out;
  std::vector<std::string> c;
  while (csv.next(c))
    out.push_back({csv.number(c[0]), csv.integer(c[1]), csv.number(c[2]), csv.number(c[3]), csv.number(c[4]),
                   csv.number(c[5])});
  return out;
}

nlohmann::json distribution_summary(const Distribution& d) {
  return {{"count", d.size()},         {"mean", d.mean}, {"median", d.median},
          {"p10", d.p10},              {"p90", d.p90},   {"below_half", d.fraction_below(0.5)},
          {"full", d.fraction_full()}};
}

nlohmann::json run_summary(const RunResult& result) {
  const auto& st = result.stats;
  const auto& en = result.energy;
  const auto u = utilization(result.intervals, result.scenario.config.total_power_kw);
  const auto f = fulfillment_stats(result.exits);
  return {{"scenario", to_json(result.scenario)},
          {"seed", result.scenario.demand.seed},
          {"strategy", to_string(result.scenario.config.strategy)},
          {"stats",
           {{"inserted", st.inserted},
            {"exited", st.exited},
            {"on_road_at_end", st.on_road_at_end},
            {"rounds", st.rounds},
            {"max_plan_violation_kw", st.max_plan_violation_kw},
            {"max_clip_kw", st.max_clip_kw},
            {"max_budget_excess_kw", st.max_budget_excess_kw},
            {"max_stripe_excess_kw", st.max_stripe_excess_kw},
            {"total_solve_ms", st.total_solve_ms},
            {"max_solve_ms", st.max_solve_ms},
            {"total_iterations", st.total_iterations}}},
          {"energy",
           {{"delivered_kwh", en.delivered_kwh},
            {"stored_kwh", en.stored_kwh},
            {"consumed_kwh", en.consumed_kwh},
            {"clamp_kwh", en.clamp_kwh},
            {"clamp_events", en.clamp_events},
            {"battery_gain_kwh", en.battery_gain_kwh},
            {"residual_kwh", en.residual()}}},
          {"utilization",
           {{"requested_kw", u.requested_kw},
            {"delivered_kw", u.delivered_kw},
            {"delivered_over_requested", u.delivered_over_requested},
            {"delivered_over_budget", u.delivered_over_budget},
            {"intervals", u.intervals}}},
          {"fulfillment", {{"regular", distribution_summary(f.regular)}, {"vut", distribution_summary(f.vut)}}}};
}

namespace {

std::ofstream open_out(const std::filesystem::path& p) {
  std::ofstream out(p);
  if (!out) throw std::runtime_error("cannot write " + p.string());
  return out;
}

std::ifstream open_in(const std::filesystem::path& p) {
  std::ifstream in(p);
  if (!in) throw std::runtime_error("cannot read " + p.string());
  return in;
}

}  // namespace

void write_outputs(const std::filesystem::path& dir, const RunResult& result) {
  std::filesystem::create_directories(dir);
  {
    auto out = open_out(dir / "exits.csv");
    write_exits_csv(out, result.exits);
  }
  {
    auto out = open_out(dir / "intervals.csv");
    write_intervals_csv(out, result.intervals);
  }
  {
    auto out = open_out(dir / "run.json");
    out << run_summary(result).dump(2) << '\n';
  }
  if (!result.trace.empty()) {
    auto out = open_out(dir / "trace.csv");
    write_trace_csv(out, result.trace);
  }
}

RunOutputs read_outputs(const std::filesystem::path& dir) {
  RunOutputs r;
  {
    auto in = open_in(dir / "run.json");
    r.scenario = scenario_from_json(nlohmann::json::parse(in).at("scenario"));
  }
  {
    auto in = open_in(dir / "exits.csv");
    r.exits = read_exits_csv(in);
  }
  {
    auto in = open_in(dir / "intervals.csv");
    r.intervals = read_intervals_csv(in);
  }
  if (std::filesystem::exists(dir / "trace.csv")) {
    auto in = open_in(dir / "trace.csv");
    r.trace = read_trace_csv(in);
  }
  return r;
}

void write_fulfillment_header(std::ostream& out) { write_header(out, {"run", "id", "vut", "phi"}); }

void write_fulfillment_csv(std::ostream& out, const std::string& label, const std::vector<ExitRecord>& exits) {
  for (const auto& e : exits)
    if (e.measured) Row(out) << label << e.id << e.is_vut << fulfillment(e);
}

void write_cdf_header(std::ostream& out) { write_header(out, {"run", "group", "kind", "x", "value"}); }

void write_cdf_csv(std::ostream& out, const std::string& label, const FulfillmentStats& stats) {
  for (const auto& [group, d] : {std::pair<std::string, const Distribution*>{"regular", &stats.regular},
                                 std::pair<std::string, const Distribution*>{"vut", &stats.vut}}) {
    if (d->empty()) continue;
    for (const auto& p : d->cdf) Row(out) << label << group << std::string("cdf") << p.x << p.p;
    for (std::size_t b = 0; b < d->pdf.size(); ++b)
      Row(out) << label << group << std::string("pdf") << static_cast<double>(b) * kPdfBinWidth << d->pdf[b];
  }
}

void write_trajectories_header(std::ostream& out) {
  write_header(out, {"run", "set", "id", "demand_kwh", "time_s", "energy_kwh"});
}

void write_trajectories_csv(std::ostream& out, const std::string& label, const TrajectoryExtract& t) {
  for (const auto& [set, list] : {std::pair<std::string, const std::vector<EnergySeries>*>{"high", &t.high},
                                  std::pair<std::string, const std::vector<EnergySeries>*>{"low", &t.low}})
    for (const auto& s : *list)
      for (const auto& [time, e] : s.points) Row(out) << label << set << s.id << s.demand_kwh << time << e;
}

}  // namespace dic
