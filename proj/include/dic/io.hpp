#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "dic/metrics.hpp"
#include "dic/sim.hpp"

namespace dic {

/// Shortest decimal text that reads back to the same double.
std::string format_number(double x);

void write_exits_csv(std::ostream& out, const std::vector<ExitRecord>& exits);
void write_intervals_csv(std::ostream& out, const std::vector<IntervalRecord>& intervals);
void write_trace_csv(std::ostream& out, const std::vector<TraceSample>& trace);

std::vector<ExitRecord> read_exits_csv(std::istream& in);
std::vector<IntervalRecord> read_intervals_csv(std::istream& in);
std::vector<TraceSample> read_trace_csv(std::istream& in);

/// Config echo, seed, run statistics, energy balance and a metrics summary.
nlohmann::json run_summary(const RunResult& result);

/// exits.csv, intervals.csv, run.json and, when recorded, trace.csv.
void write_outputs(const std::filesystem::path& dir, const RunResult& result);

struct RunOutputs {
  Scenario scenario;
  std::vector<ExitRecord> exits;
  std::vector<IntervalRecord> intervals;
  std::vector<TraceSample> trace;  // empty without trace.csv
};

RunOutputs read_outputs(const std::filesystem::path& dir);

// Report tables. Each row starts with a run label so several runs can share
// a file; write_*_header emits the column names once.
void write_fulfillment_header(std::ostream& out);
void write_fulfillment_csv(std::ostream& out, const std::string& label, const std::vector<ExitRecord>& exits);
void write_cdf_header(std::ostream& out);
void write_cdf_csv(std::ostream& out, const std::string& label, const FulfillmentStats& stats);
void write_trajectories_header(std::ostream& out);
void write_trajectories_csv(std::ostream& out, const std::string& label, const TrajectoryExtract& t);
nlohmann::json distribution_summary(const Distribution& d);

}  // namespace dic
