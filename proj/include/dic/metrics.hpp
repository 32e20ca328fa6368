#pragma once

#include <utility>
#include <vector>

#include "dic/sim.hpp"

namespace dic {

inline constexpr double kPdfBinWidth = 0.05;

/// phi = soc at exit / target soc. Throws std::logic_error outside [0, 1].
double fulfillment(const ExitRecord& e);

struct CdfPoint {
  double x = 0.0;
  double p = 0.0;  // fraction of values <= x
};

struct Distribution {
  std::vector<double> values;  // sorted ascending
  std::vector<CdfPoint> cdf;   // one point per distinct value
  std::vector<double> pdf;     // density per bin of width kPdfBinWidth over [0, 1]
  double mean = 0.0;
  double median = 0.0;
  double p10 = 0.0;
  double p90 = 0.0;

  bool empty() const { return values.empty(); }
  std::size_t size() const { return values.size(); }
  /// Empirical CDF, right-continuous.
  double cdf_at(double x) const;
  /// Fraction of values strictly below x.
  double fraction_below(double x) const;
  /// Fraction of values within `tol` of 1.
  double fraction_full(double tol = 1e-9) const;
};

/// Empirical distribution of values in [0, 1]. Empty input gives empty stats.
Distribution distribution(std::vector<double> values);

/// Linear-interpolated quantile of sorted values, q in [0, 1].
double quantile(const std::vector<double>& sorted, double q);

/// Shared area of two histogram densities over the same bins.
double overlap_coefficient(const Distribution& a, const Distribution& b);

struct FulfillmentStats {
  std::vector<std::pair<int, double>> per_vehicle;  // measured vehicles, by exit order
  Distribution regular;                             // measured non-VUT vehicles
  Distribution vut;                                 // measured VUTs
};

FulfillmentStats fulfillment_stats(const std::vector<ExitRecord>& exits);

struct Utilization {
  double requested_kw = 0.0;  // time averages over measured intervals
  double delivered_kw = 0.0;
  double delivered_over_requested = 0.0;
  double delivered_over_budget = 0.0;
  int intervals = 0;
};

Utilization utilization(const std::vector<IntervalRecord>& intervals, double total_power_kw);

struct EnergySeries {
  int id = 0;
  double demand_kwh = 0.0;  // (target - initial soc) * capacity
  std::vector<std::pair<double, double>> points;  // (time s, cumulative kWh)
};

struct TrajectoryExtract {
  std::vector<EnergySeries> high;
  std::vector<EnergySeries> low;
  bool short_of_request = false;  // fewer qualifying vehicles than asked for
};

inline constexpr double kMinDwellS = 300.0;

/// Cumulative delivered energy of the measured non-VUT vehicles with the
/// largest and smallest demand among those on the road at least
/// kMinDwellS. Points come from the trace plus the exit record.
TrajectoryExtract trajectory_extract(const std::vector<ExitRecord>& exits, const std::vector<TraceSample>& trace,
                                     int n_high, int n_low);

}  // namespace dic
