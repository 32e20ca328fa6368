#include "dic/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <stdexcept>
#include <string>

namespace dic {

double fulfillment(const ExitRecord& e) {
  if (!(e.soc_target > 0.0)) throw std::invalid_argument("target soc must be positive");
  const double phi = e.soc_exit / e.soc_target;
  if (!(phi >= 0.0 && phi <= 1.0 + 1e-12))
    throw std::logic_error("fulfillment of vehicle " + std::to_string(e.id) + " is " + std::to_string(phi));
  return std::min(phi, 1.0);
}

double quantile(const std::vector<double>& sorted, double q) {
  if (sorted.empty()) return 0.0;
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (pos - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

namespace {

int num_bins() { return static_cast<int>(std::lround(1.0 / kPdfBinWidth)); }

}  // namespace

double Distribution::cdf_at(double x) const {
  if (values.empty()) return 0.0;
  const auto n = std::upper_bound(values.begin(), values.end(), x) - values.begin();
  return static_cast<double>(n) / static_cast<double>(values.size());
}

double Distribution::fraction_below(double x) const {
  if (values.empty()) return 0.0;
  const auto n = std::lower_bound(values.begin(), values.end(), x) - values.begin();
  return static_cast<double>(n) / static_cast<double>(values.size());
}

double Distribution::fraction_full(double tol) const {
  if (values.empty()) return 0.0;
  return 1.0 - fraction_below(1.0 - tol);
}

Distribution distribution(std::vector<double> values) {
  Distribution d;
  d.pdf.assign(static_cast<std::size_t>(num_bins()), 0.0);
  if (values.empty()) return d;
  std::sort(values.begin(), values.end());
  d.values = std::move(values);
  const auto n = static_cast<double>(d.values.size());
  for (std::size_t i = 0; i < d.values.size(); ++i) {
    if (i + 1 < d.values.size() && d.values[i + 1] == d.values[i]) continue;
    d.cdf.push_back({d.values[i], static_cast<double>(i + 1) / n});
  }
  for (double v : d.values) {
    const int b = std::clamp(static_cast<int>(std::floor(v / kPdfBinWidth)), 0, num_bins() - 1);
    d.pdf[static_cast<std::size_t>(b)] += 1.0 / (n * kPdfBinWidth);
  }
  d.mean = std::accumulate(d.values.begin(), d.values.end(), 0.0) / n;
  d.median = quantile(d.values, 0.5);
  d.p10 = quantile(d.values, 0.1);
  d.p90 = quantile(d.values, 0.9);
  return d;
}

double overlap_coefficient(const Distribution& a, const Distribution& b) {
  if (a.empty() || b.empty()) return 0.0;
  double s = 0.0;
  for (std::size_t i = 0; i < a.pdf.size() && i < b.pdf.size(); ++i) s += std::min(a.pdf[i], b.pdf[i]) * kPdfBinWidth;
  return s;
}

FulfillmentStats fulfillment_stats(const std::vector<ExitRecord>& exits) {
  FulfillmentStats out;
  std::vector<double> regular, vut;
  for (const auto& e : exits) {
    if (!e.measured) continue;
    const double phi = fulfillment(e);
    out.per_vehicle.emplace_back(e.id, phi);
    (e.is_vut ? vut : regular).push_back(phi);
  }
  out.regular = distribution(std::move(regular));
  out.vut = distribution(std::move(vut));
  return out;
}

Utilization utilization(const std::vector<IntervalRecord>& intervals, double total_power_kw) {
  Utilization u;
  for (const auto& r : intervals) {
    if (!r.measured) continue;
    u.requested_kw += r.requested_kw;
    u.delivered_kw += r.delivered_kw;
    ++u.intervals;
  }
  if (u.intervals == 0) return u;
  u.requested_kw /= u.intervals;
  u.delivered_kw /= u.intervals;
  u.delivered_over_requested = u.requested_kw > 0.0 ? u.delivered_kw / u.requested_kw : 1.0;
  u.delivered_over_budget = u.delivered_kw / total_power_kw;
  return u;
}

TrajectoryExtract trajectory_extract(const std::vector<ExitRecord>& exits, const std::vector<TraceSample>& trace,
                                     int n_high, int n_low) {
  std::vector<const ExitRecord*> pool;
  for (const auto& e : exits)
    if (e.measured && !e.is_vut && e.exit_time_s - e.entry_time_s >= kMinDwellS) pool.push_back(&e);
  auto demand = [](const ExitRecord& e) { return (e.soc_target - e.soc_init) * e.capacity_kwh; };
  std::stable_sort(pool.begin(), pool.end(), [&](const ExitRecord* a, const ExitRecord* b) {
    if (demand(*a) != demand(*b)) return demand(*a) > demand(*b);
    return a->id < b->id;
  });

  std::map<int, std::vector<std::pair<double, double>>> samples;
  for (const auto& s : trace) samples[s.id].emplace_back(s.time_s, s.energy_kwh);

  auto series = [&](const ExitRecord& e) {
    EnergySeries out;
    out.id = e.id;
    out.demand_kwh = demand(e);
    if (const auto it = samples.find(e.id); it != samples.end()) out.points = it->second;
    if (out.points.empty() || out.points.back().first < e.exit_time_s) out.points.emplace_back(e.exit_time_s, e.energy_kwh);
    return out;
  };

  TrajectoryExtract t;
  const auto n = static_cast<int>(pool.size());
  t.short_of_request = n < n_high || n < n_low;
  for (int i = 0; i < std::min(n_high, n); ++i) t.high.push_back(series(*pool[static_cast<std::size_t>(i)]));
  for (int i = 0; i < std::min(n_low, n); ++i) t.low.push_back(series(*pool[static_cast<std::size_t>(n - 1 - i)]));
  return t;
}

}  // namespace dic
