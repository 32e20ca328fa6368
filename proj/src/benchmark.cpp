#include <algorithm>
#include <numeric>

#include "dic/allocation.hpp"

namespace dic {

double AllocationPlan::total_vehicle_power() const {
  double total = 0.0;
  for (const auto& [id, a] : per_vehicle) total += a.power_kw;
  return total;
}

std::vector<double> water_fill(const std::vector<double>& claims, double budget) {
  std::vector<double> out(claims.size(), 0.0);
  if (claims.empty() || budget <= 0.0) return out;
  std::vector<std::size_t> order(claims.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return claims[a] < claims[b]; });

  double remaining = budget;
  for (std::size_t rank = 0; rank < order.size(); ++rank) {
    const double claim = std::max(claims[order[rank]], 0.0);
    const double level = remaining / static_cast<double>(order.size() - rank);
    if (claim <= level) {
      out[order[rank]] = claim;
      remaining -= claim;
      continue;
    }
    // Every remaining claim is at least this large: split evenly.
    for (std::size_t r = rank; r < order.size(); ++r) out[order[r]] = level;
    break;
  }
  return out;
}

AllocationPlan allocate_benchmark(const std::vector<VehicleState>& vehicles, const std::vector<StripeSpec>& stripes,
                                  const RequestParams& params, double timestamp_s) {
  AllocationPlan plan;
  plan.timestamp_s = timestamp_s;
  plan.per_stripe_kw.resize(stripes.size());
  std::vector<std::vector<std::size_t>> on_stripe(stripes.size());
  for (std::size_t i = 0; i < vehicles.size(); ++i) {
    const auto s = occupancy(vehicles[i], stripes);
    plan.per_vehicle[vehicles[i].id] = {s, 0.0};
    if (s) on_stripe[static_cast<std::size_t>(*s)].push_back(i);
  }
  for (std::size_t s = 0; s < stripes.size(); ++s) {
    plan.per_stripe_kw[s] = stripes[s].static_share_kw;
    RequestParams local = params;
    local.coil_power_nom_kw = stripes[s].coil_power_nom_kw;
    std::vector<double> claims;
    claims.reserve(on_stripe[s].size());
    for (std::size_t i : on_stripe[s]) claims.push_back(requested_power(vehicles[i], true, local));
    const auto granted = water_fill(claims, stripes[s].static_share_kw);
    for (std::size_t k = 0; k < on_stripe[s].size(); ++k)
      plan.per_vehicle[vehicles[on_stripe[s][k]].id].power_kw = granted[k];
  }
  return plan;
}

}  // namespace dic
