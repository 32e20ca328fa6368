#pragma once

#include <map>
#include <optional>
#include <vector>

#include "dic/energy.hpp"
#include "dic/mobility.hpp"
#include "dic/scenario.hpp"

namespace dic {

struct VehicleAllocation {
  std::optional<int> stripe;  // stripe the power is drawn from
  double power_kw = 0.0;
};

/// Power assignment for one allocation period.
struct AllocationPlan {
  double timestamp_s = 0.0;
  std::map<int, VehicleAllocation> per_vehicle;
  std::vector<double> per_stripe_kw;

  double vehicle_power(int id) const {
    const auto it = per_vehicle.find(id);
    return it == per_vehicle.end() ? 0.0 : it->second.power_kw;
  }
  double total_vehicle_power() const;
};

/// Equal split of `budget` among claimants, capped by each claim, with
/// leftovers from capped claimants handed back to the rest until either the
/// budget or the claims run out. Independent of the claim order.
std::vector<double> water_fill(const std::vector<double>& claims, double budget);

/// Uncoordinated allocation: every stripe spends its static share on the
/// vehicles currently coupled to it, water-filling their requests.
AllocationPlan allocate_benchmark(const std::vector<VehicleState>& vehicles, const std::vector<StripeSpec>& stripes,
                                  const RequestParams& params, double timestamp_s = 0.0);

}  // namespace dic
