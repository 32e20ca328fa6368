#include "dic/energy.hpp"

#include <algorithm>

namespace dic {

double consumption(const VehicleState& v, double dt_s, const ConsumptionModel& model) {
  const double drawn = model.drive_power(v.speed_mps) * dt_s / 3600.0;
  return std::min(drawn, std::max(v.soc, 0.0) * v.capacity_kwh);
}

SocUpdate apply_soc_dynamics(const VehicleState& v, double delivered_kw, double dt_s, double efficiency,
                             double consumption_kwh) {
  const double raw =
      v.soc + efficiency * delivered_kw * dt_s / (3600.0 * v.capacity_kwh) - consumption_kwh / v.capacity_kwh;
  const double clamped = std::clamp(raw, 0.0, v.soc_target);
  return {clamped, (raw - clamped) * v.capacity_kwh};
}

double requested_power(const VehicleState& v, bool on_stripe, const RequestParams& params) {
  if (!on_stripe) return 0.0;
  const double gap = v.soc_target - v.soc;
  if (gap <= 0.0) return 0.0;
  const double want =
      gap * v.capacity_kwh * 3600.0 / params.charge_time_constant_s + params.consumption.drive_power(v.speed_mps);
  return std::min({v.p_on_kw, params.coil_power_nom_kw, want});
}

RequestSummary aggregate_requests(const std::vector<VehicleState>& vehicles, const std::vector<StripeSpec>& stripes,
                                  const RequestParams& params) {
  RequestSummary out;
  out.per_stripe_kw.assign(stripes.size(), 0.0);
  for (const auto& v : vehicles) {
    const auto s = occupancy(v, stripes);
    if (!s) continue;
    RequestParams local = params;
    local.coil_power_nom_kw = stripes[static_cast<std::size_t>(*s)].coil_power_nom_kw;
    out.per_stripe_kw[static_cast<std::size_t>(*s)] += requested_power(v, true, local);
  }
  for (double p : out.per_stripe_kw) out.total_kw += p;
  return out;
}

}  // namespace dic
