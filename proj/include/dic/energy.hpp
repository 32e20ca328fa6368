#pragma once

#include <vector>

#include "dic/mobility.hpp"
#include "dic/scenario.hpp"

namespace dic {

/// Energy drawn from the battery over `dt_s` at the current speed, in kWh.
/// Never exceeds what is left in the battery.
double consumption(const VehicleState& v, double dt_s, const ConsumptionModel& model);

struct SocUpdate {
  double soc = 0.0;
  /// Energy in kWh removed (positive) or added (negative) by clamping the
  /// raw SoC into [0, target].
  double clamp_correction_kwh = 0.0;
};

/// One step of the battery balance: efficiency-scaled delivered energy minus
/// consumption, clamped into [0, soc_target].
SocUpdate apply_soc_dynamics(const VehicleState& v, double delivered_kw, double dt_s, double efficiency,
                             double consumption_kwh);

struct RequestParams {
  double coil_power_nom_kw = 100.0;
  double charge_time_constant_s = 300.0;
  ConsumptionModel consumption;
};

/// Power an uncoordinated vehicle tries to draw: zero off-stripe or at the
/// target, otherwise the SoC gap spread over the charge time constant plus
/// the driving draw, capped by the pad and coil ratings.
double requested_power(const VehicleState& v, bool on_stripe, const RequestParams& params);

struct RequestSummary {
  std::vector<double> per_stripe_kw;
  double total_kw = 0.0;
};

/// Sums the per-vehicle requests by stripe. Demand is reported as is, even
/// when it exceeds what a stripe can deliver.
RequestSummary aggregate_requests(const std::vector<VehicleState>& vehicles, const std::vector<StripeSpec>& stripes,
                                  const RequestParams& params);

}  // namespace dic
