#include "dic/sim.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <unordered_map>

#include "dic/energy.hpp"

namespace dic {

TickDelivery deliver(const AllocationPlan& plan, const std::vector<VehicleState>& vehicles,
                     const std::vector<StripeSpec>& stripes, double tolerance_kw) {
  TickDelivery out;
  out.vehicle_kw.assign(vehicles.size(), 0.0);
  out.stripe_kw.assign(stripes.size(), 0.0);
  for (std::size_t i = 0; i < vehicles.size(); ++i) {
    const auto& v = vehicles[i];
    const auto it = plan.per_vehicle.find(v.id);
    if (it == plan.per_vehicle.end() || !it->second.stripe) continue;
    const auto s = occupancy(v, stripes);
    if (s != it->second.stripe) continue;
    const auto& stripe = stripes[static_cast<std::size_t>(*s)];
    const double p = std::clamp(it->second.power_kw, 0.0, std::min(v.p_on_kw, stripe.coil_power_nom_kw));
    out.vehicle_kw[i] = p;
    out.stripe_kw[static_cast<std::size_t>(*s)] += p;
  }
  for (std::size_t s = 0; s < stripes.size(); ++s) {
    const double cap = s < plan.per_stripe_kw.size() ? plan.per_stripe_kw[s] : 0.0;
    if (out.stripe_kw[s] > cap + tolerance_kw)
      throw std::logic_error("stripe " + std::to_string(s) + " delivers " + std::to_string(out.stripe_kw[s]) +
                             " kW above its allocation of " + std::to_string(cap) + " kW");
  }
  return out;
}

namespace {

struct IntervalAccumulator {
  double start_s = 0.0;
  int ticks = 0;
  int vehicles = 0;
  double requested = 0.0;
  double delivered = 0.0;
  std::vector<double> stripe_requested;
  std::vector<double> stripe_delivered;
  std::vector<double> stripe_allocated;

  void reset(double t, std::size_t stripes, int on_road) {
    start_s = t;
    ticks = 0;
    vehicles = on_road;
    requested = delivered = 0.0;
    stripe_requested.assign(stripes, 0.0);
    stripe_delivered.assign(stripes, 0.0);
    stripe_allocated.assign(stripes, 0.0);
  }

  IntervalRecord finish(double warmup_s) const {
    IntervalRecord r;
    r.time_s = start_s;
    r.measured = start_s >= warmup_s;
    r.vehicles = vehicles;
    const double n = std::max(ticks, 1);
    r.requested_kw = requested / n;
    r.delivered_kw = delivered / n;
    for (double x : stripe_requested) r.stripe_requested_kw.push_back(x / n);
    for (double x : stripe_delivered) r.stripe_delivered_kw.push_back(x / n);
    for (double x : stripe_allocated) r.stripe_allocated_kw.push_back(x / n);
    return r;
  }
};

ExitRecord make_exit_record(const VehicleState& v, double exit_time_s, double warmup_s) {
  ExitRecord r;
  r.id = v.id;
  r.is_vut = v.is_vut;
  r.measured = v.entry_time_s >= warmup_s;
  r.entry_node = v.entry_node;
  r.exit_node = v.exit_node;
  r.capacity_kwh = v.capacity_kwh;
  r.soc_init = v.soc_init;
  r.soc_target = v.soc_target;
  r.soc_exit = v.soc;
  r.entry_time_s = v.entry_time_s;
  r.exit_time_s = exit_time_s;
  r.energy_kwh = v.energy_kwh;
  return r;
}

}  // namespace

RunResult run(const Scenario& scenario, const RunOptions& options) {
  scenario.validate();
  const auto& cfg = scenario.config;
  const auto& stripes = scenario.stripes;
  const double tick = cfg.tick_s;
  const int per_interval = cfg.ticks_per_interval();
  const double duration = cfg.warmup_s + cfg.measure_s;
  const auto num_ticks = static_cast<long>(std::llround(duration / tick));
  const double budget_tol = 10.0 * cfg.mpc.qp.tol;

  RunResult result;
  result.scenario = scenario;

  std::vector<Arrival> arrivals;
  if (duration > 0.0) arrivals = generate_arrivals(scenario.demand, {0.0, duration});
  const auto profiles = sample_profiles(arrivals, cfg, scenario.demand.seed);

  const RequestParams request{100.0, cfg.charge_time_constant_s, cfg.consumption};
  MpcAllocator mpc(cfg.mpc);
  AllocationPlan plan;
  plan.per_stripe_kw.assign(stripes.size(), 0.0);

  std::vector<VehicleState> vehicles;
  std::size_t next_arrival = 0;
  IntervalAccumulator acc;
  auto& energy = result.energy;
  auto& stats = result.stats;

  for (long i = 0; i < num_ticks; ++i) {
    const double now = static_cast<double>(i) * tick;
    while (next_arrival < arrivals.size() && arrivals[next_arrival].time_s <= now) {
      vehicles.push_back(make_vehicle(static_cast<int>(next_arrival), arrivals[next_arrival], profiles[next_arrival],
                                      scenario.corridor, cfg.p_on_kw));
      ++next_arrival;
      ++stats.inserted;
    }
    update_speeds(vehicles, scenario.corridor);

    const bool boundary = i % per_interval == 0;
    if (boundary) {
      if (i > 0) result.intervals.push_back(acc.finish(cfg.warmup_s));
      acc.reset(now, stripes.size(), static_cast<int>(vehicles.size()));
    }

    if (cfg.strategy == Strategy::benchmark) plan = allocate_benchmark(vehicles, stripes, request, now);

    if (boundary) {
      RoundLog round;
      round.time_s = now;
      round.reports = collect_reports(vehicles, now, cfg.avg_speed_window_s);
      if (cfg.strategy == Strategy::mpc) {
        const auto instance = instance_from_reports(round.reports, scenario, now);
        plan = mpc.solve_step(instance);
        const auto& s = mpc.last_stats();
        round.solve_ms = s.solve_ms;
        stats.max_plan_violation_kw = std::max(stats.max_plan_violation_kw, plan_violation(plan, instance));
        stats.max_clip_kw = std::max(stats.max_clip_kw, s.max_clip_kw);
        stats.total_solve_ms += s.solve_ms;
        stats.max_solve_ms = std::max(stats.max_solve_ms, s.solve_ms);
        stats.total_iterations += s.iterations;
        if (options.record_qp_stats) result.qp_stats.push_back(s);
      }
      round.allocations = dispatch_allocations(plan, round.reports, scenario);
      round.stripe_kw = plan.per_stripe_kw;
      ++stats.rounds;
      if (options.on_round) options.on_round(round);
    }
    if (options.trace_stride_ticks > 0 && i % options.trace_stride_ticks == 0)
      for (const auto& v : vehicles) result.trace.push_back({now, v.id, v.position_m, v.speed_mps, v.soc, v.energy_kwh});

    const auto requests = aggregate_requests(vehicles, stripes, request);
    const auto drawn = deliver(plan, vehicles, stripes);

    // Energy update over the part of the tick each vehicle spends on the road.
    std::unordered_map<int, double> on_road;
    double delivered_total = 0.0;
    for (std::size_t k = 0; k < vehicles.size(); ++k) {
      auto& v = vehicles[k];
      const double remaining = std::max(0.0, distance_to_exit(v, scenario.corridor));
      const double travel = v.speed_mps * tick;
      const double f = travel >= remaining && travel > 0.0 ? remaining / travel : 1.0;
      on_road[v.id] = f;
      const double dt = f * tick;
      const double p = drawn.vehicle_kw[k];
      const auto s = occupancy(v, stripes);
      const double eta = s ? stripes[static_cast<std::size_t>(*s)].efficiency : 1.0;
      const double used = consumption(v, dt, cfg.consumption);
      const auto upd = apply_soc_dynamics(v, p, dt, eta, used);
      v.soc = upd.soc;
      v.energy_kwh += p * dt / 3600.0;

      energy.delivered_kwh += p * dt / 3600.0;
      energy.stored_kwh += eta * p * dt / 3600.0;
      energy.consumed_kwh += used;
      energy.clamp_kwh += upd.clamp_correction_kwh;
      if (upd.clamp_correction_kwh != 0.0) ++energy.clamp_events;
      delivered_total += p * f;
      if (s) acc.stripe_delivered[static_cast<std::size_t>(*s)] += p * f;
    }

    for (std::size_t s = 0; s < stripes.size(); ++s) {
      acc.stripe_requested[s] += requests.per_stripe_kw[s];
      acc.stripe_allocated[s] += plan.per_stripe_kw[s];
      stats.max_stripe_excess_kw = std::max(stats.max_stripe_excess_kw, drawn.stripe_kw[s] - plan.per_stripe_kw[s]);
    }
    acc.requested += requests.total_kw;
    acc.delivered += delivered_total;
    ++acc.ticks;
    stats.max_budget_excess_kw = std::max(stats.max_budget_excess_kw, delivered_total - cfg.total_power_kw);
    if (delivered_total > cfg.total_power_kw + budget_tol)
      throw std::logic_error("delivered power exceeds the total budget at t=" + std::to_string(now));

    for (auto& e : step(vehicles, scenario.corridor, tick, now, cfg.avg_speed_window_s)) {
      const double exit_time = now + on_road.at(e.vehicle.id) * tick;
      result.exits.push_back(make_exit_record(e.vehicle, exit_time, cfg.warmup_s));
      energy.battery_gain_kwh += (e.vehicle.soc - e.vehicle.soc_init) * e.vehicle.capacity_kwh;
    }
  }
  if (num_ticks > 0) result.intervals.push_back(acc.finish(cfg.warmup_s));

  for (const auto& v : vehicles) energy.battery_gain_kwh += (v.soc - v.soc_init) * v.capacity_kwh;
  stats.exited = static_cast<int>(result.exits.size());
  stats.on_road_at_end = static_cast<int>(vehicles.size());
  return result;
}

}  // namespace dic
