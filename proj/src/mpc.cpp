#include "dic/mpc.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <map>
#include <numeric>
#include <sstream>

namespace dic {

namespace {

double first_step_cap(const MpcVehicle& v, const std::vector<StripeSpec>& stripes, int k) {
  const auto& s = v.prediction.stripe.at(static_cast<std::size_t>(k));
  if (!s) return 0.0;
  return std::min(v.p_on_kw, stripes.at(static_cast<std::size_t>(*s)).coil_power_nom_kw);
}

bool ever_coupled(const MpcVehicle& v) {
  return std::any_of(v.prediction.stripe.begin(), v.prediction.stripe.end(), [](const auto& s) { return s.has_value(); });
}

}  // namespace

void MpcInstance::validate() const {
  config.validate();
  const auto K = static_cast<std::size_t>(config.horizon);
  for (const auto& v : vehicles) {
    if (v.prediction.stripe.size() != K)
      throw std::invalid_argument("vehicle " + std::to_string(v.id) + " has no full-horizon prediction");
    if (v.consumption_kwh.size() != K)
      throw std::invalid_argument("vehicle " + std::to_string(v.id) + " has no full-horizon consumption forecast");
    for (double c : v.consumption_kwh)
      if (!(c >= 0.0)) throw std::invalid_argument("negative consumption forecast");
    for (const auto& s : v.prediction.stripe)
      if (s && (*s < 0 || *s >= static_cast<int>(stripes.size())))
        throw std::invalid_argument("prediction refers to an unknown stripe");
    if (!(v.capacity_kwh > 0.0)) throw std::invalid_argument("battery capacity must be positive");
  }
  for (std::size_t i = 0; i < stripes.size(); ++i)
    if (stripes[i].id != static_cast<int>(i)) throw std::invalid_argument("stripe ids must equal their index");
}

std::vector<double> forecast_consumption(const MpcVehicle& v, const ConsumptionModel& model, double dt_s) {
  const auto K = v.prediction.stripe.size();
  std::vector<double> out(K, 0.0);
  const double draw = model.drive_power(v.prediction.mean_speed_mps);
  double left = v.soc * v.capacity_kwh;
  for (std::size_t k = 0; k < K; ++k) {
    const double on_road = std::clamp(v.prediction.tau_s - static_cast<double>(k) * dt_s, 0.0, dt_s);
    out[k] = std::min(draw * on_road / 3600.0, left);
    left -= out[k];
  }
  return out;
}

MpcVehicle make_mpc_vehicle(const VehicleState& v, double mean_speed_mps, const Scenario& scenario) {
  const auto& mpc = scenario.config.mpc;
  MpcVehicle out;
  out.id = v.id;
  out.soc = v.soc;
  out.soc_target = v.soc_target;
  out.capacity_kwh = v.capacity_kwh;
  out.p_on_kw = v.p_on_kw;
  out.prediction = predict(v, scenario.stripes, scenario.corridor, mpc.horizon, mpc.delta_t_s, mean_speed_mps);
  out.consumption_kwh = forecast_consumption(out, scenario.config.consumption, mpc.delta_t_s);
  return out;
}

MpcInstance make_instance(const std::vector<VehicleState>& vehicles, const Scenario& scenario, double now_s) {
  MpcInstance inst;
  inst.time_s = now_s;
  inst.stripes = scenario.stripes;
  inst.total_power_kw = scenario.config.total_power_kw;
  inst.config = scenario.config.mpc;
  inst.vehicles.reserve(vehicles.size());
  for (const auto& v : vehicles)
    inst.vehicles.push_back(make_mpc_vehicle(v, mean_speed(v, now_s, scenario.config.avg_speed_window_s), scenario));
  return inst;
}

double urgency(double soc, double soc_target, double tau_s, double tau_min_s) {
  return std::max(soc_target - soc, 0.0) / std::max(tau_s, tau_min_s);
}

qp::QpProblem build_qp(const MpcInstance& inst) {
  inst.validate();
  const auto& cfg = inst.config;
  const int K = cfg.horizon;
  const int V = static_cast<int>(inst.vehicles.size());
  const int S = static_cast<int>(inst.stripes.size());
  const MpcLayout L{V, S, K};
  const int n = L.num_vars();

  std::vector<qp::Triplet> Qt, At, Ct;
  qp::Vector q = qp::Vector::Zero(n);
  qp::Vector b = qp::Vector::Zero(L.num_eq());
  qp::Vector l(L.num_ineq()), u(L.num_ineq());

  // Vehicles grouped by predicted stripe, per step, for the assignment term.
  std::vector<std::vector<std::vector<int>>> on_stripe(static_cast<std::size_t>(S),
                                                       std::vector<std::vector<int>>(static_cast<std::size_t>(K)));

  for (int vi = 0; vi < V; ++vi) {
    const auto& v = inst.vehicles[static_cast<std::size_t>(vi)];
    const double unit = soc_unit(v.capacity_kwh, cfg.delta_t_s);
    const double w = kTrackingWeight * urgency(v.soc, v.soc_target, v.prediction.tau_s, cfg.tau_min_s) / (unit * unit);
    const double target = unit * v.soc_target;
    const double b0 = unit * v.soc;

    for (int k = 1; k <= K; ++k) {
      Qt.emplace_back(L.soc(vi, k), L.soc(vi, k), 2.0 * w);
      q[L.soc(vi, k)] = -2.0 * w * target;
    }

    for (int k = 0; k < K; ++k) {
      const auto& s = v.prediction.stripe[static_cast<std::size_t>(k)];
      const double eta = s ? inst.stripes[static_cast<std::size_t>(*s)].efficiency : 1.0;
      const int row = L.dynamics_row(vi, k);
      At.emplace_back(row, L.soc(vi, k + 1), 1.0);
      At.emplace_back(row, L.soc(vi, k), -1.0);
      At.emplace_back(row, L.vehicle_power(vi, k), -eta);
      b[row] = -unit * v.consumption_kwh[static_cast<std::size_t>(k)] / v.capacity_kwh;

      q[L.vehicle_power(vi, k)] = -cfg.lambda * cfg.price * cfg.delta_t_s;
      if (s) on_stripe[static_cast<std::size_t>(*s)][static_cast<std::size_t>(k)].push_back(vi);

      const int p = L.vehicle_power(vi, k);
      l[p] = 0.0;
      u[p] = first_step_cap(v, inst.stripes, k);
    }

    l[L.soc(vi, 0)] = b0;
    u[L.soc(vi, 0)] = b0;
    for (int k = 1; k <= K; ++k) {
      l[L.soc(vi, k)] = 0.0;
      u[L.soc(vi, k)] = std::max(target, b0);
    }
  }

  for (int k = 0; k < K; ++k) {
    for (int si = 0; si < S; ++si) {
      const auto& stripe = inst.stripes[static_cast<std::size_t>(si)];
      const int ps = L.stripe_power(si, k);
      At.emplace_back(L.budget_row(k), ps, 1.0);
      l[ps] = stripe.p_min_kw;
      u[ps] = cfg.rho * stripe.static_share_kw;

      // d = P_s - sum P_v >= 0 with cost xi * d^2.
      const int d = L.slack(si, k);
      const int row = L.slack_row(si, k);
      At.emplace_back(row, d, 1.0);
      At.emplace_back(row, ps, -1.0);
      for (int vi : on_stripe[static_cast<std::size_t>(si)][static_cast<std::size_t>(k)])
        At.emplace_back(row, L.vehicle_power(vi, k), 1.0);
      l[d] = 0.0;
      u[d] = qp::kInf;
      if (cfg.xi > 0.0) Qt.emplace_back(d, d, 2.0 * cfg.xi);
    }
    b[L.budget_row(k)] = inst.total_power_kw;
  }

  for (int j = 0; j < n; ++j) Ct.emplace_back(j, j, 1.0);

  auto problem = qp::make_problem(n, Qt, q, At, b, Ct, l, u);
  problem.variable_names.resize(static_cast<std::size_t>(n));
  for (int vi = 0; vi < V; ++vi) {
    const int id = inst.vehicles[static_cast<std::size_t>(vi)].id;
    for (int k = 0; k < K; ++k)
      problem.variable_names[static_cast<std::size_t>(L.vehicle_power(vi, k))] =
          "P_v" + std::to_string(id) + "_" + std::to_string(k);
    for (int k = 0; k <= K; ++k)
      problem.variable_names[static_cast<std::size_t>(L.soc(vi, k))] =
          "b_v" + std::to_string(id) + "_" + std::to_string(k);
  }
  for (int si = 0; si < S; ++si)
    for (int k = 0; k < K; ++k)
      problem.variable_names[static_cast<std::size_t>(L.stripe_power(si, k))] =
          "P_s" + std::to_string(inst.stripes[static_cast<std::size_t>(si)].id) + "_" + std::to_string(k);
  for (int si = 0; si < S; ++si)
    for (int k = 0; k < K; ++k)
      problem.variable_names[static_cast<std::size_t>(L.slack(si, k))] =
          "d_s" + std::to_string(inst.stripes[static_cast<std::size_t>(si)].id) + "_" + std::to_string(k);
  return problem;
}

qp::WarmStart MpcAllocator::shifted_warm_start(const MpcInstance& reduced, const MpcLayout& L) const {
  if (!previous_ || previous_->layout.horizon != L.horizon || previous_->layout.stripes != L.stripes) return {};
  const auto& prev = *previous_;
  const auto& P = prev.layout;
  const int K = L.horizon;
  auto shift = [K](int k) { return std::min(k + 1, K - 1); };
  auto shift_soc = [K](int k) { return std::min(k + 1, K); };

  std::map<int, int> prev_index;
  for (std::size_t i = 0; i < prev.vehicle_ids.size(); ++i) prev_index[prev.vehicle_ids[i]] = static_cast<int>(i);

  qp::WarmStart w;
  w.x = qp::Vector::Zero(L.num_vars());
  w.y = qp::Vector::Zero(L.num_eq() + L.num_ineq());
  const auto eq = L.num_eq();
  const auto peq = P.num_eq();

  for (int vi = 0; vi < L.vehicles; ++vi) {
    const auto& v = reduced.vehicles[static_cast<std::size_t>(vi)];
    const auto found = prev_index.find(v.id);
    if (found == prev_index.end()) {
      for (int k = 0; k <= K; ++k) w.x[L.soc(vi, k)] = soc_unit(v.capacity_kwh, config_.delta_t_s) * v.soc;
      continue;
    }
    const int pi = found->second;
    for (int k = 0; k < K; ++k) {
      w.x[L.vehicle_power(vi, k)] = prev.x[P.vehicle_power(pi, shift(k))];
      w.y[L.dynamics_row(vi, k)] = prev.y[P.dynamics_row(pi, shift(k))];
      w.y[eq + L.vehicle_power(vi, k)] = prev.y[peq + P.vehicle_power(pi, shift(k))];
    }
    w.x[L.soc(vi, 0)] = soc_unit(v.capacity_kwh, config_.delta_t_s) * v.soc;
    for (int k = 1; k <= K; ++k) {
      w.x[L.soc(vi, k)] = prev.x[P.soc(pi, shift_soc(k))];
      w.y[eq + L.soc(vi, k)] = prev.y[peq + P.soc(pi, shift_soc(k))];
    }
  }
  for (int si = 0; si < L.stripes; ++si) {
    for (int k = 0; k < K; ++k) {
      w.x[L.stripe_power(si, k)] = prev.x[P.stripe_power(si, shift(k))];
      w.y[eq + L.stripe_power(si, k)] = prev.y[peq + P.stripe_power(si, shift(k))];
      w.x[L.slack(si, k)] = prev.x[P.slack(si, shift(k))];
      w.y[eq + L.slack(si, k)] = prev.y[peq + P.slack(si, shift(k))];
      w.y[L.slack_row(si, k)] = prev.y[P.slack_row(si, shift(k))];
    }
  }
  for (int k = 0; k < K; ++k) w.y[L.budget_row(k)] = prev.y[P.budget_row(shift(k))];
  return w;
}

AllocationPlan MpcAllocator::solve_step(const MpcInstance& instance) {
  instance.validate();
  const auto start = std::chrono::steady_clock::now();

  MpcInstance reduced = instance;
  reduced.config = config_;
  reduced.vehicles.clear();
  for (const auto& v : instance.vehicles)
    if (ever_coupled(v)) reduced.vehicles.push_back(v);

  const MpcLayout L{static_cast<int>(reduced.vehicles.size()), static_cast<int>(reduced.stripes.size()),
                    config_.horizon};
  const auto problem = build_qp(reduced);

  qp::SolverSettings settings;
  settings.tol = config_.qp.tol;
  settings.max_iter = config_.qp.max_iter;
  const auto warm = shifted_warm_start(reduced, L);
  auto sol = qp::solve(problem, settings, warm.x.size() ? &warm : nullptr);
  int iterations = sol.iterations;
  if (sol.status != qp::QpStatus::optimal && warm.x.size()) {
    sol = qp::solve(problem, settings);
    iterations += sol.iterations;
  }

  stats_ = {};
  stats_.time_s = instance.time_s;
  stats_.vehicles = L.vehicles;
  stats_.variables = L.num_vars();
  stats_.constraints = L.num_eq() + L.num_ineq();
  stats_.iterations = iterations;
  stats_.objective = sol.objective;
  stats_.primal_residual = sol.primal_residual;
  stats_.dual_residual = sol.dual_residual;
  stats_.status = sol.status;

  if (sol.status != qp::QpStatus::optimal) {
    stats_.solve_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
    std::ostringstream msg;
    msg << "MPC solve at t=" << instance.time_s << " failed: " << qp::to_string(sol.status) << " after "
        << iterations << " iterations (primal " << sol.primal_residual << ", dual " << sol.dual_residual << ")";
    previous_.reset();
    throw MpcError(msg.str(), stats_);
  }

  AllocationPlan plan;
  plan.timestamp_s = instance.time_s;
  for (const auto& v : instance.vehicles) plan.per_vehicle[v.id] = {v.prediction.stripe.front(), 0.0};

  double clip = 0.0;
  auto clamp_to = [&clip](double x, double lo, double hi) {
    const double c = std::clamp(x, lo, hi);
    clip = std::max(clip, std::abs(c - x));
    return c;
  };

  const auto S = static_cast<std::size_t>(L.stripes);
  plan.per_stripe_kw.assign(S, 0.0);
  for (std::size_t si = 0; si < S; ++si) {
    const auto& st = reduced.stripes[si];
    plan.per_stripe_kw[si] =
        clamp_to(sol.x[L.stripe_power(static_cast<int>(si), 0)], st.p_min_kw, config_.rho * st.static_share_kw);
  }

  // Restore the budget exactly by moving the residual into the stripes with
  // room, proportionally to that room.
  const double total = std::accumulate(plan.per_stripe_kw.begin(), plan.per_stripe_kw.end(), 0.0);
  const double gap = instance.total_power_kw - total;
  if (gap != 0.0) {
    std::vector<double> room(S);
    for (std::size_t si = 0; si < S; ++si) {
      const auto& st = reduced.stripes[si];
      room[si] = gap > 0.0 ? config_.rho * st.static_share_kw - plan.per_stripe_kw[si]
                           : plan.per_stripe_kw[si] - st.p_min_kw;
    }
    const double room_total = std::accumulate(room.begin(), room.end(), 0.0);
    if (room_total > 0.0)
      for (std::size_t si = 0; si < S; ++si) plan.per_stripe_kw[si] += gap * room[si] / room_total;
    clip = std::max(clip, std::abs(gap));
  }

  std::vector<double> drawn(S, 0.0);
  for (int vi = 0; vi < L.vehicles; ++vi) {
    const auto& v = reduced.vehicles[static_cast<std::size_t>(vi)];
    auto& a = plan.per_vehicle[v.id];
    a.power_kw = clamp_to(sol.x[L.vehicle_power(vi, 0)], 0.0, first_step_cap(v, reduced.stripes, 0));
    if (a.stripe) drawn[static_cast<std::size_t>(*a.stripe)] += a.power_kw;
  }
  for (std::size_t si = 0; si < S; ++si) {
    if (drawn[si] <= plan.per_stripe_kw[si]) continue;
    const double f = plan.per_stripe_kw[si] / drawn[si];
    clip = std::max(clip, drawn[si] - plan.per_stripe_kw[si]);
    for (auto& [id, a] : plan.per_vehicle)
      if (a.stripe && static_cast<std::size_t>(*a.stripe) == si) a.power_kw *= f;
  }

  stats_.max_clip_kw = clip;
  stats_.solve_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();

  Previous prev;
  prev.layout = L;
  prev.x = sol.x;
  prev.y = sol.y;
  for (const auto& v : reduced.vehicles) prev.vehicle_ids.push_back(v.id);
  previous_ = std::move(prev);
  return plan;
}

double plan_violation(const AllocationPlan& plan, const MpcInstance& instance) {
  const auto S = instance.stripes.size();
  if (plan.per_stripe_kw.size() != S) return qp::kInf;
  double worst = 0.0;
  std::vector<double> drawn(S, 0.0);
  for (const auto& v : instance.vehicles) {
    const auto it = plan.per_vehicle.find(v.id);
    if (it == plan.per_vehicle.end()) return qp::kInf;
    const double p = it->second.power_kw;
    worst = std::max({worst, -p, p - first_step_cap(v, instance.stripes, 0)});
    const auto& s = v.prediction.stripe.front();
    if (p > 0.0 && it->second.stripe != s) worst = std::max(worst, p);
    if (s) drawn[static_cast<std::size_t>(*s)] += p;
  }
  double total = 0.0;
  for (std::size_t si = 0; si < S; ++si) {
    const auto& st = instance.stripes[si];
    const double ps = plan.per_stripe_kw[si];
    total += ps;
    worst = std::max({worst, st.p_min_kw - ps, ps - instance.config.rho * st.static_share_kw, drawn[si] - ps});
  }
  return std::max(worst, std::abs(total - instance.total_power_kw));
}

}  // namespace dic
