#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "doctest.h"
#include "dic/mpc.hpp"

using namespace dic;

namespace {

MpcVehicle vehicle_on(int id, std::vector<std::optional<int>> stripes, double soc, double target,
                      double capacity_kwh = 60.0, double tau_s = 600.0) {
  MpcVehicle v;
  v.id = id;
  v.soc = soc;
  v.soc_target = target;
  v.capacity_kwh = capacity_kwh;
  v.p_on_kw = 150.0;
  v.prediction.vehicle_id = id;
  v.prediction.stripe = std::move(stripes);
  v.prediction.tau_s = tau_s;
  v.prediction.mean_speed_mps = 10.0;
  v.consumption_kwh.assign(v.prediction.stripe.size(), 0.0);
  return v;
}

MpcInstance default_instance(int horizon = 6) {
  const auto sc = build_default_scenario();
  MpcInstance inst;
  inst.stripes = sc.stripes;
  inst.total_power_kw = sc.config.total_power_kw;
  inst.config = sc.config.mpc;
  inst.config.horizon = horizon;
  return inst;
}

// Two stripes with 50 kW shares and rho = 1.5: a single stripe tops out at 75 kW.
MpcInstance small_instance(int horizon = 3) {
  MpcInstance inst;
  for (int i = 0; i < 2; ++i) {
    StripeSpec s;
    s.id = i;
    s.start_m = 100.0 + 1000.0 * i;
    s.end_m = s.start_m + 500.0;
    s.static_share_kw = 50.0;
    inst.stripes.push_back(s);
  }
  inst.total_power_kw = 100.0;
  inst.config.horizon = horizon;
  inst.config.rho = 1.5;
  return inst;
}

std::vector<std::optional<int>> always(int stripe, int horizon) {
  return std::vector<std::optional<int>>(static_cast<std::size_t>(horizon), stripe);
}

// Independent oracle for min sum x_s^2 s.t. sum x_s = total, lo <= x <= hi:
// projected gradient descent, projecting by bisection on the water level.
std::vector<double> project_box_simplex(const std::vector<double>& y, const std::vector<double>& lo,
                                        const std::vector<double>& hi, double total) {
  auto sum_at = [&](double theta) {
    double s = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) s += std::clamp(y[i] - theta, lo[i], hi[i]);
    return s;
  };
  double a = -1e7, b = 1e7;
  for (int it = 0; it < 200; ++it) {
    const double m = 0.5 * (a + b);
    (sum_at(m) > total ? a : b) = m;
  }
  std::vector<double> x(y.size());
  for (std::size_t i = 0; i < y.size(); ++i) x[i] = std::clamp(y[i] - 0.5 * (a + b), lo[i], hi[i]);
  return x;
}

std::vector<double> projected_gradient_oracle(const std::vector<double>& lo, const std::vector<double>& hi,
                                              double total) {
  std::vector<double> x(lo.size(), 0.0), g(lo.size());
  for (int it = 0; it < 2000; ++it) {
    for (std::size_t i = 0; i < x.size(); ++i) g[i] = x[i] - 0.25 * 2.0 * x[i];
    x = project_box_simplex(g, lo, hi, total);
  }
  return x;
}

}  // namespace

TEST_CASE("urgency weight") {
  CHECK(urgency(0.02, 1.0, 600.0, 10.0) == doctest::Approx(0.98 / 600.0));
  CHECK(urgency(0.02, 1.0, 600.0, 10.0) == doctest::Approx(1.633e-3).epsilon(1e-3));
  CHECK(urgency(0.9, 0.8, 600.0, 10.0) == 0.0);
  CHECK(urgency(0.8, 0.8, 600.0, 10.0) == 0.0);
  CHECK(urgency(0.5, 1.0, 1.0, 10.0) == doctest::Approx(0.05));
}

TEST_CASE("qp dimensions and bounds") {
  auto inst = default_instance(1);
  inst.vehicles.push_back(vehicle_on(7, {0}, 0.3, 0.8));
  const auto p = build_qp(inst);
  const int S = static_cast<int>(inst.stripes.size());
  CHECK(p.num_vars() == 3 + 2 * S);
  const MpcLayout L{1, S, 1};
  CHECK(p.num_eq() == L.num_eq());
  CHECK(p.num_ineq() == L.num_ineq());
  // b_0 is pinned to the current SoC.
  // 0.3 * 60 kWh * 3600 / 5 s
  CHECK(p.l[L.soc(0, 0)] == doctest::Approx(12960.0));
  CHECK(p.u[L.soc(0, 0)] == doctest::Approx(12960.0));
  CHECK(p.u[L.vehicle_power(0, 0)] == doctest::Approx(100.0));

  SUBCASE("off-stripe step has a zero power cap") {
    auto two = default_instance(2);
    two.vehicles.push_back(vehicle_on(1, {3, std::nullopt}, 0.3, 0.8));
    const auto q = build_qp(two);
    const MpcLayout M{1, S, 2};
    CHECK(q.u[M.vehicle_power(0, 0)] == doctest::Approx(100.0));
    CHECK(q.u[M.vehicle_power(0, 1)] == 0.0);
  }
}

TEST_CASE("zero vehicles spread the budget as evenly as the stripe bounds allow") {
  auto inst = default_instance();
  MpcAllocator mpc(inst.config);
  const auto plan = mpc.solve_step(inst);
  std::vector<double> lo, hi;
  for (const auto& s : inst.stripes) {
    lo.push_back(s.p_min_kw);
    hi.push_back(inst.config.rho * s.static_share_kw);
  }
  const auto oracle = projected_gradient_oracle(lo, hi, inst.total_power_kw);
  REQUIRE(plan.per_stripe_kw.size() == oracle.size());
  for (std::size_t i = 0; i < oracle.size(); ++i) {
    CHECK(oracle[i] == doctest::Approx(1600.0).epsilon(1e-6));
    CHECK(plan.per_stripe_kw[i] == doctest::Approx(oracle[i]).epsilon(1e-6));
  }
  CHECK(plan_violation(plan, inst) <= 1e-9);
}

TEST_CASE("single vehicle with abundant power") {
  auto inst = default_instance();
  SUBCASE("large gap draws the coil rating") {
    inst.vehicles.push_back(vehicle_on(1, always(2, 6), 0.2, 0.9));
    MpcAllocator mpc(inst.config);
    const auto plan = mpc.solve_step(inst);
    CHECK(plan.vehicle_power(1) == doctest::Approx(100.0).epsilon(1e-6));
    CHECK(plan.per_vehicle.at(1).stripe == 2);
  }
  SUBCASE("small gap stops exactly at the target") {
    // 0.001 of 60 kWh is 43.2 kW x 5 s of battery energy, i.e. 45.47 kW x 5 s
    // drawn at 95% efficiency over the horizon; nothing beyond the target.
    inst.vehicles.push_back(vehicle_on(1, always(2, 6), 0.799, 0.8));
    MpcAllocator mpc(inst.config);
    const auto plan = mpc.solve_step(inst);
    const auto& x = mpc.last_solution();
    double drawn = 0.0;
    for (int k = 0; k < 6; ++k) drawn += x[MpcLayout{1, 10, 6}.vehicle_power(0, k)];
    CHECK(drawn == doctest::Approx(0.001 * 60.0 * 3600.0 / 5.0 / 0.95).epsilon(1e-6));
    CHECK(drawn == doctest::Approx(45.4737).epsilon(1e-5));
    CHECK(plan.vehicle_power(1) > 0.0);
    CHECK(plan.vehicle_power(1) < 100.0);
  }
}

TEST_CASE("vehicles already at target draw nothing without revenue") {
  auto inst = default_instance();
  inst.config.lambda = 0.0;
  for (int i = 0; i < 4; ++i) inst.vehicles.push_back(vehicle_on(i, always(i, 6), 0.7, 0.7));
  MpcAllocator mpc(inst.config);
  const auto plan = mpc.solve_step(inst);
  for (int i = 0; i < 4; ++i) CHECK(plan.vehicle_power(i) == doctest::Approx(0.0).epsilon(1e-6));
}

TEST_CASE("uncoupled vehicles are pruned and get zero") {
  auto inst = default_instance();
  inst.vehicles.push_back(vehicle_on(1, std::vector<std::optional<int>>(6), 0.2, 0.9));
  inst.vehicles.push_back(vehicle_on(2, always(0, 6), 0.2, 0.9));
  MpcAllocator mpc(inst.config);
  const auto plan = mpc.solve_step(inst);
  CHECK(mpc.last_stats().vehicles == 1);
  CHECK(plan.vehicle_power(1) == 0.0);
  CHECK_FALSE(plan.per_vehicle.at(1).stripe.has_value());
  CHECK(plan.vehicle_power(2) == doctest::Approx(100.0).epsilon(1e-6));
}

TEST_CASE("lower SoC never receives less power on a contested stripe") {
  std::mt19937_64 rng(31);
  std::uniform_real_distribution<double> soc(0.05, 0.7);
  for (int trial = 0; trial < 25; ++trial) {
    auto inst = small_instance();
    const double s1 = soc(rng), s2 = soc(rng);
    inst.vehicles.push_back(vehicle_on(1, always(0, 3), s1, 0.9));
    inst.vehicles.push_back(vehicle_on(2, always(0, 3), s2, 0.9));
    MpcAllocator mpc(inst.config);
    const auto plan = mpc.solve_step(inst);
    const double p1 = plan.vehicle_power(1), p2 = plan.vehicle_power(2);
    if (s1 < s2)
      CHECK(p1 >= p2 - 1e-4);
    else
      CHECK(p2 >= p1 - 1e-4);
    CHECK(plan_violation(plan, inst) <= 1e-4);
  }
}

TEST_CASE("saturated stripe delivers min(stripe cap, vehicle caps)") {
  auto inst = small_instance();
  inst.config.lambda = 0.0;
  inst.config.xi = 1e-6;
  SUBCASE("stripe bound binds") {
    inst.vehicles.push_back(vehicle_on(1, always(0, 3), 0.2, 0.9));
    inst.vehicles.push_back(vehicle_on(2, always(0, 3), 0.3, 0.9));
    MpcAllocator mpc(inst.config);
    const auto plan = mpc.solve_step(inst);
    CHECK(plan.vehicle_power(1) + plan.vehicle_power(2) == doctest::Approx(75.0).epsilon(1e-5));
  }
  SUBCASE("vehicle caps bind") {
    inst.config.rho = 3.0;
    inst.total_power_kw = 200.0;
    for (auto& s : inst.stripes) s.static_share_kw = 100.0;
    inst.vehicles.push_back(vehicle_on(1, always(0, 3), 0.2, 0.9));
    MpcAllocator mpc(inst.config);
    const auto plan = mpc.solve_step(inst);
    CHECK(plan.vehicle_power(1) == doctest::Approx(100.0).epsilon(1e-5));
  }
}

TEST_CASE("scaling urgency and assignment weights together keeps the argmin") {
  // u scales by c when tau and tau_min shrink by c; xi scales alongside so the
  // whole objective (lambda = 0) is multiplied by c.
  auto base = small_instance();
  base.config.lambda = 0.0;
  base.vehicles.push_back(vehicle_on(1, always(0, 3), 0.2, 0.9, 60.0, 400.0));
  base.vehicles.push_back(vehicle_on(2, {0, 0, 1}, 0.4, 0.8, 50.0, 300.0));
  base.vehicles.push_back(vehicle_on(3, {1, 1, std::nullopt}, 0.1, 0.6, 70.0, 200.0));
  auto scaled = base;
  const double c = 8.0;
  scaled.config.xi *= c;
  scaled.config.tau_min_s /= c;
  for (auto& v : scaled.vehicles) v.prediction.tau_s /= c;
  const auto a = MpcAllocator(base.config).solve_step(base);
  const auto b = MpcAllocator(scaled.config).solve_step(scaled);
  for (int id = 1; id <= 3; ++id) CHECK(a.vehicle_power(id) == doctest::Approx(b.vehicle_power(id)).epsilon(1e-4));
  for (std::size_t s = 0; s < 2; ++s) CHECK(a.per_stripe_kw[s] == doctest::Approx(b.per_stripe_kw[s]).epsilon(1e-4));
}

TEST_CASE("random crowded instances give feasible first-step plans") {
  std::mt19937_64 rng(41);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  MpcAllocator mpc(default_instance().config);
  for (int trial = 0; trial < 6; ++trial) {
    auto inst = default_instance();
    inst.time_s = 5.0 * trial;
    const int n = 40 + 30 * trial;
    for (int i = 0; i < n; ++i) {
      std::vector<std::optional<int>> path(6);
      const int s = static_cast<int>(unit(rng) * 10);
      const int on_from = static_cast<int>(unit(rng) * 4);
      const int on_to = on_from + 1 + static_cast<int>(unit(rng) * 4);
      for (int k = on_from; k < std::min(on_to, 6); ++k) path[static_cast<std::size_t>(k)] = s;
      auto v = vehicle_on(i, path, 0.02 + 0.5 * unit(rng), 0.5 + 0.5 * unit(rng), 40.0 + 40.0 * unit(rng),
                          30.0 + 900.0 * unit(rng));
      v.consumption_kwh.assign(6, 0.02 * unit(rng));
      inst.vehicles.push_back(v);
    }
    const auto plan = mpc.solve_step(inst);
    CHECK(plan_violation(plan, inst) <= 1e-4);
    CHECK(mpc.last_stats().max_clip_kw <= 1e-3);
    const double total = std::accumulate(plan.per_stripe_kw.begin(), plan.per_stripe_kw.end(), 0.0);
    CHECK(total == doctest::Approx(16000.0).epsilon(1e-12));
  }
}

TEST_CASE("warm start reproduces the cold solution") {
  auto inst = default_instance();
  for (int i = 0; i < 30; ++i) inst.vehicles.push_back(vehicle_on(i, always(i % 5, 6), 0.1 + 0.02 * i, 0.95));
  MpcAllocator warm(inst.config);
  warm.solve_step(inst);
  auto next = inst;
  next.time_s = 5.0;
  for (auto& v : next.vehicles) v.soc += 0.001;
  const auto hot = warm.solve_step(next);
  const auto cold = MpcAllocator(inst.config).solve_step(next);
  for (int i = 0; i < 30; ++i) CHECK(hot.vehicle_power(i) == doctest::Approx(cold.vehicle_power(i)).epsilon(1e-4));
}

TEST_CASE("consumption forecast") {
  auto v = vehicle_on(1, always(0, 6), 0.5, 0.9, 60.0, 12.0);
  ConsumptionModel m;
  const auto c = forecast_consumption(v, m, 5.0);
  const double draw = (2.0 + 0.72 * 10.0) / 3600.0;
  CHECK(c[0] == doctest::Approx(draw * 5.0));
  CHECK(c[1] == doctest::Approx(draw * 5.0));
  CHECK(c[2] == doctest::Approx(draw * 2.0));
  CHECK(c[3] == 0.0);
  auto empty = vehicle_on(2, always(0, 6), 0.0001, 0.9, 60.0, 600.0);
  const auto d = forecast_consumption(empty, m, 5.0);
  CHECK(std::accumulate(d.begin(), d.end(), 0.0) == doctest::Approx(0.006));
}

TEST_CASE("invalid instances are rejected") {
  auto inst = default_instance();
  inst.vehicles.push_back(vehicle_on(1, always(0, 5), 0.2, 0.9));
  CHECK_THROWS_AS(build_qp(inst), std::invalid_argument);
  inst.vehicles[0] = vehicle_on(1, always(12, 6), 0.2, 0.9);
  CHECK_THROWS_AS(build_qp(inst), std::invalid_argument);
}
