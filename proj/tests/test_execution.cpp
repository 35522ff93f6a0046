#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "saltopt/errors.hpp"
#include "saltopt/execution.hpp"
#include "saltopt/models/paddle.hpp"
#include "test_helpers.hpp"

using namespace saltopt;
using testutil::make_ballistic_rig;
using testutil::vec2;

TEST_CASE("ballistic fall hits the floor at the closed-form time") {
  auto rig = make_ballistic_rig(9.81);
  auto res = flow_to_event(rig.system, rig.fall_mode, 0.0, vec2(2.5, 0.0), rig.policy,
                           rig.system.default_params, 10.0);
  REQUIRE(res.event.has_value());
  const double t_exact = std::sqrt(2.0 * 2.5 / 9.81);
  CHECK(res.event->t == doctest::Approx(t_exact).epsilon(1e-10));
  CHECK(std::abs(res.event->guard_residual) <= 1e-10);
}

TEST_CASE("horizon shorter than the fall time yields no event") {
  auto rig = make_ballistic_rig(9.81);
  auto res = flow_to_event(rig.system, rig.fall_mode, 0.0, vec2(2.5, 0.0), rig.policy,
                           rig.system.default_params, 0.3);
  CHECK(!res.event.has_value());
  CHECK(res.trajectory.t_end() == doctest::Approx(0.3));
}

TEST_CASE("linear-in-time guard is refined to the analytic root") {
  HybridSystem sys;
  FieldFn f = [](double, const Vec& x, const Vec&) { return Vec(Vec::Zero(x.size())); };
  int m = sys.add_mode({"hold", 1, 0, f});
  Transition tr;
  tr.name = "clock";
  tr.source = m;
  tr.target = m;
  const double t_root = 0.73125861234;
  tr.guard = [t_root](double t, const Vec&, const Vec&, const ParamSet&) { return t_root - t; };
  tr.reset = [](double, const Vec& x, const Vec&, const ParamSet&) { return x; };
  sys.add_transition(std::move(tr));

  ControlPolicy policy;
  Vec x0(1);
  x0 << 1.0;
  auto res = flow_to_event(sys, m, 0.0, x0, policy, sys.default_params, 2.0);
  REQUIRE(res.event.has_value());
  CHECK(std::abs(res.event->t - t_root) < 1e-10);
}

TEST_CASE("event accuracy over a randomized ballistic family") {
  std::mt19937_64 gen(20240811);
  std::uniform_real_distribution<double> height(0.5, 5.0);
  std::uniform_real_distribution<double> vel(-2.0, 2.0);
  std::uniform_real_distribution<double> grav(3.0, 15.0);
  for (int trial = 0; trial < 40; ++trial) {
    const double g = grav(gen);
    const double y0 = height(gen);
    const double v0 = vel(gen);
    auto rig = make_ballistic_rig(g);
    auto res = flow_to_event(rig.system, rig.fall_mode, 0.0, vec2(y0, v0), rig.policy,
                             rig.system.default_params, 50.0);
    REQUIRE(res.event.has_value());
    const double t_exact = (v0 + std::sqrt(v0 * v0 + 2.0 * g * y0)) / g;
    CHECK(std::abs(res.event->t - t_exact) <= 1e-8);
  }
}

TEST_CASE("starting on a guard is rejected") {
  auto rig = make_ballistic_rig();
  CHECK_THROWS_AS(flow_to_event(rig.system, rig.fall_mode, 0.0, vec2(0.0, -1.0), rig.policy,
                                rig.system.default_params, 1.0),
                  SimulationError);
}

TEST_CASE("paddle orbit closes apex to apex") {
  auto model = models::make_paddle({0.5, 9.81, 1.2, 0.0, -1.0});
  CHECK(model.orbit.residual < 1e-9);
  CHECK(model.orbit.period == doctest::Approx(2.0 * std::sqrt(2.0 * 1.2 / 9.81)).epsilon(1e-9));
  // closed loop: one phase per event
  CHECK(model.orbit.execution.phases.size() == model.orbit.execution.events.size());
}

TEST_CASE("executions record resets exactly and keep dimensions") {
  auto model = models::make_paddle();
  StopCondition stop;
  stop.max_events = 6;
  auto exec = execute(model.system, model.orbit.anchor_mode, 0.0, model.orbit.x0, model.policy,
                      model.system.default_params, stop);
  REQUIRE(exec.events.size() == 6);
  for (size_t i = 0; i < exec.events.size(); ++i) {
    const auto& ev = exec.events[i];
    const auto& tr = model.system.transition(ev.transition);
    // reset applied once, exactly
    Vec expected = tr.reset(ev.t, ev.x_minus, ev.u_minus, model.system.default_params);
    CHECK((ev.x_plus - expected).norm() == 0.0);
    CHECK(std::abs(ev.guard_residual) <= 1e-10);
  }
  for (const auto& phase : exec.phases) {
    const auto dim = model.system.mode(phase.mode).state_dim;
    for (const auto& s : phase.states) CHECK(s.size() == dim);
  }
  // phases chain through resets within integration tolerance
  for (size_t i = 0; i + 1 < exec.phases.size(); ++i) {
    CHECK((exec.phases[i + 1].start_state() - exec.events[i].x_plus).norm() == 0.0);
  }
}

TEST_CASE("immediate guard re-fire is a Zeno error") {
  HybridSystem sys;
  FieldFn f = [](double, const Vec& x, const Vec&) { return vec2(x[1], -9.81); };
  int m = sys.add_mode({"fall", 2, 0, f});
  Transition tr;
  tr.name = "sticky";
  tr.source = m;
  tr.target = m;
  tr.guard = [](double, const Vec& x, const Vec&, const ParamSet&) { return x[0]; };
  // reset leaves the ball falling into the guard again
  tr.reset = [](double, const Vec& x, const Vec&, const ParamSet&) { return x; };
  sys.add_transition(std::move(tr));
  ControlPolicy policy;
  StopCondition stop;
  stop.max_events = 3;
  CHECK_THROWS_AS(execute(sys, m, 0.0, vec2(1.0, 0.0), policy, sys.default_params, stop),
                  SimulationError);
}

TEST_CASE("two guards crossing together is ambiguous") {
  HybridSystem sys;
  FieldFn f = [](double, const Vec& x, const Vec&) { return vec2(x[1], -9.81); };
  int m = sys.add_mode({"fall", 2, 0, f});
  for (const char* name : {"floor_a", "floor_b"}) {
    Transition tr;
    tr.name = name;
    tr.source = m;
    tr.target = m;
    tr.guard = [](double, const Vec& x, const Vec&, const ParamSet&) { return x[0]; };
    tr.reset = [](double, const Vec& x, const Vec&, const ParamSet&) {
      return vec2(x[0], -x[1]);
    };
    sys.add_transition(std::move(tr));
  }
  ControlPolicy policy;
  CHECK_THROWS_AS(flow_to_event(sys, m, 0.0, vec2(1.0, 0.0), policy, sys.default_params, 5.0),
                  SimulationError);
}

TEST_CASE("identical inputs produce identical executions") {
  auto model = models::make_paddle({0.7, 9.81, 2.0, 0.0, -3.0});
  StopCondition stop;
  stop.max_events = 8;
  auto run = [&] {
    return execute(model.system, model.orbit.anchor_mode, 0.0, model.orbit.x0, model.policy,
                   model.system.default_params, stop);
  };
  auto a = run();
  auto b = run();
  REQUIRE(a.events.size() == b.events.size());
  for (size_t i = 0; i < a.events.size(); ++i) {
    CHECK(a.events[i].t == b.events[i].t);
    CHECK((a.events[i].x_plus - b.events[i].x_plus).norm() == 0.0);
  }
}

TEST_CASE("shooting polishes a perturbed paddle start to a closed orbit") {
  auto model = models::make_paddle({0.5, 9.81, 1.0, 0.0, -1.0});
  Vec guess = model.orbit.x0 + vec2(3e-3, 0.0);
  auto sol = solve_periodic_orbit(model.system, model.policy, model.system.default_params,
                                  model.apex_transition, guess);
  CHECK(sol.orbit.residual < 1e-10);
  // the paddle clock pins the orbit, so shooting should return to the nominal anchor
  CHECK((sol.orbit.x0 - model.orbit.x0).norm() < 1e-6);
}

TEST_CASE("an already-periodic guess is returned unchanged") {
  auto model = models::make_paddle();
  auto sol = solve_periodic_orbit(model.system, model.policy, model.system.default_params,
                                  model.apex_transition, model.orbit.x0);
  CHECK((sol.orbit.x0 - model.orbit.x0).norm() < 1e-9);
  CHECK(sol.orbit.residual < 1e-10);
}
