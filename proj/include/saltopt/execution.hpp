#ifndef SALTOPT_EXECUTION_HPP
#define SALTOPT_EXECUTION_HPP

#include <limits>
#include <optional>
#include <vector>

#include "saltopt/integrate.hpp"
#include "saltopt/system.hpp"
#include "saltopt/types.hpp"

namespace saltopt {

/// One continuous phase: samples at accepted integrator steps plus the dense
/// interpolants between them.
struct PhaseTrajectory {
  int mode = -1;
  std::vector<double> times;
  std::vector<Vec> states;
  std::vector<DenseStep> dense;

  double t_start() const { return times.front(); }
  double t_end() const { return times.back(); }
  double duration() const { return t_end() - t_start(); }
  const Vec& start_state() const { return states.front(); }
  const Vec& end_state() const { return states.back(); }
  Vec state_at(double t) const;
};

struct EventRecord {
  int transition = -1;
  double t = 0.0;
  Vec x_minus;        // state an instant before the event
  Vec x_plus;         // R(t, x_minus, u_minus)
  Vec u_minus;        // pre-event input (source-mode policy)
  Vec u_plus;         // post-event input (target-mode policy at x_plus)
  double guard_residual = 0.0;
};

struct HybridExecution {
  std::vector<PhaseTrajectory> phases;
  std::vector<EventRecord> events;

  double t_start() const { return phases.front().t_start(); }
  double t_end() const { return phases.back().t_end(); }
};

struct PendingEvent {
  int transition = -1;
  double t = 0.0;
  Vec x_minus;
  double guard_residual = 0.0;
};

struct FlowResult {
  PhaseTrajectory trajectory;
  std::optional<PendingEvent> event;
};

/// Integrates one mode's closed-loop dynamics until a guard crossing or
/// t_max. Guard crossings are detected by sign change against the sign at
/// phase start and refined with Brent's method on the dense output.
FlowResult flow_to_event(const HybridSystem& sys, int mode, double t0, const Vec& x0,
                         const ControlPolicy& policy, const ParamSet& params, double t_max,
                         const Tolerances& tol = {});

struct StopCondition {
  int max_events = -1;                                   // <0: unbounded
  double t_final = std::numeric_limits<double>::infinity();
  int stop_at_transition = -1;                           // stop after this fires...
  int stop_at_count = 1;                                 // ...this many times
};

/// Chains flow_to_event and reset application, recording every event.
HybridExecution execute(const HybridSystem& sys, int start_mode, double t0, const Vec& x0,
                        const ControlPolicy& policy, const ParamSet& params,
                        const StopCondition& stop, const Tolerances& tol = {});

/// A closed one-cycle execution anchored at the post-event state of a
/// designated section transition.
struct PeriodicOrbit {
  HybridExecution execution;  // phases == events (closed loop)
  int section_transition = -1;
  int anchor_mode = -1;   // target mode of the section transition
  Vec x0;                 // anchor state, start of phase 0
  double period = 0.0;
  double residual = 0.0;  // |x(T) - x0|
};

struct ShootingOptions {
  int max_iterations = 60;
  double t_max_factor = 50.0;  // cap on cycle time, relative to max(1, first-cycle time)
  Tolerances tol;
};

/// Extra scalar equality conditions on (anchor state, parameters), appended
/// to the return-map residual (e.g. to pin apex height while leg parameters
/// are free).
using OrbitConstraint = std::function<double(const Vec& x0, const ParamSet&)>;

struct OrbitSolution {
  PeriodicOrbit orbit;
  ParamSet params;  // input parameters with solved free entries written back
};

/// Newton shooting on the return-map residual x(T) - x0 with finite-difference
/// Jacobians; free parameters become unknowns alongside the anchor state.
OrbitSolution solve_periodic_orbit(const HybridSystem& sys, const ControlPolicy& policy,
                                   const ParamSet& params, int section_transition,
                                   const Vec& x0_guess,
                                   const std::vector<std::string>& free_params = {},
                                   const std::vector<OrbitConstraint>& constraints = {},
                                   const ShootingOptions& opts = {});

/// One cycle from x0 through the section transition; builds the closed orbit
/// without adjusting anything. Fails if the residual exceeds tol.orbit and
/// `require_closed`.
PeriodicOrbit close_orbit(const HybridSystem& sys, const ControlPolicy& policy,
                          const ParamSet& params, int section_transition, const Vec& x0,
                          double t_max, const Tolerances& tol = {}, bool require_closed = true);

}  // namespace saltopt

#endif
