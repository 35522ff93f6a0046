#include "saltopt/execution.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "saltopt/errors.hpp"

namespace saltopt {

Vec PhaseTrajectory::state_at(double t) const {
  if (times.empty()) throw std::logic_error("empty phase trajectory");
  if (t <= times.front()) return states.front();
  if (t >= times.back()) return states.back();
  size_t lo = 0, hi = dense.size() - 1;
  while (lo < hi) {
    size_t mid = (lo + hi) / 2;
    if (dense[mid].t0 + dense[mid].h < t)
      lo = mid + 1;
    else
      hi = mid;
  }
  return dense[lo].eval(t);
}

namespace {

struct GuardState {
  int transition;
  double value;   // at phase start
  int sign;       // sign at phase start
};

int sgn(double v) { return (v > 0.0) - (v < 0.0); }

}  // namespace

FlowResult flow_to_event(const HybridSystem& sys, int mode, double t0, const Vec& x0,
                         const ControlPolicy& policy, const ParamSet& params, double t_max,
                         const Tolerances& tol) {
  const Mode& m = sys.mode(mode);
  if (x0.size() != m.state_dim)
    throw SimulationError(SimError::DimensionMismatch,
                          "state dimension does not match mode '" + m.name + "'");

  const auto out_transitions = sys.transitions_from(mode);

  auto guard_at = [&](int tr_idx, double t, const Vec& x) {
    const Transition& tr = sys.transition(tr_idx);
    Vec u = policy.input(mode, m.input_dim, t, x, params);
    return tr.guard(t, x, u, params);
  };

  std::vector<GuardState> guards;
  for (int tr_idx : out_transitions) {
    double g0 = guard_at(tr_idx, t0, x0);
    if (std::abs(g0) <= tol.event)
      throw SimulationError(SimError::OnGuardAtStart,
                            "state starts on guard '" + sys.transition(tr_idx).name + "'");
    guards.push_back({tr_idx, g0, sgn(g0)});
  }

  OdeRhs rhs = [&](double t, const Vec& x) {
    return sys.closed_loop_field(mode, policy, t, x, params);
  };

  IntegrateOptions iopts;
  iopts.rel_tol = tol.integ_rel;
  iopts.abs_tol = tol.integ_abs;

  FlowResult result;
  PhaseTrajectory& traj = result.trajectory;
  traj.mode = mode;
  traj.times.push_back(t0);
  traj.states.push_back(x0);

  Rk45 stepper(rhs, t0, x0, iopts);
  DenseStep dense;

  while (stepper.step(t_max, dense) == StepOutcome::Advanced) {
    const double t_prev = dense.t0;
    const double t_new = dense.t0 + dense.h;

    // Scan for crossings on this step; check the midpoint too, so a guard
    // that dips across and back inside one step is still seen.
    struct Hit {
      int transition;
      double t;
      double g;
    };
    std::vector<Hit> hits;
    for (auto& gs : guards) {
      double lo_t = t_prev;
      double lo_g = gs.value;
      for (double frac : {0.5, 1.0}) {
        const double hi_t = t_prev + frac * dense.h;
        const double hi_g = guard_at(gs.transition, hi_t, dense.eval(hi_t));
        const bool crossed = (sgn(hi_g) != gs.sign) || std::abs(hi_g) <= tol.event;
        if (crossed) {
          auto f = [&](double t) { return guard_at(gs.transition, t, dense.eval(t)); };
          double t_star = (std::abs(hi_g) <= tol.event && sgn(hi_g) == gs.sign)
                              ? hi_t
                              : brent_root(f, lo_t, hi_t, lo_g, hi_g, 1e-14, tol.event);
          hits.push_back({gs.transition, t_star, f(t_star)});
          break;
        }
        lo_t = hi_t;
        lo_g = hi_g;
      }
      gs.value = guard_at(gs.transition, t_new, dense.eval(t_new));
    }

    if (!hits.empty()) {
      std::sort(hits.begin(), hits.end(), [](const Hit& a, const Hit& b) { return a.t < b.t; });
      if (hits.size() > 1 && hits[1].t - hits[0].t < tol.zeno_dt) {
        std::ostringstream oss;
        oss << "guards '" << sys.transition(hits[0].transition).name << "' and '"
            << sys.transition(hits[1].transition).name << "' cross within "
            << (hits[1].t - hits[0].t) << " of each other";
        throw SimulationError(SimError::AmbiguousEvent, oss.str());
      }
      const Hit& hit = hits.front();
      Vec x_star = dense.eval(hit.t);
      traj.times.push_back(hit.t);
      traj.states.push_back(x_star);
      DenseStep truncated = dense;  // interpolant still valid on the sub-interval
      traj.dense.push_back(truncated);

      PendingEvent ev;
      ev.transition = hit.transition;
      ev.t = hit.t;
      ev.x_minus = std::move(x_star);
      ev.guard_residual = hit.g;
      result.event = ev;
      return result;
    }

    traj.times.push_back(t_new);
    traj.states.push_back(stepper.x());
    traj.dense.push_back(dense);
  }

  return result;  // reached t_max without an event
}

HybridExecution execute(const HybridSystem& sys, int start_mode, double t0, const Vec& x0,
                        const ControlPolicy& policy, const ParamSet& params,
                        const StopCondition& stop, const Tolerances& tol) {
  HybridExecution exec;
  int mode = start_mode;
  double t = t0;
  Vec x = x0;
  int section_count = 0;

  while (true) {
    FlowResult flow;
    try {
      flow = flow_to_event(sys, mode, t, x, policy, params, stop.t_final, tol);
    } catch (const SimulationError& err) {
      if (err.kind() == SimError::OnGuardAtStart && !exec.events.empty())
        throw SimulationError(SimError::ZenoSuspicion,
                              std::string("guard re-fires immediately after reset: ") +
                                  err.what());
      throw;
    }
    exec.phases.push_back(std::move(flow.trajectory));

    if (!flow.event) return exec;  // time horizon reached

    const PendingEvent& pe = *flow.event;
    if (!exec.events.empty() && pe.t - exec.events.back().t < tol.zeno_dt)
      throw SimulationError(SimError::ZenoSuspicion,
                            "two events within " + std::to_string(pe.t - exec.events.back().t) +
                                " time units");

    const Transition& tr = sys.transition(pe.transition);
    const Mode& src = sys.mode(tr.source);
    const Mode& dst = sys.mode(tr.target);

    EventRecord rec;
    rec.transition = pe.transition;
    rec.t = pe.t;
    rec.x_minus = pe.x_minus;
    rec.u_minus = policy.input(tr.source, src.input_dim, pe.t, pe.x_minus, params);
    rec.x_plus = tr.reset(pe.t, pe.x_minus, rec.u_minus, params);
    if (rec.x_plus.size() != dst.state_dim)
      throw SimulationError(SimError::DimensionMismatch,
                            "reset '" + tr.name + "' emitted wrong dimension");
    rec.u_plus = policy.input(tr.target, dst.input_dim, pe.t, rec.x_plus, params);
    rec.guard_residual = pe.guard_residual;

    mode = tr.target;
    t = pe.t;
    x = rec.x_plus;
    exec.events.push_back(std::move(rec));

    if (pe.transition == stop.stop_at_transition && ++section_count >= stop.stop_at_count)
      return exec;
    if (stop.max_events >= 0 && static_cast<int>(exec.events.size()) >= stop.max_events)
      return exec;
  }
}

PeriodicOrbit close_orbit(const HybridSystem& sys, const ControlPolicy& policy,
                          const ParamSet& params, int section_transition, const Vec& x0,
                          double t_max, const Tolerances& tol, bool require_closed) {
  const int anchor_mode = sys.transition(section_transition).target;
  StopCondition stop;
  stop.t_final = t_max;
  stop.stop_at_transition = section_transition;
  HybridExecution exec = execute(sys, anchor_mode, 0.0, x0, policy, params, stop, tol);
  if (exec.events.empty() || exec.events.back().transition != section_transition)
    throw SimulationError(SimError::NoConvergence,
                          "execution did not return to the section transition");

  PeriodicOrbit orbit;
  orbit.section_transition = section_transition;
  orbit.anchor_mode = anchor_mode;
  orbit.x0 = x0;
  orbit.period = exec.events.back().t;
  orbit.residual = (exec.events.back().x_plus - x0).norm();
  orbit.execution = std::move(exec);
  if (require_closed && orbit.residual > tol.orbit)
    throw SimulationError(SimError::NoConvergence,
                          "orbit residual " + std::to_string(orbit.residual) +
                              " exceeds tolerance");
  return orbit;
}

OrbitSolution solve_periodic_orbit(const HybridSystem& sys, const ControlPolicy& policy,
                                   const ParamSet& params, int section_transition,
                                   const Vec& x0_guess,
                                   const std::vector<std::string>& free_params,
                                   const std::vector<OrbitConstraint>& constraints,
                                   const ShootingOptions& opts) {
  const int n = static_cast<int>(x0_guess.size());
  const int m = static_cast<int>(free_params.size());
  const int nc = static_cast<int>(constraints.size());

  ParamSet p = params;
  double t_cap = 0.0;  // set after the first successful cycle

  auto unpack = [&](const Vec& z, Vec& x0, ParamSet& pp) {
    x0 = z.head(n);
    for (int j = 0; j < m; ++j) pp.set(free_params[static_cast<size_t>(j)], z[n + j]);
  };

  auto residual = [&](const Vec& z) -> Vec {
    Vec x0;
    ParamSet pp = p;
    unpack(z, x0, pp);
    StopCondition stop;
    stop.stop_at_transition = section_transition;
    stop.t_final = (t_cap > 0.0) ? t_cap : std::numeric_limits<double>::infinity();
    HybridExecution exec = execute(sys, sys.transition(section_transition).target, 0.0, x0,
                                   policy, pp, stop, opts.tol);
    if (exec.events.empty() || exec.events.back().transition != section_transition)
      throw SimulationError(SimError::NoConvergence, "cycle did not close during shooting");
    if (t_cap == 0.0) t_cap = opts.t_max_factor * std::max(1.0, exec.events.back().t);
    Vec r(n + nc);
    r.head(n) = exec.events.back().x_plus - x0;
    for (int k = 0; k < nc; ++k) r[n + k] = constraints[static_cast<size_t>(k)](x0, pp);
    return r;
  };

  Vec z(n + m);
  z.head(n) = x0_guess;
  for (int j = 0; j < m; ++j) z[n + j] = p.get(free_params[static_cast<size_t>(j)]);

  Vec r = residual(z);
  double rnorm = r.norm();

  for (int iter = 0; iter < opts.max_iterations && rnorm > opts.tol.orbit; ++iter) {
    // central-difference Jacobian
    Mat J(n + nc, n + m);
    for (int j = 0; j < n + m; ++j) {
      const double h = fd_step(z[j], opts.tol) * 10.0;
      Vec zp = z, zm = z;
      zp[j] += h;
      zm[j] -= h;
      J.col(j) = (residual(zp) - residual(zm)) / (2.0 * h);
    }

    Vec dz = J.completeOrthogonalDecomposition().solve(-r);
    if (!dz.allFinite())
      throw SimulationError(SimError::NoConvergence, "singular shooting Jacobian");

    // backtracking on the residual norm
    double alpha = 1.0;
    bool improved = false;
    for (int bt = 0; bt < 30; ++bt) {
      Vec z_try = z + alpha * dz;
      try {
        Vec r_try = residual(z_try);
        if (r_try.norm() < rnorm) {
          z = z_try;
          r = r_try;
          rnorm = r.norm();
          improved = true;
          break;
        }
      } catch (const SimulationError&) {
        // trial cycle failed to close; shrink the step
      }
      alpha *= 0.5;
    }
    if (!improved)
      throw SimulationError(SimError::NoConvergence,
                            "shooting stalled at residual " + std::to_string(rnorm));
  }

  if (rnorm > opts.tol.orbit)
    throw SimulationError(SimError::NoConvergence,
                          "shooting did not converge: residual " + std::to_string(rnorm));

  OrbitSolution sol;
  Vec x0;
  unpack(z, x0, p);
  sol.params = p;
  sol.orbit = close_orbit(sys, policy, p, section_transition, x0,
                          (t_cap > 0 ? t_cap : 1e6), opts.tol, false);
  return sol;
}

}  // namespace saltopt
