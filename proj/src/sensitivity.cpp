#include "saltopt/sensitivity.hpp"

#include <algorithm>
#include <cmath>

#include "saltopt/errors.hpp"

namespace saltopt {

namespace {

constexpr double kTieRelTol = 1e-9;        // eigenvalues tied at the measure
constexpr double kEventFdStep = 1e-5;      // step scale for re-integrated-phase FDs
constexpr double kShapeFdStep = 6.0554544523933395e-06;  // cbrt(machine epsilon)
constexpr double kDefectiveDot = 1e-8;     // |k^T j| below this flags defectiveness

// Greedy nearest-neighbor pairing of left eigenvalues to right ones.
std::vector<int> pair_by_eigenvalue(const CVec& ref, const CVec& other) {
  const int n = static_cast<int>(ref.size());
  std::vector<int> match(n, -1);
  std::vector<bool> used(n, false);
  for (int i = 0; i < n; ++i) {
    double best = std::numeric_limits<double>::infinity();
    int pick = -1;
    for (int j = 0; j < n; ++j) {
      if (used[j]) continue;
      const double d = std::abs(ref[i] - other[j]);
      if (d < best) {
        best = d;
        pick = j;
      }
    }
    match[i] = pick;
    used[pick] = true;
  }
  return match;
}

}  // namespace

EigenSystem eigen_decompose(const Mat& phi, double cluster_tol) {
  const int n = static_cast<int>(phi.rows());
  Eigen::EigenSolver<Mat> right_solver(phi);
  Eigen::EigenSolver<Mat> left_solver(phi.transpose());

  EigenSystem es;
  es.values = right_solver.eigenvalues();
  es.right = right_solver.eigenvectors();
  es.left = CMat(n, n);

  const auto match = pair_by_eigenvalue(es.values, left_solver.eigenvalues());
  for (int i = 0; i < n; ++i) es.left.col(i) = left_solver.eigenvectors().col(match[i]);

  // repeated-eigenvalue clusters
  const double scale = std::max(1.0, es.values.cwiseAbs().maxCoeff());
  std::vector<bool> grouped(n, false);
  for (int i = 0; i < n; ++i) {
    if (grouped[i]) continue;
    std::vector<int> group = {i};
    for (int j = i + 1; j < n; ++j) {
      if (!grouped[j] && std::abs(es.values[i] - es.values[j]) <= cluster_tol * scale) {
        group.push_back(j);
        grouped[j] = true;
      }
    }
    if (group.size() > 1) {
      for (int k : group) grouped[k] = true;
      es.repeated_groups.push_back(std::move(group));
    }
  }

  // normalize k_i so k_i^T j_i = 1 (transpose, not conjugate); a vanishing
  // product marks a defective pair
  const double phi_norm = std::max(phi.norm(), 1e-300);
  for (int i = 0; i < n; ++i) {
    const Complex dot = es.left.col(i).transpose() * es.right.col(i);
    if (std::abs(dot) / (es.left.col(i).norm() * es.right.col(i).norm()) < kDefectiveDot) {
      es.diagonalizable = false;
    } else {
      es.left.col(i) /= dot;
    }
    const double res = (phi * es.right.col(i) - es.values[i] * es.right.col(i)).norm();
    es.max_residual = std::max(es.max_residual, res / phi_norm);
  }
  return es;
}

CVec eigenvalue_derivative(const EigenSystem& es, const Mat& dphi) {
  if (!es.diagonalizable)
    throw SimulationError(SimError::NoConvergence,
                          "eigenvalue derivative undefined for a defective matrix; use the "
                          "finite-difference fallback");
  if (!es.repeated_groups.empty())
    throw SimulationError(SimError::NoConvergence,
                          "eigenvalue derivative requires simple eigenvalues; use the "
                          "finite-difference fallback");
  const int n = static_cast<int>(es.values.size());
  CVec out(n);
  const CMat dphi_c = dphi.cast<Complex>();
  for (int i = 0; i < n; ++i)
    out[i] = (es.left.col(i).transpose() * dphi_c * es.right.col(i)).value();
  return out;
}

namespace {

// Saltation factors of `transition` recomputed at `params`; everything else
// reused. Returns the full product.
Mat phi_with_transition_salt(const MonodromyReport& report, const HybridSystem& sys,
                             const PeriodicOrbit& orbit, const ControlPolicy& policy,
                             const ParamSet& params, int transition, const Tolerances& tol) {
  Mat prod;
  bool first = true;
  for (const auto& f : report.factors) {
    Mat m;
    if (f.kind == MonodromyFactor::Kind::PhaseStm) {
      m = report.stms[static_cast<size_t>(f.index)].matrix;
    } else {
      const auto& salt = report.saltations[static_cast<size_t>(f.index)];
      if (salt.transition == transition) {
        const EventRecord& ev = orbit.execution.events[static_cast<size_t>(f.index)];
        m = saltation_matrix(sys, ev, policy, params, tol).matrix;
      } else {
        m = salt.matrix;
      }
    }
    prod = first ? m : Mat(m * prod);
    first = false;
  }
  return prod;
}

}  // namespace

Mat monodromy_shape_derivative(const MonodromyReport& report, const HybridSystem& sys,
                               const PeriodicOrbit& orbit, const ControlPolicy& policy,
                               const ParamSet& params, const std::string& param,
                               const Tolerances& tol) {
  const int owner = sys.owner_of(param);
  if (owner < 0)
    throw std::out_of_range("shape parameter '" + param + "' not found on any transition");
  const int n = static_cast<int>(report.matrix.rows());

  const Transition& tr = sys.transition(owner);
  if (tr.analytic.salt_dparam) {
    // registered analytic dXi/dh, sandwiched between the stored factors
    Mat dphi = Mat::Zero(n, n);
    for (size_t fi = 0; fi < report.factors.size(); ++fi) {
      const auto& f = report.factors[fi];
      if (f.kind != MonodromyFactor::Kind::Saltation) continue;
      const auto& salt = report.saltations[static_cast<size_t>(f.index)];
      if (salt.transition != owner) continue;
      const EventRecord& ev = orbit.execution.events[static_cast<size_t>(f.index)];
      Mat dxi = tr.analytic.salt_dparam(ev.t, ev.x_minus, ev.u_minus, params, param);
      Mat prefix = factor_product(report, 0, static_cast<int>(fi) - 1);
      Mat suffix = factor_product(report, static_cast<int>(fi) + 1,
                                  static_cast<int>(report.factors.size()) - 1);
      dphi += suffix * dxi * prefix;
    }
    return dphi;
  }

  // central difference of the saltation formula in h; the orbit, the events
  // and all other factors are unaffected by a shape parameter
  const double h0 = params.get(param);
  const double step = kShapeFdStep * std::max(1.0, std::abs(h0));
  ParamSet pp = params, pm = params;
  pp.set(param, h0 + step);
  pm.set(param, h0 - step);
  const Mat phi_p = phi_with_transition_salt(report, sys, orbit, policy, pp, owner, tol);
  const Mat phi_m = phi_with_transition_salt(report, sys, orbit, policy, pm, owner, tol);
  return (phi_p - phi_m) / (2.0 * step);
}

namespace {

// Flow (t0, x0) by dt inside one mode, either direction, ignoring guards.
Vec flow_by(const HybridSystem& sys, int mode, const ControlPolicy& policy,
            const ParamSet& params, double t0, const Vec& x0, double dt,
            const Tolerances& tol) {
  return flow_stm(sys, mode, policy, params, t0, x0, t0 + dt, tol).second;
}

// Phi with event `ei` perturbed: its time shifted along the flow (Time) or
// its pre-event state offset in one component (State). The event's saltation
// and the two adjacent phase STMs are rebuilt; other factors are reused.
Mat event_perturbed_phi(const MonodromyReport& report, const HybridSystem& sys,
                        const PeriodicOrbit& orbit, const ControlPolicy& policy,
                        const ParamSet& params, int ei, EventWrt wrt, int comp, double delta,
                        const Tolerances& tol) {
  const auto& exec = orbit.execution;
  const EventRecord& ev = exec.events[static_cast<size_t>(ei)];
  const Transition& tr = sys.transition(ev.transition);
  const Mode& src = sys.mode(tr.source);
  const Mode& dst = sys.mode(tr.target);

  double t_ev = ev.t;
  Vec x_minus = ev.x_minus;
  if (wrt == EventWrt::Time) {
    t_ev += delta;
    x_minus = flow_by(sys, tr.source, policy, params, ev.t, ev.x_minus, delta, tol);
  } else {
    x_minus[comp] += delta;
  }

  EventRecord pev;
  pev.transition = ev.transition;
  pev.t = t_ev;
  pev.x_minus = x_minus;
  pev.u_minus = policy.input(tr.source, src.input_dim, t_ev, x_minus, params);
  pev.x_plus = tr.reset(t_ev, x_minus, pev.u_minus, params);
  pev.u_plus = policy.input(tr.target, dst.input_dim, t_ev, pev.x_plus, params);

  const Mat xi = saltation_matrix(sys, pev, policy, params, tol).matrix;

  // previous phase: ends at the (possibly shifted) event time
  const PhaseTrajectory& prev = exec.phases[static_cast<size_t>(ei)];
  Mat a_prev;
  if (wrt == EventWrt::Time)
    a_prev = flow_stm(sys, prev.mode, policy, params, prev.t_start(), prev.start_state(), t_ev,
                      tol)
                 .first;
  else
    a_prev = report.stms[static_cast<size_t>(ei)].matrix;

  // next phase: starts at the perturbed post-event state, same end time
  const PhaseTrajectory& next = exec.phases[static_cast<size_t>(ei) + 1];
  Mat a_next =
      flow_stm(sys, next.mode, policy, params, t_ev, pev.x_plus, next.t_end(), tol).first;

  // assemble: factors [2*ei], [2*ei+1], [2*ei+2] replaced
  Mat prod;
  bool first = true;
  for (size_t fi = 0; fi < report.factors.size(); ++fi) {
    Mat m;
    if (fi == static_cast<size_t>(2 * ei))
      m = a_prev;
    else if (fi == static_cast<size_t>(2 * ei + 1))
      m = xi;
    else if (fi == static_cast<size_t>(2 * ei + 2))
      m = a_next;
    else {
      const auto& f = report.factors[fi];
      m = f.kind == MonodromyFactor::Kind::PhaseStm
              ? report.stms[static_cast<size_t>(f.index)].matrix
              : report.saltations[static_cast<size_t>(f.index)].matrix;
    }
    prod = first ? m : Mat(m * prod);
    first = false;
  }
  return prod;
}

}  // namespace

Mat monodromy_event_derivative(const MonodromyReport& report, const HybridSystem& sys,
                               const PeriodicOrbit& orbit, const ControlPolicy& policy,
                               const ParamSet& params, int event_index, EventWrt wrt,
                               int state_component, const Tolerances& tol) {
  const auto& exec = orbit.execution;
  if (event_index < 0 || event_index + 1 >= static_cast<int>(exec.events.size()))
    throw std::invalid_argument(
        "event derivative requires an interior event (the anchor event cannot move)");
  if (wrt == EventWrt::State) {
    const int n_src =
        sys.mode(sys.transition(exec.events[static_cast<size_t>(event_index)].transition).source)
            .state_dim;
    if (state_component < 0 || state_component >= n_src)
      throw std::invalid_argument("state component out of range");
  }

  const EventRecord& ev = exec.events[static_cast<size_t>(event_index)];
  const double scale = wrt == EventWrt::Time ? std::max(1.0, std::abs(ev.t))
                                             : std::max(1.0, std::abs(ev.x_minus[state_component]));
  const double step = kEventFdStep * scale;

  const Mat phi_p = event_perturbed_phi(report, sys, orbit, policy, params, event_index, wrt,
                                        state_component, step, tol);
  const Mat phi_m = event_perturbed_phi(report, sys, orbit, policy, params, event_index, wrt,
                                        state_component, -step, tol);
  return (phi_p - phi_m) / (2.0 * step);
}

MonodromyReport reassemble_with_params(const MonodromyReport& report, const HybridSystem& sys,
                                       const PeriodicOrbit& orbit, const ControlPolicy& policy,
                                       const ParamSet& new_params, const Tolerances& tol) {
  MonodromyReport out = report;
  for (size_t i = 0; i < out.saltations.size(); ++i) {
    const EventRecord& ev = orbit.execution.events[i];
    SaltationMatrix salt = saltation_matrix(sys, ev, policy, new_params, tol);
    out.saltations[i] = std::move(salt);
  }
  out.matrix = factor_product(out, 0, static_cast<int>(out.factors.size()) - 1);

  Eigen::EigenSolver<Mat> es(out.matrix);
  out.eigenvalues = es.eigenvalues();
  out.eigenvectors = es.eigenvectors();
  const Vec flow_dir = sys.closed_loop_field(orbit.anchor_mode, policy,
                                             orbit.execution.t_start(), orbit.x0, new_params);
  out.stability = stability_measure(out.eigenvalues, out.eigenvectors, sys.autonomous,
                                    flow_dir, tol);
  return out;
}

std::string ParamRef::label() const {
  switch (kind) {
    case Kind::Shape:
      return name;
    case Kind::EventTime:
      return "event[" + std::to_string(event_index) + "].t";
    case Kind::EventState:
      return "event[" + std::to_string(event_index) + "].x[" + std::to_string(component) + "]";
  }
  return "?";
}

std::vector<SensitivityResult> stability_gradient(const MonodromyReport& report,
                                                  const HybridSystem& sys,
                                                  const PeriodicOrbit& orbit,
                                                  const ControlPolicy& policy,
                                                  const ParamSet& params,
                                                  const std::vector<ParamRef>& wrt,
                                                  const Tolerances& tol) {
  const EigenSystem es = eigen_decompose(report.matrix);
  const double psi = report.stability.psi;
  const int excluded = report.stability.excluded_index;

  // eigenvalues attaining the measure, within the tie tolerance
  std::vector<int> attaining;
  for (int i = 0; i < static_cast<int>(es.values.size()); ++i) {
    if (i == excluded) continue;
    if (std::abs(es.values[i]) >= psi * (1.0 - kTieRelTol)) attaining.push_back(i);
  }

  const bool analytic_ok = es.diagonalizable && [&] {
    for (int i : attaining)
      if (es.is_repeated(i)) return false;
    return true;
  }();

  auto dphi_of = [&](const ParamRef& p) -> Mat {
    switch (p.kind) {
      case ParamRef::Kind::Shape:
        return monodromy_shape_derivative(report, sys, orbit, policy, params, p.name, tol);
      case ParamRef::Kind::EventTime:
        return monodromy_event_derivative(report, sys, orbit, policy, params, p.event_index,
                                          EventWrt::Time, -1, tol);
      case ParamRef::Kind::EventState:
        return monodromy_event_derivative(report, sys, orbit, policy, params, p.event_index,
                                          EventWrt::State, p.component, tol);
    }
    throw std::logic_error("unreachable");
  };

  // psi at perturbed parameters, for the finite-difference fallback
  auto psi_at = [&](const ParamRef& p, double delta) -> double {
    const Vec flow_dir = sys.closed_loop_field(orbit.anchor_mode, policy,
                                               orbit.execution.t_start(), orbit.x0, params);
    Mat phi;
    if (p.kind == ParamRef::Kind::Shape) {
      ParamSet pp = params;
      pp.set(p.name, pp.get(p.name) + delta);
      phi = reassemble_with_params(report, sys, orbit, policy, pp, tol).matrix;
    } else {
      phi = event_perturbed_phi(report, sys, orbit, policy, params, p.event_index,
                                p.kind == ParamRef::Kind::EventTime ? EventWrt::Time
                                                                    : EventWrt::State,
                                p.component, delta, tol);
    }
    return stability_measure_of(phi, sys.autonomous, flow_dir, tol).psi;
  };

  std::vector<SensitivityResult> results;
  for (const auto& p : wrt) {
    SensitivityResult r;
    r.parameter = p;
    r.dphi = dphi_of(p);
    if (analytic_ok) {
      r.dlambda = eigenvalue_derivative(es, r.dphi);
      double best = -std::numeric_limits<double>::infinity();
      for (int i : attaining) {
        const double d =
            (std::conj(es.values[i]) * r.dlambda[i]).real() / std::abs(es.values[i]);
        best = std::max(best, d);
      }
      r.dpsi = best;
      r.method = SensitivityResult::Method::Analytic;
    } else {
      const double step =
          p.kind == ParamRef::Kind::Shape
              ? kShapeFdStep * std::max(1.0, std::abs(params.get(p.name)))
              : kEventFdStep;
      r.dpsi = (psi_at(p, step) - psi_at(p, -step)) / (2.0 * step);
      r.method = SensitivityResult::Method::FiniteDifference;
    }
    results.push_back(std::move(r));
  }
  return results;
}

}  // namespace saltopt
