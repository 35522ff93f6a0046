#include "saltopt/variational.hpp"

#include <cmath>

#include "saltopt/errors.hpp"

namespace saltopt {

namespace {

Mat closed_loop_jacobian(const HybridSystem& sys, int mode, const ControlPolicy& policy,
                         const ParamSet& params, double t, const Vec& x,
                         const Tolerances& tol) {
  const Mode& m = sys.mode(mode);
  if (m.field_dx) {
    Vec u = policy.input(mode, m.input_dim, t, x, params);
    return m.field_dx(t, x, u);
  }
  const int n = m.state_dim;
  Mat J(n, n);
  for (int j = 0; j < n; ++j) {
    const double h = fd_step(x[j], tol);
    Vec xp = x, xm = x;
    xp[j] += h;
    xm[j] -= h;
    J.col(j) = (sys.closed_loop_field(mode, policy, t, xp, params) -
                sys.closed_loop_field(mode, policy, t, xm, params)) /
               (2.0 * h);
  }
  return J;
}

}  // namespace

std::pair<Mat, Vec> flow_stm(const HybridSystem& sys, int mode, const ControlPolicy& policy,
                             const ParamSet& params, double t0, const Vec& x0, double t1,
                             const Tolerances& tol) {
  const Mode& m = sys.mode(mode);
  const int n = m.state_dim;
  if (t0 == t1) return {Mat::Identity(n, n), x0};

  const bool reversed = t1 < t0;

  // Augmented system [x; vec(A)] with dA/dt = J A.
  OdeRhs rhs = [&, reversed](double tau, const Vec& y) {
    const double t = reversed ? t0 - (tau - t0) : tau;
    const Vec x = y.head(n);
    const Eigen::Map<const Mat> A(y.data() + n, n, n);
    Mat J = closed_loop_jacobian(sys, mode, policy, params, t, x, tol);
    if (!J.allFinite())
      throw SimulationError(SimError::NonFiniteState, "non-finite Jacobian in phase STM");
    Vec dy(n + n * n);
    dy.head(n) = sys.closed_loop_field(mode, policy, t, x, params);
    Eigen::Map<Mat>(dy.data() + n, n, n) = J * A;
    if (reversed) dy = -dy;
    return dy;
  };

  Vec y0(n + n * n);
  y0.head(n) = x0;
  Eigen::Map<Mat>(y0.data() + n, n, n) = Mat::Identity(n, n);

  IntegrateOptions iopts;
  iopts.rel_tol = tol.integ_rel;
  iopts.abs_tol = tol.integ_abs;
  iopts.store_dense = false;
  const double tau_end = reversed ? t0 + (t0 - t1) : t1;
  auto sol = integrate(rhs, t0, y0, tau_end, iopts);

  const Vec& y_end = sol.states.back();
  return {Mat(Eigen::Map<const Mat>(y_end.data() + n, n, n)), Vec(y_end.head(n))};
}

PhaseStm phase_stm(const HybridSystem& sys, const PhaseTrajectory& phase,
                   const ControlPolicy& policy, const ParamSet& params,
                   const Tolerances& tol) {
  const Mode& m = sys.mode(phase.mode);
  const int n = m.state_dim;

  PhaseStm out;
  out.phase_index = phase.mode;
  out.t_start = phase.t_start();
  out.t_end = phase.t_end();

  if (phase.duration() <= 0.0) {
    out.matrix = Mat::Identity(n, n);
    return out;
  }

  // Re-traces the stored trajectory, which is deterministic for the same
  // inputs; a large drift means the stored phase is inconsistent.
  auto [A, x_end] =
      flow_stm(sys, phase.mode, policy, params, out.t_start, phase.start_state(), out.t_end, tol);
  const double drift = (x_end - phase.end_state()).norm();
  if (drift > 1e-6 * (1.0 + phase.end_state().norm()))
    throw SimulationError(SimError::NoConvergence,
                          "variational re-trace deviates from the stored phase by " +
                              std::to_string(drift));
  out.matrix = std::move(A);
  return out;
}

SaltationMatrix saltation_matrix(const HybridSystem& sys, const EventRecord& event,
                                 const ControlPolicy& policy, const ParamSet& params,
                                 const Tolerances& tol) {
  const Transition& tr = sys.transition(event.transition);
  const Mode& src = sys.mode(tr.source);
  const Mode& dst = sys.mode(tr.target);
  const int ni = src.state_dim;
  const int nj = dst.state_dim;
  const double t = event.t;
  const Vec& x = event.x_minus;

  // Closed-loop compositions: the policy substitutes the input, so guard and
  // reset derivatives include any input dependence automatically.
  auto guard_cl = [&](double tt, const Vec& xx) {
    Vec u = policy.input(tr.source, src.input_dim, tt, xx, params);
    return tr.guard(tt, xx, u, params);
  };
  auto reset_cl = [&](double tt, const Vec& xx) {
    Vec u = policy.input(tr.source, src.input_dim, tt, xx, params);
    return tr.reset(tt, xx, u, params);
  };

  RowVec dxg(ni);
  if (tr.analytic.guard_dx) {
    dxg = tr.analytic.guard_dx(t, x, event.u_minus, params);
  } else {
    for (int j = 0; j < ni; ++j) {
      const double h = fd_step(x[j], tol);
      Vec xp = x, xm = x;
      xp[j] += h;
      xm[j] -= h;
      dxg[j] = (guard_cl(t, xp) - guard_cl(t, xm)) / (2.0 * h);
    }
  }

  double dtg;
  if (tr.analytic.guard_dt) {
    dtg = tr.analytic.guard_dt(t, x, event.u_minus, params);
  } else {
    const double h = fd_step(t, tol);
    dtg = (guard_cl(t + h, x) - guard_cl(t - h, x)) / (2.0 * h);
  }

  Mat dxr(nj, ni);
  if (tr.analytic.reset_dx) {
    dxr = tr.analytic.reset_dx(t, x, event.u_minus, params);
  } else {
    for (int j = 0; j < ni; ++j) {
      const double h = fd_step(x[j], tol);
      Vec xp = x, xm = x;
      xp[j] += h;
      xm[j] -= h;
      dxr.col(j) = (reset_cl(t, xp) - reset_cl(t, xm)) / (2.0 * h);
    }
  }

  Vec dtr(nj);
  if (tr.analytic.reset_dt) {
    dtr = tr.analytic.reset_dt(t, x, event.u_minus, params);
  } else {
    const double h = fd_step(t, tol);
    dtr = (reset_cl(t + h, x) - reset_cl(t - h, x)) / (2.0 * h);
  }

  const Vec f_i = src.field(t, x, event.u_minus);
  const Vec f_j = dst.field(t, event.x_plus, event.u_plus);

  SaltationMatrix out;
  out.transition = event.transition;
  out.t = t;
  out.denominator = dtg + dxg.dot(f_i);
  if (std::abs(out.denominator) < tol.transversality)
    throw SimulationError(SimError::Grazing,
                          "transversality violation at '" + tr.name +
                              "': denominator = " + std::to_string(out.denominator));

  out.matrix = dxr + ((f_j - dxr * f_i - dtr) * dxg) / out.denominator;
  if (!out.matrix.allFinite())
    throw SimulationError(SimError::NonFiniteState, "non-finite saltation matrix");
  return out;
}

MonodromyReport monodromy(const HybridSystem& sys, const PeriodicOrbit& orbit,
                          const ControlPolicy& policy, const ParamSet& params,
                          const Tolerances& tol) {
  const auto& exec = orbit.execution;
  if (exec.phases.size() != exec.events.size())
    throw SimulationError(SimError::NoConvergence,
                          "monodromy requires a closed orbit (phases == events)");

  MonodromyReport report;
  report.autonomous = sys.autonomous;

  for (size_t i = 0; i < exec.phases.size(); ++i) {
    PhaseStm stm = phase_stm(sys, exec.phases[i], policy, params, tol);
    stm.phase_index = static_cast<int>(i);
    report.factors.push_back(
        {MonodromyFactor::Kind::PhaseStm, static_cast<int>(report.stms.size())});
    report.stms.push_back(std::move(stm));

    SaltationMatrix salt = saltation_matrix(sys, exec.events[i], policy, params, tol);
    report.factors.push_back(
        {MonodromyFactor::Kind::Saltation, static_cast<int>(report.saltations.size())});
    report.saltations.push_back(std::move(salt));
  }

  report.matrix = factor_product(report, 0, static_cast<int>(report.factors.size()) - 1);
  if (report.matrix.rows() != report.matrix.cols())
    throw SimulationError(SimError::DimensionMismatch,
                          "monodromy product is not square: orbit does not close in one "
                          "mode's coordinates");

  Eigen::EigenSolver<Mat> es(report.matrix);
  report.eigenvalues = es.eigenvalues();
  report.eigenvectors = es.eigenvectors();

  const Vec flow_dir =
      sys.closed_loop_field(orbit.anchor_mode, policy, exec.t_start(), orbit.x0, params);
  report.stability = stability_measure(report.eigenvalues, report.eigenvectors,
                                       sys.autonomous, flow_dir, tol);
  return report;
}

StabilityMeasure stability_measure(const CVec& eigenvalues, const CMat& eigenvectors,
                                   bool autonomous, const Vec& flow_direction,
                                   const Tolerances& tol) {
  StabilityMeasure out;
  const int n = static_cast<int>(eigenvalues.size());

  int excluded = -1;
  if (autonomous) {
    // candidates within the unit tolerance of 1; among them pick the
    // eigenvector best aligned with the flow direction
    double best_alignment = -1.0;
    const double fnorm = flow_direction.norm();
    for (int i = 0; i < n; ++i) {
      if (std::abs(eigenvalues[i] - Complex(1.0, 0.0)) > tol.unit_eigenvalue) continue;
      const CVec v = eigenvectors.col(i);
      const double alignment =
          (fnorm > 0.0) ? std::abs(v.dot(flow_direction.cast<Complex>())) / (v.norm() * fnorm)
                        : 0.0;
      if (alignment > best_alignment) {
        best_alignment = alignment;
        excluded = i;
      }
    }
    if (excluded < 0)
      out.diagnostic =
          "autonomous system but no eigenvalue within tolerance of 1; measure computed "
          "without exclusion";
  }

  out.excluded_index = excluded;
  double psi = 0.0;
  for (int i = 0; i < n; ++i) {
    if (i == excluded) continue;
    psi = std::max(psi, std::abs(eigenvalues[i]));
  }
  out.psi = psi;
  return out;
}

StabilityMeasure stability_measure_of(const Mat& phi, bool autonomous,
                                      const Vec& flow_direction, const Tolerances& tol) {
  Eigen::EigenSolver<Mat> es(phi);
  return stability_measure(es.eigenvalues(), es.eigenvectors(), autonomous, flow_direction,
                           tol);
}

Mat factor_product(const MonodromyReport& report, int first, int last) {
  auto matrix_of = [&](int i) -> const Mat& {
    const MonodromyFactor& f = report.factors.at(static_cast<size_t>(i));
    return f.kind == MonodromyFactor::Kind::PhaseStm
               ? report.stms[static_cast<size_t>(f.index)].matrix
               : report.saltations[static_cast<size_t>(f.index)].matrix;
  };

  if (first > last) {
    // empty range: identity at the seam between factors (first-1) and first
    Eigen::Index dim;
    if (first - 1 >= 0)
      dim = matrix_of(first - 1).rows();
    else
      dim = matrix_of(first).cols();
    return Mat::Identity(dim, dim);
  }

  Mat prod = matrix_of(first);
  for (int i = first + 1; i <= last; ++i) prod = matrix_of(i) * prod;
  return prod;
}

}  // namespace saltopt
