#ifndef SALTOPT_SENSITIVITY_HPP
#define SALTOPT_SENSITIVITY_HPP

#include <string>
#include <vector>

#include "saltopt/variational.hpp"

namespace saltopt {

/// Full eigensystem of a (generally non-symmetric) real matrix. Left
/// eigenvectors are paired to the right ones by eigenvalue and normalized so
/// k_i^T j_i = 1 for simple eigenvalues.
struct EigenSystem {
  CVec values;
  CMat right;  // columns j_i
  CMat left;   // columns k_i
  bool diagonalizable = true;
  std::vector<std::vector<int>> repeated_groups;  // index clusters, size > 1
  double max_residual = 0.0;  // max_i |Phi j_i - lambda_i j_i| / |Phi|

  bool is_repeated(int i) const {
    for (const auto& g : repeated_groups)
      for (int k : g)
        if (k == i) return true;
    return false;
  }
};

EigenSystem eigen_decompose(const Mat& phi, double cluster_tol = 1e-9);

/// d lambda_i / dp = k_i^T (dPhi/dp) j_i for every i. Requires simple
/// eigenvalues and a diagonalizable matrix; throws otherwise so callers fall
/// back to finite differences of the measure.
CVec eigenvalue_derivative(const EigenSystem& es, const Mat& dphi);

/// dPhi/dh for a shape parameter owned by one transition: only that
/// transition's saltation factors are re-evaluated (central difference of the
/// saltation formula in h, or the registered derivative), every other factor
/// is reused from the report.
Mat monodromy_shape_derivative(const MonodromyReport& report, const HybridSystem& sys,
                               const PeriodicOrbit& orbit, const ControlPolicy& policy,
                               const ParamSet& params, const std::string& param,
                               const Tolerances& tol = {});

enum class EventWrt { Time, State };

/// dPhi with respect to an event's time or one component of its pre-event
/// state. The event's saltation and the two adjacent phase STMs are
/// re-evaluated at perturbed events (re-integrated phases); the remaining
/// factors stay fixed. The event must not be the orbit's anchor event.
Mat monodromy_event_derivative(const MonodromyReport& report, const HybridSystem& sys,
                               const PeriodicOrbit& orbit, const ControlPolicy& policy,
                               const ParamSet& params, int event_index, EventWrt wrt,
                               int state_component = -1, const Tolerances& tol = {});

/// Re-evaluates all saltation factors at new parameter values while reusing
/// the stored phase STMs; exact for shape parameters, which leave the orbit
/// (and therefore the STMs and event records) unchanged.
MonodromyReport reassemble_with_params(const MonodromyReport& report, const HybridSystem& sys,
                                       const PeriodicOrbit& orbit, const ControlPolicy& policy,
                                       const ParamSet& new_params, const Tolerances& tol = {});

/// Identifies what a sensitivity is taken with respect to.
struct ParamRef {
  enum class Kind { Shape, EventTime, EventState };
  Kind kind = Kind::Shape;
  std::string name;        // shape parameter name
  int event_index = -1;    // for event kinds
  int component = -1;      // state component for EventState

  static ParamRef shape(std::string n) {
    ParamRef r;
    r.kind = Kind::Shape;
    r.name = std::move(n);
    return r;
  }
  static ParamRef event_time(int event) {
    ParamRef r;
    r.kind = Kind::EventTime;
    r.event_index = event;
    return r;
  }
  static ParamRef event_state(int event, int comp) {
    ParamRef r;
    r.kind = Kind::EventState;
    r.event_index = event;
    r.component = comp;
    return r;
  }
  std::string label() const;
};

struct SensitivityResult {
  ParamRef parameter;
  Mat dphi;
  CVec dlambda;  // empty when the finite-difference fallback was used
  double dpsi = 0.0;
  enum class Method { Analytic, FiniteDifference } method = Method::Analytic;
};

/// d psi / dp for each requested parameter. Uses the eigenvalue derivative of
/// the measure-attaining eigenvalue; at ties (within 1e-9 relative) returns
/// the largest tied derivative; falls back to central finite differences of
/// psi when the decomposition is repeated or defective.
std::vector<SensitivityResult> stability_gradient(const MonodromyReport& report,
                                                  const HybridSystem& sys,
                                                  const PeriodicOrbit& orbit,
                                                  const ControlPolicy& policy,
                                                  const ParamSet& params,
                                                  const std::vector<ParamRef>& wrt,
                                                  const Tolerances& tol = {});

}  // namespace saltopt

#endif
