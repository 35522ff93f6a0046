#ifndef SALTOPT_VARIATIONAL_HPP
#define SALTOPT_VARIATIONAL_HPP

#include <string>
#include <vector>

#include "saltopt/execution.hpp"
#include "saltopt/system.hpp"

namespace saltopt {

/// State-transition matrix of one continuous phase under the closed-loop
/// dynamics: delta x(t_end) ~ A delta x(t_start).
struct PhaseStm {
  Mat matrix;
  int phase_index = -1;
  double t_start = 0.0;
  double t_end = 0.0;
};

/// Linearized event map: delta x_plus ~ Xi delta x_minus. Rows follow the
/// target mode, columns the source mode, so Xi may be rectangular across
/// dimension-changing resets.
struct SaltationMatrix {
  Mat matrix;
  int transition = -1;
  double t = 0.0;
  double denominator = 0.0;  // D_t g + D_x g . F_I at the event
};

struct MonodromyFactor {
  enum class Kind { PhaseStm, Saltation };
  Kind kind;
  int index;  // into stms / saltations
};

struct StabilityMeasure {
  double psi = 0.0;
  int excluded_index = -1;  // autonomous flow-direction eigenvalue, -1 if none
  std::string diagnostic;   // non-empty when exclusion was requested but not found
};

/// Monodromy matrix of a closed orbit with its factorization, spectrum and
/// stability measure.
struct MonodromyReport {
  Mat matrix;  // product of the factors in execution order
  CVec eigenvalues;
  CMat eigenvectors;
  StabilityMeasure stability;
  bool autonomous = false;
  std::vector<PhaseStm> stms;
  std::vector<SaltationMatrix> saltations;
  std::vector<MonodromyFactor> factors;  // factors.front() acts first

  double psi() const { return stability.psi; }
};

/// Integrates the variational equations dA/dt = J(t, x(t)) A from identity
/// along a phase, re-tracing the stored trajectory. J is the Jacobian of the
/// closed-loop field: the mode's registered jacobian if present, otherwise
/// central finite differences.
PhaseStm phase_stm(const HybridSystem& sys, const PhaseTrajectory& phase,
                   const ControlPolicy& policy, const ParamSet& params,
                   const Tolerances& tol = {});

/// Saltation matrix at a recorded event. Derivatives of the guard and reset
/// come from the transition's registered forms when present, else from
/// central finite differences of the closed-loop compositions.
SaltationMatrix saltation_matrix(const HybridSystem& sys, const EventRecord& event,
                                 const ControlPolicy& policy, const ParamSet& params,
                                 const Tolerances& tol = {});

/// Composes phase STMs and saltation matrices along a closed orbit from its
/// anchor section.
MonodromyReport monodromy(const HybridSystem& sys, const PeriodicOrbit& orbit,
                          const ControlPolicy& policy, const ParamSet& params,
                          const Tolerances& tol = {});

/// Maximum eigenvalue magnitude. For autonomous systems the single eigenvalue
/// nearest 1 whose eigenvector best aligns with the flow direction is
/// excluded first; if no eigenvalue lies within the unit tolerance of 1 the
/// measure is computed without exclusion and a diagnostic is recorded.
StabilityMeasure stability_measure(const CVec& eigenvalues, const CMat& eigenvectors,
                                   bool autonomous, const Vec& flow_direction,
                                   const Tolerances& tol = {});

/// Convenience: eigendecompose Phi and apply stability_measure.
StabilityMeasure stability_measure_of(const Mat& phi, bool autonomous,
                                      const Vec& flow_direction, const Tolerances& tol = {});

/// Product of a report's factors over [first, last] (inclusive, application
/// order). Empty ranges give the identity sized for composition at `first`.
Mat factor_product(const MonodromyReport& report, int first, int last);

/// STM and end state of the closed-loop flow from (t0, x0) to t1 within one
/// mode, ignoring guards. Handles t1 < t0 by time reversal.
std::pair<Mat, Vec> flow_stm(const HybridSystem& sys, int mode, const ControlPolicy& policy,
                             const ParamSet& params, double t0, const Vec& x0, double t1,
                             const Tolerances& tol = {});

}  // namespace saltopt

#endif
