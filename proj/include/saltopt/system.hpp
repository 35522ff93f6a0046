#ifndef SALTOPT_SYSTEM_HPP
#define SALTOPT_SYSTEM_HPP

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "saltopt/types.hpp"

namespace saltopt {

// All model callables see the executor clock t, the current state x, the
// current input u and the shared named parameters. Guards may close over the
// control policy through the parameters (e.g. a touchdown-angle program), so
// their derivatives are always taken closed-loop.
using FieldFn = std::function<Vec(double, const Vec&, const Vec&)>;
using GuardFn = std::function<double(double, const Vec&, const Vec&, const ParamSet&)>;
using ResetFn = std::function<Vec(double, const Vec&, const Vec&, const ParamSet&)>;
using InputFn = std::function<Vec(double, const Vec&, const ParamSet&)>;

struct Mode {
  std::string name;
  int state_dim = 0;
  int input_dim = 0;
  FieldFn field;
  // Optional analytic state Jacobian of the field at applied input u. Used as
  // the closed-loop Jacobian, so register it only when the mode's policy
  // input does not depend on the state.
  std::function<Mat(double, const Vec&, const Vec&)> field_dx;
};

/// Optional analytic derivatives of a guard/reset pair. Any entry left empty
/// falls back to central finite differences of the closed-loop composition.
struct TransitionDerivatives {
  std::function<RowVec(double, const Vec&, const Vec&, const ParamSet&)> guard_dx;
  std::function<double(double, const Vec&, const Vec&, const ParamSet&)> guard_dt;
  std::function<Mat(double, const Vec&, const Vec&, const ParamSet&)> reset_dx;
  std::function<Vec(double, const Vec&, const Vec&, const ParamSet&)> reset_dt;
  // d(saltation)/d(shape parameter), evaluated at the event; optional
  std::function<Mat(double, const Vec&, const Vec&, const ParamSet&, const std::string&)>
      salt_dparam;
};

struct Transition {
  std::string name;
  int source = -1;
  int target = -1;
  GuardFn guard;
  ResetFn reset;
  std::vector<std::string> shape_params;  // owned by this transition alone
  TransitionDerivatives analytic;
};

/// Per-mode input maps; modes without an entry get a zero input of the
/// declared dimension.
class ControlPolicy {
 public:
  void set(int mode, InputFn fn) {
    if (mode >= static_cast<int>(inputs_.size())) inputs_.resize(mode + 1);
    inputs_[mode] = std::move(fn);
  }

  Vec input(int mode, int input_dim, double t, const Vec& x, const ParamSet& p) const {
    if (mode < static_cast<int>(inputs_.size()) && inputs_[mode])
      return inputs_[mode](t, x, p);
    return Vec::Zero(input_dim);
  }

 private:
  std::vector<InputFn> inputs_;
};

/// A hybrid system: a directed graph of modes connected by guarded resets.
/// Immutable once validated; all evaluation state lives in the arguments.
class HybridSystem {
 public:
  int add_mode(Mode m) {
    modes_.push_back(std::move(m));
    return static_cast<int>(modes_.size()) - 1;
  }

  int add_transition(Transition tr) {
    transitions_.push_back(std::move(tr));
    return static_cast<int>(transitions_.size()) - 1;
  }

  const Mode& mode(int i) const { return modes_.at(static_cast<size_t>(i)); }
  const Transition& transition(int i) const { return transitions_.at(static_cast<size_t>(i)); }
  int num_modes() const { return static_cast<int>(modes_.size()); }
  int num_transitions() const { return static_cast<int>(transitions_.size()); }

  std::vector<int> transitions_from(int mode) const {
    std::vector<int> out;
    for (int i = 0; i < num_transitions(); ++i)
      if (transitions_[static_cast<size_t>(i)].source == mode) out.push_back(i);
    return out;
  }

  int find_transition(const std::string& name) const {
    for (int i = 0; i < num_transitions(); ++i)
      if (transitions_[static_cast<size_t>(i)].name == name) return i;
    throw std::out_of_range("unknown transition: " + name);
  }

  /// Transition owning a shape parameter, or -1.
  int owner_of(const std::string& param) const {
    for (int i = 0; i < num_transitions(); ++i)
      for (const auto& s : transitions_[static_cast<size_t>(i)].shape_params)
        if (s == param) return i;
    return -1;
  }

  bool autonomous = false;        // true: no explicit time dependence anywhere
  ParamSet default_params;        // declared parameters with nominal values

  /// Closed-loop vector field for a mode under a policy.
  Vec closed_loop_field(int mode, const ControlPolicy& policy, double t, const Vec& x,
                        const ParamSet& p) const {
    const Mode& m = this->mode(mode);
    return m.field(t, x, policy.input(mode, m.input_dim, t, x, p));
  }

 private:
  std::vector<Mode> modes_;
  std::vector<Transition> transitions_;
};

/// Structural checks: transition endpoints exist, resets emit the target
/// mode's dimension (probed at a sample point), shape parameters are declared
/// and owned by exactly one transition. Empty result means valid.
std::vector<std::string> validate_system(const HybridSystem& sys);

/// validate_system + throw std::invalid_argument listing all errors.
void require_valid(const HybridSystem& sys);

}  // namespace saltopt

#endif
