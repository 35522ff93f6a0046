#ifndef SALTOPT_ERRORS_HPP
#define SALTOPT_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace saltopt {

enum class SimError {
  StepUnderflow,
  StepLimit,
  NonFiniteState,
  AmbiguousEvent,   // several guards cross within one refined step
  ZenoSuspicion,    // consecutive events closer than the Zeno epsilon
  OnGuardAtStart,   // initial state already on (or past) a guard surface
  Grazing,          // transversality denominator below threshold
  NoConvergence,    // iterative solve failed
  DimensionMismatch,
};

class SimulationError : public std::runtime_error {
 public:
  SimulationError(SimError kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}
  SimError kind() const { return kind_; }

 private:
  SimError kind_;
};

}  // namespace saltopt

#endif
