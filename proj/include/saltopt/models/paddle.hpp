#ifndef SALTOPT_MODELS_PADDLE_HPP
#define SALTOPT_MODELS_PADDLE_HPP

#include "saltopt/execution.hpp"
#include "saltopt/system.hpp"

namespace saltopt::models {

/// Vertical ball bounced on a moving paddle. State [x_B, xdot_B]. Two modes
/// (descent, ascent) joined by an impact and an apex transition. The paddle
/// motion is realized as a local quadratic around the nominal impact time, so
/// its acceleration at impact ("paddle_accel") is a pure shape parameter.
struct PaddleParams {
  double restitution = 0.5;      // alpha in (0, 1]
  double gravity = 9.81;
  double apex_height = 1.0;      // nominal apex above the impact point
  double impact_position = 0.0;  // paddle height at impact
  double paddle_accel = 0.0;     // shape parameter value at construction
};

struct PaddleModel {
  HybridSystem system;
  ControlPolicy policy;  // unactuated
  PeriodicOrbit orbit;   // anchored post-apex (start of descent)
  PaddleParams params;
  int descent_mode = -1;
  int ascent_mode = -1;
  int impact_transition = -1;
  int apex_transition = -1;
};

PaddleModel make_paddle(const PaddleParams& params = {});

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
  bool contains(double v) const { return v > lo && v < hi; }
};

/// Paddle accelerations at impact for which the bounce orbit is orbitally
/// stable: (-2g(1+a^2)/(1+a)^2, 0).
Interval paddle_stable_interval(double restitution, double gravity);

}  // namespace saltopt::models

#endif
