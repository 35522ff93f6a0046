#include "saltopt/models/paddle.hpp"

#include <cmath>
#include <stdexcept>

namespace saltopt::models {

namespace {

// Cycle-local clock in [-T/2, T/2). Phase starts sit exactly on the seam, so
// the half point must round up: a descent beginning at the apex reads -T/2.
double wrap_period(double dt, double period) {
  return dt - period * std::floor(dt / period + 0.5);
}

}  // namespace

PaddleModel make_paddle(const PaddleParams& params) {
  if (!(params.restitution > 0.0 && params.restitution <= 1.0))
    throw std::invalid_argument("paddle restitution must be in (0, 1]");
  if (params.gravity <= 0.0 || params.apex_height <= 0.0)
    throw std::invalid_argument("paddle gravity and apex height must be positive");

  const double alpha = params.restitution;
  const double g = params.gravity;
  const double h = params.apex_height;

  // Closed-form nominal orbit: ball falls from apex for T/2, impacts with
  // speed g T/2, leaves with the same speed upward. The paddle velocity at
  // impact makes the partially elastic reset energy-neutral.
  const double half_period = std::sqrt(2.0 * h / g);
  const double period = 2.0 * half_period;
  const double impact_speed = g * half_period;                            // |xdot-| at impact
  const double paddle_vel = impact_speed * (1.0 - alpha) / (1.0 + alpha);  // xdot_P at impact

  PaddleModel model;
  model.params = params;

  ParamSet& p = model.system.default_params;
  const int ip_accel = p.add("paddle_accel", params.paddle_accel);
  const int ip_pos = p.add("paddle_pos", params.impact_position);
  const int ip_vel = p.add("paddle_vel", paddle_vel);
  const int ip_timpact = p.add("impact_time", half_period);
  const int ip_period = p.add("period", period);
  const int ip_alpha = p.add("restitution", alpha);

  FieldFn field = [g](double, const Vec& x, const Vec&) {
    Vec dx(2);
    dx << x[1], -g;
    return dx;
  };

  model.descent_mode = model.system.add_mode({"descent", 2, 0, field});
  model.ascent_mode = model.system.add_mode({"ascent", 2, 0, field});

  auto paddle_pos = [=](double t, const ParamSet& pp) {
    const double w = wrap_period(t - pp.get(ip_timpact), pp.get(ip_period));
    return pp.get(ip_pos) + pp.get(ip_vel) * w + 0.5 * pp.get(ip_accel) * w * w;
  };
  auto paddle_vel_at = [=](double t, const ParamSet& pp) {
    const double w = wrap_period(t - pp.get(ip_timpact), pp.get(ip_period));
    return pp.get(ip_vel) + pp.get(ip_accel) * w;
  };

  Transition impact;
  impact.name = "impact";
  impact.source = model.descent_mode;
  impact.target = model.ascent_mode;
  impact.guard = [=](double t, const Vec& x, const Vec&, const ParamSet& pp) {
    return x[0] - paddle_pos(t, pp);
  };
  impact.reset = [=](double t, const Vec& x, const Vec&, const ParamSet& pp) {
    const double a = pp.get(ip_alpha);
    Vec out(2);
    out << x[0], (1.0 + a) * paddle_vel_at(t, pp) - a * x[1];
    return out;
  };
  impact.shape_params = {"paddle_accel"};
  impact.analytic.guard_dx = [](double, const Vec&, const Vec&, const ParamSet&) {
    RowVec dg(2);
    dg << 1.0, 0.0;
    return dg;
  };
  impact.analytic.guard_dt = [=](double t, const Vec&, const Vec&, const ParamSet& pp) {
    return -paddle_vel_at(t, pp);
  };
  impact.analytic.reset_dx = [=](double, const Vec&, const Vec&, const ParamSet& pp) {
    Mat dr = Mat::Identity(2, 2);
    dr(1, 1) = -pp.get(ip_alpha);
    return dr;
  };
  impact.analytic.reset_dt = [=](double, const Vec&, const Vec&, const ParamSet& pp) {
    Vec dr(2);
    dr << 0.0, (1.0 + pp.get(ip_alpha)) * pp.get(ip_accel);
    return dr;
  };
  model.impact_transition = model.system.add_transition(std::move(impact));

  Transition apex;
  apex.name = "apex";
  apex.source = model.ascent_mode;
  apex.target = model.descent_mode;
  apex.guard = [](double, const Vec& x, const Vec&, const ParamSet&) { return x[1]; };
  apex.reset = [](double, const Vec& x, const Vec&, const ParamSet&) { return x; };
  apex.analytic.guard_dx = [](double, const Vec&, const Vec&, const ParamSet&) {
    RowVec dg(2);
    dg << 0.0, 1.0;
    return dg;
  };
  apex.analytic.guard_dt = [](double, const Vec&, const Vec&, const ParamSet&) { return 0.0; };
  apex.analytic.reset_dx = [](double, const Vec&, const Vec&, const ParamSet&) {
    return Mat(Mat::Identity(2, 2));
  };
  apex.analytic.reset_dt = [](double, const Vec&, const Vec&, const ParamSet&) {
    return Vec(Vec::Zero(2));
  };
  model.apex_transition = model.system.add_transition(std::move(apex));

  model.system.autonomous = false;  // the paddle motion is clocked
  require_valid(model.system);

  Vec x0(2);
  x0 << params.impact_position + h, 0.0;
  model.orbit = close_orbit(model.system, model.policy, model.system.default_params,
                            model.apex_transition, x0, 3.0 * period);
  return model;
}

Interval paddle_stable_interval(double restitution, double gravity) {
  if (!(restitution > 0.0 && restitution <= 1.0))
    throw std::invalid_argument("restitution must be in (0, 1]");
  const double a = restitution;
  return {-2.0 * gravity * (1.0 + a * a) / ((1.0 + a) * (1.0 + a)), 0.0};
}

}  // namespace saltopt::models
