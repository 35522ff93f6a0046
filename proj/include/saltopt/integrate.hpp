#ifndef SALTOPT_INTEGRATE_HPP
#define SALTOPT_INTEGRATE_HPP

#include <functional>
#include <vector>

#include "saltopt/types.hpp"

namespace saltopt {

using OdeRhs = std::function<Vec(double, const Vec&)>;

/// Quartic dense-output interpolant over one accepted step [t0, t0+h].
struct DenseStep {
  double t0 = 0.0;
  double h = 0.0;
  Vec c1, c2, c3, c4, c5;

  Vec eval(double t) const {
    const double theta = (t - t0) / h;
    const double omt = 1.0 - theta;
    return c1 + theta * (c2 + omt * (c3 + theta * (c4 + omt * c5)));
  }
};

struct IntegrateOptions {
  double rel_tol = 1e-10;
  double abs_tol = 1e-12;
  double h_max = 0.0;  // 0 = no cap
  long max_steps = 20'000'000;
  bool store_dense = true;
};

enum class StepOutcome { Advanced, ReachedEnd };

/// Dormand-Prince 5(4) stepper with FSAL and dense output.
class Rk45 {
 public:
  Rk45(OdeRhs rhs, double t0, Vec x0, IntegrateOptions opts = {});

  /// Advances by one accepted step, not beyond t_end. Fills `dense` for the
  /// accepted interval.
  StepOutcome step(double t_end, DenseStep& dense);

  double t() const { return t_; }
  const Vec& x() const { return x_; }
  const Vec& f() const { return k1_; }  // rhs at the current point
  long accepted_steps() const { return n_accepted_; }

 private:
  double initial_step(double t_end) const;
  double error_norm(const Vec& x_new, const Vec& err) const;

  OdeRhs rhs_;
  IntegrateOptions opts_;
  double t_;
  Vec x_;
  Vec k1_;  // FSAL stage
  double h_ = 0.0;
  long n_accepted_ = 0;
  long n_total_ = 0;
};

/// Fixed sample of an ODE solution on [t0, t1].
struct OdeSolution {
  std::vector<double> times;
  std::vector<Vec> states;
  std::vector<DenseStep> dense;  // one per accepted step, in order

  Vec at(double t) const;  // dense-output evaluation (t within the span)
};

/// Integrates x' = rhs(t, x) from (t0, x0) to t1.
OdeSolution integrate(const OdeRhs& rhs, double t0, const Vec& x0, double t1,
                      const IntegrateOptions& opts = {});

/// Brent root refinement of a scalar function on a bracketing interval.
/// Requires f(a) and f(b) of opposite sign (or one of them zero).
double brent_root(const std::function<double(double)>& f, double a, double b,
                  double fa, double fb, double xtol, double ftol);

}  // namespace saltopt

#endif
