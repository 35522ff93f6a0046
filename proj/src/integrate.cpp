#include "saltopt/integrate.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "saltopt/errors.hpp"

namespace saltopt {

namespace {

// Dormand-Prince 5(4) tableau.
constexpr double kC2 = 1.0 / 5, kC3 = 3.0 / 10, kC4 = 4.0 / 5, kC5 = 8.0 / 9;
constexpr double kA21 = 1.0 / 5;
constexpr double kA31 = 3.0 / 40, kA32 = 9.0 / 40;
constexpr double kA41 = 44.0 / 45, kA42 = -56.0 / 15, kA43 = 32.0 / 9;
constexpr double kA51 = 19372.0 / 6561, kA52 = -25360.0 / 2187, kA53 = 64448.0 / 6561,
                 kA54 = -212.0 / 729;
constexpr double kA61 = 9017.0 / 3168, kA62 = -355.0 / 33, kA63 = 46732.0 / 5247,
                 kA64 = 49.0 / 176, kA65 = -5103.0 / 18656;
constexpr double kA71 = 35.0 / 384, kA73 = 500.0 / 1113, kA74 = 125.0 / 192,
                 kA75 = -2187.0 / 6784, kA76 = 11.0 / 84;
// y_err = y5 - y4
constexpr double kE1 = 71.0 / 57600, kE3 = -71.0 / 16695, kE4 = 71.0 / 1920,
                 kE5 = -17253.0 / 339200, kE6 = 22.0 / 525, kE7 = -1.0 / 40;
// dense-output weights
constexpr double kD1 = -12715105075.0 / 11282082432.0;
constexpr double kD3 = 87487479700.0 / 32700410799.0;
constexpr double kD4 = -10690763975.0 / 1880347072.0;
constexpr double kD5 = 701980252875.0 / 199316789632.0;
constexpr double kD6 = -1453857185.0 / 822651844.0;
constexpr double kD7 = 69997945.0 / 29380423.0;

constexpr double kSafety = 0.9;
constexpr double kMinFactor = 0.2;
constexpr double kMaxFactor = 5.0;

}  // namespace

Rk45::Rk45(OdeRhs rhs, double t0, Vec x0, IntegrateOptions opts)
    : rhs_(std::move(rhs)), opts_(opts), t_(t0), x_(std::move(x0)) {
  k1_ = rhs_(t_, x_);
  if (!k1_.allFinite() || !x_.allFinite())
    throw SimulationError(SimError::NonFiniteState, "non-finite state or derivative at t0");
}

double Rk45::error_norm(const Vec& x_new, const Vec& err) const {
  double acc = 0.0;
  const auto n = x_.size();
  for (Eigen::Index i = 0; i < n; ++i) {
    const double scale =
        opts_.abs_tol + opts_.rel_tol * std::max(std::abs(x_[i]), std::abs(x_new[i]));
    const double r = err[i] / scale;
    acc += r * r;
  }
  return std::sqrt(acc / static_cast<double>(n));
}

double Rk45::initial_step(double t_end) const {
  // Hairer's startup heuristic, trimmed.
  const double span = std::abs(t_end - t_);
  const double d0 = x_.norm();
  const double d1 = k1_.norm();
  double h = (d0 > 1e-5 && d1 > 1e-5) ? 0.01 * d0 / d1 : 1e-6;
  h = std::min(h, span);
  Vec x1 = x_ + h * k1_;
  Vec f1 = rhs_(t_ + h, x1);
  const double d2 = (f1 - k1_).norm() / h;
  double h1;
  if (std::max(d1, d2) <= 1e-15)
    h1 = std::max(1e-6, h * 1e-3);
  else
    h1 = std::pow(0.01 / std::max(d1, d2), 0.2);
  return std::min({100 * h, h1, span});
}

StepOutcome Rk45::step(double t_end, DenseStep& dense) {
  if (t_ >= t_end) return StepOutcome::ReachedEnd;
  if (h_ == 0.0) h_ = initial_step(t_end);
  if (opts_.h_max > 0.0) h_ = std::min(h_, opts_.h_max);

  const auto n = x_.size();
  Vec k2(n), k3(n), k4(n), k5(n), k6(n), k7(n), x_new(n), err(n);

  while (true) {
    if (++n_total_ > opts_.max_steps)
      throw SimulationError(SimError::StepLimit, "integrator exceeded max step count");
    bool last = false;
    if (t_ + h_ >= t_end) {
      h_ = t_end - t_;
      last = true;
    }
    if (h_ <= std::abs(t_) * 1e-15 || h_ < 1e-300)
      throw SimulationError(SimError::StepUnderflow, "step size underflow at t=" + std::to_string(t_));

    const double h = h_;
    k2 = rhs_(t_ + kC2 * h, x_ + h * (kA21 * k1_));
    k3 = rhs_(t_ + kC3 * h, x_ + h * (kA31 * k1_ + kA32 * k2));
    k4 = rhs_(t_ + kC4 * h, x_ + h * (kA41 * k1_ + kA42 * k2 + kA43 * k3));
    k5 = rhs_(t_ + kC5 * h, x_ + h * (kA51 * k1_ + kA52 * k2 + kA53 * k3 + kA54 * k4));
    k6 = rhs_(t_ + h, x_ + h * (kA61 * k1_ + kA62 * k2 + kA63 * k3 + kA64 * k4 + kA65 * k5));
    x_new = x_ + h * (kA71 * k1_ + kA73 * k3 + kA74 * k4 + kA75 * k5 + kA76 * k6);
    k7 = rhs_(t_ + h, x_new);
    err = h * (kE1 * k1_ + kE3 * k3 + kE4 * k4 + kE5 * k5 + kE6 * k6 + kE7 * k7);

    if (!x_new.allFinite())
      throw SimulationError(SimError::NonFiniteState, "non-finite state at t=" + std::to_string(t_ + h));

    const double enorm = error_norm(x_new, err);
    if (enorm <= 1.0) {
      dense.t0 = t_;
      dense.h = h;
      dense.c1 = x_;
      dense.c2 = x_new - x_;
      dense.c3 = h * k1_ - dense.c2;
      dense.c4 = dense.c2 - h * k7 - dense.c3;
      dense.c5 = h * (kD1 * k1_ + kD3 * k3 + kD4 * k4 + kD5 * k5 + kD6 * k6 + kD7 * k7);

      t_ += h;
      x_ = x_new;
      k1_ = k7;  // FSAL
      ++n_accepted_;

      double factor = last ? kMaxFactor
                           : std::clamp(kSafety * std::pow(std::max(enorm, 1e-16), -0.2),
                                        kMinFactor, kMaxFactor);
      h_ = h * factor;
      return StepOutcome::Advanced;
    }
    h_ = h * std::clamp(kSafety * std::pow(enorm, -0.2), kMinFactor, 1.0);
  }
}

Vec OdeSolution::at(double t) const {
  if (dense.empty()) throw std::logic_error("OdeSolution::at requires dense output");
  // Binary search for the covering step.
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

OdeSolution integrate(const OdeRhs& rhs, double t0, const Vec& x0, double t1,
                      const IntegrateOptions& opts) {
  OdeSolution sol;
  sol.times.push_back(t0);
  sol.states.push_back(x0);
  Rk45 stepper(rhs, t0, x0, opts);
  DenseStep dense;
  while (stepper.step(t1, dense) == StepOutcome::Advanced) {
    sol.times.push_back(stepper.t());
    sol.states.push_back(stepper.x());
    if (opts.store_dense) sol.dense.push_back(dense);
  }
  return sol;
}

double brent_root(const std::function<double(double)>& f, double a, double b, double fa,
                  double fb, double xtol, double ftol) {
  if (fa == 0.0) return a;
  if (fb == 0.0) return b;
  if (fa * fb > 0.0) throw std::invalid_argument("brent_root: endpoints do not bracket a root");

  double c = a, fc = fa;
  double d = b - a, e = d;
  for (int iter = 0; iter < 200; ++iter) {
    if (std::abs(fc) < std::abs(fb)) {
      a = b; b = c; c = a;
      fa = fb; fb = fc; fc = fa;
    }
    const double tol1 = 2.0 * std::numeric_limits<double>::epsilon() * std::abs(b) + 0.5 * xtol;
    const double xm = 0.5 * (c - b);
    if (std::abs(xm) <= tol1 || std::abs(fb) <= ftol) return b;
    if (std::abs(e) >= tol1 && std::abs(fa) > std::abs(fb)) {
      // inverse quadratic / secant
      double p, q;
      const double s = fb / fa;
      if (a == c) {
        p = 2.0 * xm * s;
        q = 1.0 - s;
      } else {
        const double q0 = fa / fc, r = fb / fc;
        p = s * (2.0 * xm * q0 * (q0 - r) - (b - a) * (r - 1.0));
        q = (q0 - 1.0) * (r - 1.0) * (s - 1.0);
      }
      if (p > 0.0) q = -q;
      p = std::abs(p);
      if (2.0 * p < std::min(3.0 * xm * q - std::abs(tol1 * q), std::abs(e * q))) {
        e = d;
        d = p / q;
      } else {
        d = xm;
        e = d;
      }
    } else {
      d = xm;
      e = d;
    }
    a = b;
    fa = fb;
    b += (std::abs(d) > tol1) ? d : (xm > 0 ? tol1 : -tol1);
    fb = f(b);
    if ((fb > 0) == (fc > 0)) {
      c = a;
      fc = fa;
      d = b - a;
      e = d;
    }
  }
  return b;
}

}  // namespace saltopt
