#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "saltopt/integrate.hpp"

using namespace saltopt;

namespace {

Vec vec2(double a, double b) {
  Vec v(2);
  v << a, b;
  return v;
}

}  // namespace

TEST_CASE("harmonic oscillator matches the closed-form solution") {
  OdeRhs rhs = [](double, const Vec& x) { return vec2(x[1], -x[0]); };
  auto sol = integrate(rhs, 0.0, vec2(1.0, 0.0), 10.0);
  const Vec& xf = sol.states.back();
  CHECK(xf[0] == doctest::Approx(std::cos(10.0)).epsilon(1e-9));
  CHECK(xf[1] == doctest::Approx(-std::sin(10.0)).epsilon(1e-9));
}

TEST_CASE("dense output interpolates between accepted steps") {
  OdeRhs rhs = [](double, const Vec& x) { return vec2(x[1], -x[0]); };
  auto sol = integrate(rhs, 0.0, vec2(1.0, 0.0), 6.0);
  for (double t : {0.3, 1.7, 2.9, 4.4, 5.95}) {
    Vec x = sol.at(t);
    CHECK(x[0] == doctest::Approx(std::cos(t)).epsilon(1e-8));
    CHECK(x[1] == doctest::Approx(-std::sin(t)).epsilon(1e-8));
  }
}

TEST_CASE("stiff-ish decay stays finite and accurate") {
  OdeRhs rhs = [](double, const Vec& x) {
    Vec dx(1);
    dx << -50.0 * x[0];
    return dx;
  };
  Vec x0(1);
  x0 << 1.0;
  auto sol = integrate(rhs, 0.0, x0, 1.0);
  CHECK(sol.states.back()[0] == doctest::Approx(std::exp(-50.0)).epsilon(1e-6));
}

TEST_CASE("tolerance controls the error") {
  OdeRhs rhs = [](double t, const Vec&) {
    Vec dx(1);
    dx << std::exp(t);  // no state feedback: pure quadrature
    return dx;
  };
  Vec x0 = Vec::Zero(1);
  IntegrateOptions loose;
  loose.rel_tol = 1e-5;
  loose.abs_tol = 1e-7;
  IntegrateOptions tight;
  auto sl = integrate(rhs, 0.0, x0, 3.0, loose);
  auto st = integrate(rhs, 0.0, x0, 3.0, tight);
  const double exact = std::exp(3.0) - 1.0;
  CHECK(std::abs(st.states.back()[0] - exact) < std::abs(sl.states.back()[0] - exact) + 1e-12);
  CHECK(st.states.back()[0] == doctest::Approx(exact).epsilon(1e-11));
}

TEST_CASE("non-finite right-hand side is reported") {
  OdeRhs rhs = [](double t, const Vec& x) {
    Vec dx(1);
    dx << (t > 0.5 ? std::numeric_limits<double>::quiet_NaN() : x[0]);
    return dx;
  };
  Vec x0(1);
  x0 << 1.0;
  CHECK_THROWS(integrate(rhs, 0.0, x0, 1.0));
}

TEST_CASE("brent root finds an analytic root to tight tolerance") {
  auto f = [](double t) { return std::cos(t) - 0.25; };
  const double root = std::acos(0.25);
  double found = brent_root(f, 0.0, 3.0, f(0.0), f(3.0), 1e-14, 0.0);
  CHECK(found == doctest::Approx(root).epsilon(1e-12));
}
