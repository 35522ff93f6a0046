#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "saltopt/models/paddle.hpp"
#include "saltopt/system.hpp"
#include "test_helpers.hpp"

using namespace saltopt;
using testutil::vec2;

namespace {

HybridSystem two_mode_skeleton() {
  HybridSystem sys;
  FieldFn f = [](double, const Vec& x, const Vec&) { return Vec(Vec::Zero(x.size())); };
  sys.add_mode({"a", 2, 0, f});
  sys.add_mode({"b", 2, 0, f});
  return sys;
}

Transition identity_transition(const std::string& name, int src, int dst, int dim) {
  Transition tr;
  tr.name = name;
  tr.source = src;
  tr.target = dst;
  tr.guard = [](double, const Vec& x, const Vec&, const ParamSet&) { return x[0]; };
  tr.reset = [dim](double, const Vec& x, const Vec&, const ParamSet&) {
    return Vec(x.head(dim));
  };
  return tr;
}

}  // namespace

TEST_CASE("a well-formed two-mode definition validates") {
  auto model = models::make_paddle();
  CHECK(validate_system(model.system).empty());
}

TEST_CASE("transition to a missing mode is reported") {
  auto sys = two_mode_skeleton();
  sys.add_transition(identity_transition("bad", 1, 3, 2));
  auto errors = validate_system(sys);
  REQUIRE(errors.size() == 1);
  CHECK(errors[0].find("unknown target mode 3") != std::string::npos);
}

TEST_CASE("reset emitting the wrong dimension is reported") {
  auto sys = two_mode_skeleton();
  // target mode expects 2 components, reset emits 1
  sys.add_transition(identity_transition("narrow", 0, 1, 1));
  auto errors = validate_system(sys);
  REQUIRE(errors.size() == 1);
  CHECK(errors[0].find("emits 1 components") != std::string::npos);
}

TEST_CASE("duplicate shape-parameter ownership is reported") {
  auto sys = two_mode_skeleton();
  sys.default_params.add("knob", 0.0);
  auto t1 = identity_transition("t1", 0, 1, 2);
  t1.shape_params = {"knob"};
  auto t2 = identity_transition("t2", 1, 0, 2);
  t2.shape_params = {"knob"};
  sys.add_transition(std::move(t1));
  sys.add_transition(std::move(t2));
  auto errors = validate_system(sys);
  REQUIRE(errors.size() == 1);
  CHECK(errors[0].find("owned by both") != std::string::npos);
}

TEST_CASE("undeclared shape parameter is reported") {
  auto sys = two_mode_skeleton();
  auto t1 = identity_transition("t1", 0, 1, 2);
  t1.shape_params = {"ghost"};
  sys.add_transition(std::move(t1));
  auto errors = validate_system(sys);
  REQUIRE(errors.size() == 1);
  CHECK(errors[0].find("not declared") != std::string::npos);
}

TEST_CASE("require_valid throws with all errors listed") {
  auto sys = two_mode_skeleton();
  sys.add_transition(identity_transition("bad", 1, 3, 2));
  CHECK_THROWS_AS(require_valid(sys), std::invalid_argument);
}
