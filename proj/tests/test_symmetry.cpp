#include <cmath>
#include <numbers>

#include "doctest.h"
#include "polarred/errors.hpp"
#include "polarred/symmetry.hpp"

using namespace polarred;

namespace {

const double tau = 2 * std::numbers::pi;

std::vector<Expr> row(const std::vector<std::string>& r) {
  std::vector<Expr> out;
  for (const auto& s : r) out.push_back(parse(s));
  return out;
}

std::vector<std::vector<Expr>> exprs(const std::vector<std::vector<std::string>>& m) {
  std::vector<std::vector<Expr>> out;
  for (const auto& r : m) out.push_back(row(r));
  return out;
}

ChartPtr r3_chart() {
  return std::make_shared<const Chart>(std::vector<Chart::Axis>{{"x", {}, -2, 2}, {"y", {}, -2, 2}, {"z", {}, -2, 2}});
}

ChartPtr torus_chart() {
  return std::make_shared<const Chart>(std::vector<Chart::Axis>{{"t1", tau}, {"t2", tau}, {"p1", tau}, {"p2", tau}});
}

GroupAction translation(ChartPtr c) { return GroupAction(c, exprs({{"1", "0", "0"}}), row({"x + a1", "y", "z"}), true); }

GroupAction circle(ChartPtr c) {
  return GroupAction(c, exprs({{"1", "0", "1", "0"}}), row({"t1 + a1", "t2", "p1 + a1", "p2"}), true);
}

GroupAction torus(ChartPtr c) {
  return GroupAction(c, exprs({{"1", "0", "1", "0"}, {"0", "1", "0", "1"}}),
                     row({"t1 + a1", "t2 + a2", "p1 + a1", "p2 + a2"}), true);
}

PoissonStructure torus_poisson(ChartPtr c) {
  return PoissonStructure::from_symplectic(
      c, exprs({{"0", "1", "0", "0"}, {"-1", "0", "0", "0"}, {"0", "0", "0", "sqrt(2)"}, {"0", "0", "-sqrt(2)", "0"}}));
}

}  // namespace

TEST_CASE("act evaluates the finite maps") {
  const ChartPtr c = r3_chart();
  const GroupAction g = translation(c);
  CHECK(act(g, Eigen::VectorXd::Constant(1, 2.0), Point(c, Eigen::Vector3d(1, 1, 1))).coords() == Eigen::Vector3d(3, 1, 1));
  const Point m(c, Eigen::Vector3d(0.5, -1, 2));
  CHECK(act(g, Eigen::VectorXd::Zero(1), m).coords() == m.coords());

  const ChartPtr t = torus_chart();
  const Point q(t, Eigen::Vector4d(6.0, 1.0, 0.5, 2.0));
  const Point r = act(circle(t), Eigen::VectorXd::Constant(1, 1.0), q);
  CHECK(r[0] == doctest::Approx(7.0 - tau));
  CHECK(r[1] == 1.0);
  CHECK(r[2] == 1.5);
  CHECK(r[3] == 2.0);
}

TEST_CASE("action validation") {
  const ChartPtr c = r3_chart();
  CHECK_THROWS_AS(GroupAction(c, exprs({{"1", "0"}}), row({"x + a1", "y", "z"}), true), InputError);
  CHECK_THROWS_AS(GroupAction(c, exprs({{"1", "0", "0"}}), row({"x + a1", "y"}), true), InputError);
  CHECK_THROWS_AS(GroupAction(c, exprs({{"1", "0", "0"}}), row({"x + a2", "y", "z"}), true), UnknownIdentifier);
  CHECK_THROWS_AS(GroupAction(c, exprs({{"q", "0", "0"}}), row({"x + a1", "y", "z"}), true), UnknownIdentifier);
  const auto clash = std::make_shared<const Chart>(std::vector<Chart::Axis>{{"a1"}});
  CHECK_THROWS_AS(GroupAction(clash, exprs({{"1"}}), row({"a1 + a1"}), true), InputError);
  CHECK(GroupAction::trivial(c).dim() == 0);
}

TEST_CASE("Halton plan") {
  CHECK(radical_inverse(1, 2) == 0.5);
  CHECK(radical_inverse(3, 2) == 0.75);
  CHECK(radical_inverse(5, 3) == doctest::Approx(2.0 / 3 + 1.0 / 9));
  const SamplingPlan plan = SamplingPlan::halton(torus_chart(), 2);
  CHECK(plan.points.size() == 256);
  CHECK(plan.params.size() == 16);
  for (const auto& p : plan.params)
    for (Eigen::Index i = 0; i < 2; ++i) CHECK(std::abs(p[i]) <= std::numbers::pi);
  for (const auto& m : plan.points)
    for (std::size_t i = 0; i < 4; ++i) CHECK((m[i] >= 0 && m[i] < tau));
  const SamplingPlan r = SamplingPlan::halton(r3_chart(), 1);
  for (const auto& m : r.points) CHECK(m.coords().cwiseAbs().maxCoeff() <= 2.0);
}

TEST_CASE("invariance checks") {
  const ChartPtr c = r3_chart();
  const GroupAction g = translation(c);
  const SamplingPlan plan = SamplingPlan::halton(c, 1);
  // x+z shifts by exactly lambda, so the violation is the largest |lambda| in the plan
  double max_lambda = 0;
  for (const auto& p : plan.params) max_lambda = std::max(max_lambda, std::abs(p[0]));
  CHECK(check_invariance(make_field("x + z", *c), g, plan) == doctest::Approx(max_lambda));
  CHECK(check_invariance(make_field("y", *c), g, plan) == 0.0);
  CHECK(check_invariance(make_field("sin(z)*y^2", *c), g, plan) == 0.0);
  CHECK(check_invariance(make_field("4.5", *c), g, plan) == 0.0);

  const ChartPtr t = torus_chart();
  const SamplingPlan tp = SamplingPlan::halton(t, 1);
  const InvariantFamily fam(row({"sin(t1 - p1)", "cos(t1 - p1)", "sin(t2)", "cos(t2)", "sin(p2)", "cos(p2)"}), *t);
  for (const auto& f : fam.fields) CHECK(check_invariance(f, circle(t), tp) < 1e-12);
  CHECK(check_invariance(make_field("sin(t1)", *t), circle(t), tp) > 0.5);

  const SamplingPlan tp2 = SamplingPlan::halton(t, 2);
  for (const char* s : {"sin(t1 - p1)", "cos(t1 - p1)", "sin(t2 - p2)", "cos(t2 - p2)"})
    CHECK(check_invariance(make_field(s, *t), torus(t), tp2) < 1e-12);
  CHECK(check_invariance(make_field("sin(t2)", *t), torus(t), tp2) > 0.5);
}

TEST_CASE("canonicity checks") {
  const ChartPtr c = r3_chart();
  const PoissonStructure B = PoissonStructure::given(c, exprs({{"0", "1", "0"}, {"-1", "0", "1"}, {"0", "-1", "0"}}));
  CHECK(check_canonical(translation(c), B, SamplingPlan::halton(c, 1)) < 1e-12);

  const ChartPtr t = torus_chart();
  CHECK(check_canonical(circle(t), torus_poisson(t), SamplingPlan::halton(t, 1)) < 1e-12);
  CHECK(check_canonical(torus(t), torus_poisson(t), SamplingPlan::halton(t, 2)) < 1e-12);

  // (x,y,z) -> (x e^a, y, z): D Phi B D Phi^T has (1,2) entry e^a against 1.
  const GroupAction scale(c, exprs({{"x", "0", "0"}}), row({"x*exp(a1)", "y", "z"}), true);
  const SamplingPlan plan = SamplingPlan::halton(c, 1);
  double expected = 0;
  for (const auto& p : plan.params) expected = std::max(expected, std::abs(std::exp(p[0]) - 1));
  CHECK(check_canonical(scale, B, plan) == doctest::Approx(expected));
  CHECK(check_canonical(scale, B, plan) > 0.1);
  CHECK(self_check(scale, plan).ok());
}

TEST_CASE("action self checks") {
  const ChartPtr c = r3_chart();
  const ChartPtr t = torus_chart();
  CHECK(self_check(translation(c), SamplingPlan::halton(c, 1)).ok());
  CHECK(self_check(circle(t), SamplingPlan::halton(t, 1)).ok());
  const ActionSelfCheck tt = self_check(torus(t), SamplingPlan::halton(t, 2));
  CHECK(tt.ok());
  CHECK(tt.composition < 1e-9);

  // a generator inconsistent with the map is caught
  const GroupAction wrong(c, exprs({{"2", "0", "0"}}), row({"x + a1", "y", "z"}), true);
  CHECK(self_check(wrong, SamplingPlan::halton(c, 1)).generators == doctest::Approx(1.0));
  // a map that is not the identity at zero
  const GroupAction shifted(c, exprs({{"1", "0", "0"}}), row({"x + a1 + 0.1", "y", "z"}), true);
  CHECK(self_check(shifted, SamplingPlan::halton(c, 1)).identity == doctest::Approx(0.1));
}
