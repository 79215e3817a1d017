#include <cmath>
#include <numbers>

#include "doctest.h"
#include "polarred/errors.hpp"
#include "polarred/flows.hpp"
#include "support.hpp"

using namespace polarred;
using polarred::testing::Rng;

namespace {

const double tau = 2 * std::numbers::pi;

std::vector<std::vector<Expr>> exprs(const std::vector<std::vector<std::string>>& m) {
  std::vector<std::vector<Expr>> out;
  for (const auto& row : m) {
    out.emplace_back();
    for (const auto& s : row) out.back().push_back(parse(s));
  }
  return out;
}

ChartPtr r3_chart() {
  return std::make_shared<const Chart>(std::vector<Chart::Axis>{{"x", {}, -2, 2}, {"y", {}, -2, 2}, {"z", {}, -2, 2}});
}

ChartPtr torus_chart() {
  return std::make_shared<const Chart>(std::vector<Chart::Axis>{{"t1", tau}, {"t2", tau}, {"p1", tau}, {"p2", tau}});
}

PoissonStructure r3_poisson(ChartPtr c) {
  return PoissonStructure::given(c, exprs({{"0", "1", "0"}, {"-1", "0", "1"}, {"0", "-1", "0"}}));
}

PoissonStructure torus_poisson(ChartPtr c) {
  return PoissonStructure::from_symplectic(
      c, exprs({{"0", "1", "0", "0"}, {"-1", "0", "0", "0"}, {"0", "0", "0", "sqrt(2)"}, {"0", "0", "-sqrt(2)", "0"}}));
}

// Nonlinear but bounded dynamics on R^3.
PoissonStructure so3_poisson(ChartPtr c) {
  return PoissonStructure::given(c, exprs({{"0", "z", "-y"}, {"-z", "0", "x"}, {"y", "-x", "0"}}));
}

}  // namespace

TEST_CASE("zero field leaves the seed fixed") {
  const ChartPtr c = r3_chart();
  const Point seed(c, Eigen::Vector3d(0.3, -0.1, 1.2));
  for (const Method m : {Method::AdaptiveRK45, Method::FixedRK4}) {
    FlowSpec spec{VectorField::zero(c), 3.0, {}};
    spec.options.method = m;
    const Trajectory t = integrate(spec, seed);
    CHECK(t.times.front() == 0.0);
    for (std::size_t i = 1; i < t.times.size(); ++i) CHECK(t.times[i] > t.times[i - 1]);
    for (const auto& p : t.points) CHECK(p == seed.coords());
    CHECK(t.times.back() == 3.0);
  }
}

TEST_CASE("constant Hamiltonian field on R^3 is a straight line") {
  const ChartPtr c = r3_chart();
  const PoissonStructure B = r3_poisson(c);
  const Point origin(c, Eigen::Vector3d::Zero());
  const Trajectory t = integrate({hamiltonian_vf(B, make_field("y", *c)), 1.0, {}}, origin);
  CHECK((t.endpoint().coords() - Eigen::Vector3d(1, 0, -1)).norm() < 1e-10);

  const VectorField Xy = hamiltonian_vf(B, make_field("y", *c));
  const VectorField Xz = hamiltonian_vf(B, make_field("z", *c));
  const Point p = compose_flows({{Xy, 1.0}, {Xz, 1.0}}, origin);
  CHECK((p.coords() - Eigen::Vector3d(1, 1, -1)).norm() < 1e-10);

  // single segment equals integrate
  CHECK(compose_flows({{Xy, 1.0}}, origin).coords() == t.endpoint().coords());
}

TEST_CASE("torus flow of sin(t1 - p1) moves along (0,1,0,-1/sqrt2)") {
  const ChartPtr c = torus_chart();
  const PoissonStructure B = torus_poisson(c);
  const VectorField X = hamiltonian_vf(B, make_field("sin(t1-p1)", *c));
  const Point zero(c, Eigen::Vector4d::Zero());
  const double T = 7.5;
  const Trajectory t = integrate({X, T, {}}, zero);
  Eigen::Vector4d expected(0, T, 0, -T / std::sqrt(2.0));
  CHECK((t.cover_endpoint() - expected).norm() < 1e-9);
  Eigen::VectorXd wrapped = expected;
  c->canonicalize(wrapped);
  CHECK(t.endpoint().distance_to(Point(c, wrapped)) < 1e-9);
  for (const auto& p : t.points)
    for (Eigen::Index i = 0; i < 4; ++i) CHECK((p[i] >= 0.0 && p[i] < tau));

  // fixed RK4 against ten times smaller steps, away from the constant-field case
  const Point m(c, Eigen::Vector4d(0.4, 1.0, -0.3, 2.0));
  const VectorField Y = hamiltonian_vf(B, make_field("sin(t1 - p1)*cos(t2) + cos(p2)", *c));
  FlowOptions coarse;
  coarse.method = Method::FixedRK4;
  coarse.step = 1e-2;
  FlowOptions fine = coarse;
  fine.step = 1e-3;
  const Point a = integrate({Y, 2.0, coarse}, m).endpoint();
  const Point b = integrate({Y, 2.0, fine}, m).endpoint();
  CHECK(a.distance_to(b) < 1e-8);
}

TEST_CASE("energy and Casimir conservation") {
  Rng rng(11);
  const ChartPtr c = r3_chart();
  const std::vector<std::string> vars = {"x", "y", "z"};
  for (const auto& B : {r3_poisson(c), so3_poisson(c)}) {
    for (int trial = 0; trial < 6; ++trial) {
      const std::string src = testing::random_smooth_expr(rng, vars, 3);
      const ScalarField H = make_field(src, *c);
      const Point seed(c, Eigen::Vector3d(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)));
      const Trajectory t = integrate({hamiltonian_vf(B, H), 10.0, {}}, seed);
      const std::vector<ScalarField> monitors = {H, make_field("x + z", *c), make_field("x^2 + y^2 + z^2", *c)};
      const auto drift = monitor_conservation(t, monitors);
      CAPTURE(src);
      CHECK(drift[0] < 1e-8);
      if (B.entries()[0][1] == parse("1"))
        CHECK(drift[1] < 1e-8);
      else
        CHECK(drift[2] < 1e-8);
    }
  }
}

TEST_CASE("forward then backward returns to the seed") {
  Rng rng(12);
  const ChartPtr c = torus_chart();
  const PoissonStructure B = torus_poisson(c);
  const VectorField X = hamiltonian_vf(B, make_field("sin(t1 - p1)*cos(t2) + sin(p2)*cos(t1)", *c));
  for (int k = 0; k < 5; ++k) {
    const Point seed(c, Eigen::Vector4d(rng.uniform(0, tau), rng.uniform(0, tau), rng.uniform(0, tau), rng.uniform(0, tau)));
    const double d = rng.uniform(-5, 5);
    const ComposedFlow back = compose_flows_tracked({{X, d}, {X, -d}}, seed, seed.coords());
    CHECK(back.endpoint.distance_to(seed) < 1e-8);
    CHECK((back.cover - seed.coords()).norm() < 1e-8);
  }
}

TEST_CASE("tolerance refinement converges") {
  const ChartPtr c = r3_chart();
  const VectorField X = hamiltonian_vf(so3_poisson(c), make_field("x^2/2 + y^2 + z^2*1.5", *c));
  const Point seed(c, Eigen::Vector3d(0.9, 0.2, -0.4));
  for (const double tol : {1e-6, 1e-8}) {
    FlowOptions a;
    a.atol = a.rtol = tol;
    FlowOptions b = a;
    b.atol = b.rtol = tol / 16;
    const double diff = integrate({X, 5.0, a}, seed).endpoint().distance_to(integrate({X, 5.0, b}, seed).endpoint());
    CAPTURE(tol);
    CHECK(diff <= 50 * tol);
  }
}

TEST_CASE("corrupted tensor: x+z drifts linearly under X_y") {
  // B = [[0,-y,0],[y,0,1],[0,-1,0]] gives X_y = (-y, 0, -1), so
  // d/dt (x + z) = -(1 + y0).
  const ChartPtr c = r3_chart();
  const PoissonStructure bad = PoissonStructure::given(c, exprs({{"0", "-y", "0"}, {"y", "0", "1"}, {"0", "-1", "0"}}));
  const Point seed(c, Eigen::Vector3d(0, 0.5, 0));
  const Trajectory t = integrate({hamiltonian_vf(bad, make_field("y", *c)), 2.0, {}}, seed);
  const ScalarField cas = make_field("x + z", *c);
  for (std::size_t i = 0; i < t.points.size(); ++i) {
    const double v = cas(std::span<const double>(t.points[i].data(), 3));
    CHECK(v == doctest::Approx(-1.5 * t.times[i]).epsilon(1e-9));
  }
  CHECK(monitor_conservation(t, {cas})[0] == doctest::Approx(3.0));
}

TEST_CASE("integration errors") {
  const ChartPtr c = r3_chart();
  const Point seed(c, Eigen::Vector3d(0.5, 0, 0));
  // blow-up in finite time: x' = x^2 from 0.5 has a pole at t = 2
  const VectorField blow = VectorField::from_components(
      c, {make_field("x^2", *c), make_field("0", *c), make_field("0", *c)});
  CHECK_THROWS_AS(integrate({blow, 3.0, {}}, seed), NumericalAbort);
  FlowOptions few;
  few.max_steps = 3;
  CHECK_THROWS_AS(integrate({hamiltonian_vf(so3_poisson(c), make_field("x*y", *c)), 10.0, few}, seed), IntegrationError);
  const VectorField bad = VectorField::from_components(
      c, {make_field("log(x)", *c), make_field("0", *c), make_field("0", *c)});
  CHECK_THROWS_AS(integrate({bad, 1.0, {}}, Point(c, Eigen::Vector3d(-1, 0, 0))), DomainError);
}

TEST_CASE("trajectory CSV") {
  const ChartPtr c = r3_chart();
  FlowOptions opt;
  opt.method = Method::FixedRK4;
  opt.step = 0.5;
  const Trajectory t =
      integrate({hamiltonian_vf(r3_poisson(c), make_field("y", *c)), 1.0, opt}, Point(c, Eigen::Vector3d::Zero()));
  CHECK(trajectory_csv(t) == "t,x,y,z\n0,0,0,0\n0.5,0.5,0,-0.5\n1,1,0,-1\n");
}
