#include <cmath>
#include <cstring>
#include <numbers>

#include "doctest.h"
#include "polarred/expr.hpp"
#include "support.hpp"

using namespace polarred;
using polarred::testing::Rng;

namespace {
double eval_at(std::string_view src, std::vector<std::string> vars, std::vector<double> x) {
  return ScalarField(parse(src), std::move(vars))(x);
}
}  // namespace

TEST_CASE("parse builds the expected trees") {
  const Expr sum = parse("x+z");
  CHECK(sum == Expr::binary(ExprKind::Add, Expr::variable("x"), Expr::variable("z")));

  const Expr s = parse("sin(t1-p1)");
  CHECK(s == Expr::unary(ExprKind::Sin, Expr::binary(ExprKind::Sub, Expr::variable("t1"), Expr::variable("p1"))));

  // ^ binds tighter than unary minus, which binds tighter than * and /.
  CHECK(parse("-x^2") == Expr::unary(ExprKind::Neg, parse("x^2")));
  CHECK(parse("-x*y") == Expr::binary(ExprKind::Mul, parse("-x"), parse("y")));
  CHECK(parse("a-b-c") == parse("(a-b)-c"));
  CHECK(parse("a/b/c") == parse("(a/b)/c"));
  CHECK(parse("2^3^2") == parse("2^(3^2)"));
  CHECK(parse("2^-1") == Expr::binary(ExprKind::Pow, Expr::number(2), Expr::unary(ExprKind::Neg, Expr::number(1))));
}

TEST_CASE("power is right-associative") {
  // hand evaluation: 2^(3^2) = 2^9 = 512, whereas (2^3)^2 = 64
  CHECK(eval_at("2^3^2", {}, {}) == 512.0);
  CHECK(eval_at("(2^3)^2", {}, {}) == 64.0);
  CHECK(eval_at("-2^2", {}, {}) == -4.0);
}

TEST_CASE("eval examples") {
  CHECK(eval_at("x+z", {"x", "y", "z"}, {1, 5, 2}) == 3.0);
  CHECK(eval_at("sqrt(2)", {"x"}, {7}) == 1.4142135623730951);
  CHECK(eval_at("cos(t2)", {"t2"}, {0}) == 1.0);
  CHECK(eval_at("pi", {}, {}) == std::numbers::pi);
  CHECK(eval_at("atan2(1, 1)", {}, {}) == doctest::Approx(std::numbers::pi / 4));
  CHECK(eval_at("1.5e2 + .5", {}, {}) == 150.5);
}

TEST_CASE("syntax errors carry offset and expected set") {
  try {
    parse("x + * y");
    FAIL("expected a syntax error");
  } catch (const SyntaxError& e) {
    CHECK(e.offset() == 4);
    CHECK(!e.expected().empty());
  }
  CHECK_THROWS_AS(parse("(x"), SyntaxError);
  CHECK_THROWS_AS(parse("x y"), SyntaxError);
  CHECK_THROWS_AS(parse(""), SyntaxError);
  CHECK_THROWS_AS(parse("+x"), SyntaxError);
  CHECK_THROWS_AS(parse("atan2(x)"), SyntaxError);
  CHECK_THROWS_AS(parse("1e999"), SyntaxError);
  CHECK_THROWS_AS(parse("x $ y"), SyntaxError);
  try {
    parse("2*foo(x)");
    FAIL("expected unknown function");
  } catch (const UnknownFunction& e) {
    CHECK(e.name() == "foo");
    CHECK(e.offset() == 2);
  }
}

TEST_CASE("binding rejects undeclared identifiers") {
  try {
    ScalarField(parse("sin(q)"), {"x", "y"});
    FAIL("expected unknown identifier");
  } catch (const UnknownIdentifier& e) {
    CHECK(e.name() == "q");
    CHECK(e.offset() == 4);
  }
}

TEST_CASE("domain errors name the subexpression") {
  const ScalarField f(parse("1 + log(x - 1)"), {"x"});
  try {
    f(std::vector<double>{1.0});
    FAIL("expected a domain error");
  } catch (const DomainError& e) {
    CHECK(e.subexpression() == "log(x - 1)");
    CHECK(e.begin() == 4);
    CHECK(e.end() == 14);
  }
  CHECK_THROWS_AS(ScalarField(parse("1/x"), {"x"})(std::vector<double>{0.0}), DomainError);
  CHECK_THROWS_AS(ScalarField(parse("atan2(y, x)"), {"x", "y"})(std::vector<double>{0.0, 0.0}), DomainError);
  CHECK_THROWS_AS(ScalarField(parse("sqrt(x)"), {"x"})(std::vector<double>{-1.0}), DomainError);
  CHECK_THROWS_AS(ScalarField(parse("exp(x)"), {"x"})(std::vector<double>{1e6}), DomainError);
  CHECK_NOTHROW(ScalarField(parse("2^x"), {"x"}).evaluate_dual(std::vector<double>{1.0}, 1));
  CHECK_THROWS_AS(ScalarField(parse("x^y"), {"x", "y"}).evaluate_dual(std::vector<double>{-1.0, 2.0}, 2), DomainError);
  // constant exponents admit negative bases
  CHECK(ScalarField(parse("x^3"), {"x"})(std::vector<double>{-2.0}) == -8.0);
}

TEST_CASE("gradients: hand-derived examples") {
  const ScalarField lin(parse("x+z"), {"x", "y", "z"});
  const Dual<double> a = lin.evaluate_dual(std::vector<double>{0.3, -1.0, 4.0}, 3);
  CHECK(a.d[0] == 1.0);
  CHECK(a.d[1] == 0.0);
  CHECK(a.d[2] == 1.0);

  // chain rule: d sin(t1 - p1) = cos(t1 - p1) (dt1 - dp1)
  const ScalarField s(parse("sin(t1-p1)"), {"t1", "t2", "p1", "p2"});
  const Dual<double> b = s.evaluate_dual(std::vector<double>{0, 0, 0, 0}, 4);
  CHECK(b.d[0] == 1.0);
  CHECK(b.d[1] == 0.0);
  CHECK(b.d[2] == -1.0);
  CHECK(b.d[3] == 0.0);

  const ScalarField at(parse("atan2(y, x)"), {"x", "y"});
  const Dual<double> c = at.evaluate_dual(std::vector<double>{1.0, 1.0}, 2);
  CHECK(c.d[0] == doctest::Approx(-0.5));
  CHECK(c.d[1] == doctest::Approx(0.5));
}

TEST_CASE("gradients agree with central finite differences") {
  Rng rng(20240611);
  const std::vector<std::string> vars = {"a", "b", "c", "d"};
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const ScalarField f(parse(testing::random_smooth_expr(rng, vars, 3)), vars);
    Eigen::VectorXd x(4);
    for (int i = 0; i < 4; ++i) x[i] = rng.uniform(-1, 1);
    const Dual<double> ad = f.evaluate_dual(std::span<const double>(x.data(), 4), 4);
    const Eigen::VectorXd fd = testing::fd_gradient(f, x);
    for (int i = 0; i < 4; ++i) {
      const double err = std::abs(ad.d[static_cast<std::size_t>(i)] - fd[i]);
      CHECK(err <= 1e-6 * (1 + std::abs(ad.d[static_cast<std::size_t>(i)])));
      worst = std::max(worst, err);
    }
  }
  MESSAGE("worst AD/FD discrepancy: " << worst);
  CHECK(worst < 1e-6);
}

TEST_CASE("print/parse round trip is structurally stable") {
  Rng rng(7);
  const std::vector<std::string> vars = {"x", "y", "t1"};
  for (int trial = 0; trial < 300; ++trial) {
    std::string src = testing::random_smooth_expr(rng, vars, 4);
    if (trial % 3 == 0) src = "(" + src + ")^(" + testing::random_smooth_expr(rng, vars, 2) + ")^-x/3.25e-3";
    const Expr e = parse(src);
    const std::string printed = to_string(e);
    CAPTURE(src);
    CAPTURE(printed);
    CHECK(parse(printed) == e);
    CHECK(to_string(parse(printed)) == printed);
  }
  CHECK(to_string(parse("-(a+b)*c^-(d)")) == "-(a + b)*c^-d");
  CHECK(to_string(parse("(2^3)^2")) == "(2^3)^2");
  CHECK(to_string(parse("a-(b-c)")) == "a - (b - c)");
  CHECK(to_string(parse("0.1")) == "0.1");
}

TEST_CASE("eval is pure") {
  const ScalarField f(parse("sin(x)*exp(y) - x^3/7"), {"x", "y"});
  const std::vector<double> x = {0.123456789, -2.5};
  const double a = f(x);
  const double b = f(x);
  CHECK(std::memcmp(&a, &b, sizeof a) == 0);
}

TEST_CASE("fuzzed token strings only raise library errors") {
  Rng rng(99);
  const std::vector<std::string> tokens = {"x", "y", "1", "2.5", "+", "-", "*", "/", "^", "(", ")", ",",
                                           "sin", "atan2", "pi", "log", "e", ".", "1e", "foo", " "};
  int parsed = 0;
  for (int trial = 0; trial < 5000; ++trial) {
    std::string src;
    const std::size_t len = rng.index(12);
    for (std::size_t k = 0; k < len; ++k) src += tokens[rng.index(tokens.size())];
    try {
      const Expr e = parse(src);
      ++parsed;
      CHECK(parse(to_string(e)) == e);
      try {
        ScalarField(e, {"x", "y", "e"})(std::vector<double>{0.5, -0.25, 2.0});
      } catch (const Error&) {
      }
    } catch (const SyntaxError&) {
    } catch (const UnknownFunction&) {
    }
  }
  MESSAGE(parsed << " of 5000 fuzz strings parsed");
}
