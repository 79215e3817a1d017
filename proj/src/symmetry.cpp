#include "polarred/symmetry.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "polarred/errors.hpp"

namespace polarred {

namespace {

std::vector<std::string> map_variables(const Chart& chart, std::size_t k) {
  std::vector<std::string> vars = chart.names();
  for (const auto& a : GroupAction::parameter_names(k)) {
    if (chart.index_of(a)) throw InputError("action.maps", "coordinate name '" + a + "' collides with a group parameter");
    vars.push_back(a);
  }
  return vars;
}

std::vector<double> joined(const Eigen::VectorXd& x, const Eigen::VectorXd& params) {
  std::vector<double> v(x.data(), x.data() + x.size());
  v.insert(v.end(), params.data(), params.data() + params.size());
  return v;
}

constexpr unsigned kPrimes[] = {2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53};

}  // namespace

std::vector<std::string> GroupAction::parameter_names(std::size_t k) {
  std::vector<std::string> out;
  for (std::size_t i = 1; i <= k; ++i) out.push_back("a" + std::to_string(i));
  return out;
}

GroupAction::GroupAction(ChartPtr chart, std::vector<std::vector<Expr>> generators, std::vector<Expr> maps,
                         bool abelian)
    : chart_(std::move(chart)),
      generator_exprs_(std::move(generators)),
      map_exprs_(std::move(maps)),
      abelian_(abelian) {
  const std::size_t n = chart_->dim();
  const std::size_t k = generator_exprs_.size();
  if (k > 8) throw InputError("action.dim", "group dimension above 8 is not supported");
  for (std::size_t i = 0; i < k; ++i) {
    if (generator_exprs_[i].size() != n)
      throw InputError("action.generators[" + std::to_string(i) + "]",
                       "expected " + std::to_string(n) + " components, got " + std::to_string(generator_exprs_[i].size()));
    std::vector<ScalarField> comps;
    for (const auto& e : generator_exprs_[i]) comps.push_back(make_field(e, *chart_));
    generators_.push_back(VectorField::from_components(chart_, std::move(comps)));
  }
  if (map_exprs_.size() != n)
    throw InputError("action.maps",
                     "expected " + std::to_string(n) + " expressions, got " + std::to_string(map_exprs_.size()));
  const auto vars = map_variables(*chart_, k);
  for (const auto& e : map_exprs_) maps_.emplace_back(e, vars);
}

GroupAction GroupAction::trivial(ChartPtr chart) {
  std::vector<Expr> maps;
  for (const auto& n : chart->names()) maps.push_back(Expr::variable(n));
  return GroupAction(std::move(chart), {}, std::move(maps), true);
}

Eigen::MatrixXd GroupAction::generator_matrix(const Eigen::VectorXd& x) const {
  Eigen::MatrixXd out(x.size(), static_cast<Eigen::Index>(dim()));
  for (std::size_t i = 0; i < dim(); ++i) out.col(static_cast<Eigen::Index>(i)) = generators_[i].at(x);
  return out;
}

Eigen::VectorXd GroupAction::apply(const Eigen::VectorXd& params, const Eigen::VectorXd& x) const {
  if (static_cast<std::size_t>(params.size()) != dim())
    throw InputError("action", "expected " + std::to_string(dim()) + " group parameters");
  const auto v = joined(x, params);
  Eigen::VectorXd out(x.size());
  for (std::size_t i = 0; i < maps_.size(); ++i) out[static_cast<Eigen::Index>(i)] = maps_[i](v);
  return out;
}

Eigen::MatrixXd GroupAction::jacobian(const Eigen::VectorXd& params, const Eigen::VectorXd& x) const {
  const auto v = joined(x, params);
  const auto n = static_cast<std::size_t>(x.size());
  Eigen::MatrixXd J(x.size(), x.size());
  for (std::size_t i = 0; i < n; ++i) {
    const Dual<double> d = maps_[i].evaluate_dual(v, n);
    for (std::size_t j = 0; j < n; ++j) J(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = d.d[j];
  }
  return J;
}

Point act(const GroupAction& action, const Eigen::VectorXd& params, const Point& m) {
  return Point(m.chart(), action.apply(params, m.coords()));
}

InvariantFamily::InvariantFamily(std::vector<Expr> members, const Chart& chart, std::string prov)
    : exprs(std::move(members)), provenance(std::move(prov)) {
  for (const auto& e : exprs) fields.push_back(make_field(e, chart));
}

double radical_inverse(std::size_t index, unsigned base) {
  double result = 0.0, f = 1.0 / base;
  while (index > 0) {
    result += f * static_cast<double>(index % base);
    index /= base;
    f /= base;
  }
  return result;
}

SamplingPlan SamplingPlan::halton(const ChartPtr& chart, std::size_t group_dim, std::size_t n_points,
                                  std::size_t n_params) {
  const std::size_t n = chart->dim();
  SamplingPlan plan;
  for (std::size_t s = 1; s <= n_points; ++s) {
    Eigen::VectorXd x(static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < n; ++i) {
      const double u = radical_inverse(s, kPrimes[i]);
      const auto& a = chart->axis(i);
      x[static_cast<Eigen::Index>(i)] = a.period ? u * *a.period : a.lo + u * (a.hi - a.lo);
    }
    plan.points.emplace_back(chart, std::move(x));
  }
  for (std::size_t s = 1; s <= n_params && group_dim > 0; ++s) {
    Eigen::VectorXd p(static_cast<Eigen::Index>(group_dim));
    for (std::size_t i = 0; i < group_dim; ++i)
      p[static_cast<Eigen::Index>(i)] = std::numbers::pi * (2 * radical_inverse(s, kPrimes[n + i]) - 1);
    plan.params.push_back(std::move(p));
  }
  return plan;
}

double check_invariance(const ScalarField& f, const GroupAction& action, const SamplingPlan& plan) {
  double worst = 0.0;
  for (const auto& m : plan.points) {
    const double f0 = eval(f, m);
    for (const auto& g : plan.params) worst = std::max(worst, std::abs(eval(f, act(action, g, m)) - f0));
  }
  return worst;
}

double check_canonical(const GroupAction& action, const PoissonStructure& B, const SamplingPlan& plan) {
  double worst = 0.0;
  for (const auto& m : plan.points) {
    const Eigen::MatrixXd Bm = B.at(m);
    for (const auto& g : plan.params) {
      const Eigen::MatrixXd J = action.jacobian(g, m.coords());
      const Point image = act(action, g, m);
      worst = std::max(worst, (J * Bm * J.transpose() - B.at(image)).cwiseAbs().maxCoeff());
    }
  }
  return worst;
}

ActionSelfCheck self_check(const GroupAction& action, const SamplingPlan& plan) {
  ActionSelfCheck out;
  const std::size_t k = action.dim();
  const Chart& chart = *action.chart();
  const Eigen::VectorXd zero = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(k));
  const double h = 1e-5;
  for (const auto& m : plan.points) {
    const Eigen::VectorXd& x = m.coords();
    out.identity = std::max(out.identity, chart.distance(x, action.apply(zero, x)));
    const Eigen::MatrixXd Xi = action.generator_matrix(x);
    for (std::size_t i = 0; i < k; ++i) {
      Eigen::VectorXd e = zero;
      e[static_cast<Eigen::Index>(i)] = h;
      // unwrapped images so the difference quotient is taken on the cover
      const Eigen::VectorXd fd = (action.apply(e, x) - action.apply(-e, x)) / (2 * h);
      out.generators = std::max(out.generators, (fd - Xi.col(static_cast<Eigen::Index>(i))).cwiseAbs().maxCoeff());
    }
    if (action.abelian())
      for (std::size_t a = 0; a + 1 < plan.params.size(); a += 2) {
        const Eigen::VectorXd& p = plan.params[a];
        const Eigen::VectorXd& q = plan.params[a + 1];
        out.composition = std::max(out.composition, chart.distance(action.apply(p, action.apply(q, x)), action.apply(p + q, x)));
      }
  }
  return out;
}

}  // namespace polarred
