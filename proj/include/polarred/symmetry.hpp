#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "polarred/geometry.hpp"

namespace polarred {

/// A k-parameter group acting on a chart: generators xi_M for a basis of the
/// Lie algebra and closed-form finite maps in the coordinates plus a1..ak.
class GroupAction {
 public:
  GroupAction() = default;

  /// generators: k rows of n component expressions; maps: n expressions.
  /// Throws InputError on shape mismatch, UnknownIdentifier on stray names.
  GroupAction(ChartPtr chart, std::vector<std::vector<Expr>> generators, std::vector<Expr> maps, bool abelian);

  /// The trivial group {e}.
  static GroupAction trivial(ChartPtr chart);

  const ChartPtr& chart() const { return chart_; }
  std::size_t dim() const { return generator_exprs_.size(); }
  bool abelian() const { return abelian_; }
  const std::vector<std::vector<Expr>>& generator_exprs() const { return generator_exprs_; }
  const std::vector<Expr>& map_exprs() const { return map_exprs_; }
  static std::vector<std::string> parameter_names(std::size_t k);

  const VectorField& generator(std::size_t i) const { return generators_[i]; }
  /// n x k matrix whose columns are xi_M(x) for the basis.
  Eigen::MatrixXd generator_matrix(const Eigen::VectorXd& x) const;

  /// Unwrapped image of x under Phi_params.
  Eigen::VectorXd apply(const Eigen::VectorXd& params, const Eigen::VectorXd& x) const;
  /// D Phi_params at x (n x n).
  Eigen::MatrixXd jacobian(const Eigen::VectorXd& params, const Eigen::VectorXd& x) const;

 private:
  ChartPtr chart_;
  std::vector<std::vector<Expr>> generator_exprs_;
  std::vector<Expr> map_exprs_;
  std::vector<VectorField> generators_;
  std::vector<ScalarField> maps_;  // over chart names followed by a1..ak
  bool abelian_ = true;
};

Point act(const GroupAction& action, const Eigen::VectorXd& params, const Point& m);

struct InvariantFamily {
  std::vector<Expr> exprs;
  std::vector<ScalarField> fields;
  std::string provenance = "user-supplied";

  InvariantFamily() = default;
  InvariantFamily(std::vector<Expr> members, const Chart& chart, std::string provenance = "user-supplied");
  std::size_t size() const { return fields.size(); }
};

/// Deterministic low-discrepancy sample of chart points and group parameters.
struct SamplingPlan {
  std::vector<Point> points;
  std::vector<Eigen::VectorXd> params;

  /// Halton points over the box (linear axes) or full period (angles), and
  /// group parameters in [-pi, pi]^k.
  static SamplingPlan halton(const ChartPtr& chart, std::size_t group_dim, std::size_t n_points = 256,
                             std::size_t n_params = 16);
};

/// i-th element (1-based) of the radical-inverse sequence in the given base.
double radical_inverse(std::size_t index, unsigned base);

/// max |f(Phi_g m) - f(m)| over the plan.
double check_invariance(const ScalarField& f, const GroupAction& action, const SamplingPlan& plan);

/// max |{f o Phi_g, h o Phi_g}(m) - {f,h}(Phi_g m)| over the plan with
/// coordinate-function probes: max entry of |D Phi B(m) D Phi^T - B(Phi m)|.
double check_canonical(const GroupAction& action, const PoissonStructure& B, const SamplingPlan& plan);

struct ActionSelfCheck {
  double identity = 0;     // max wrapped |Phi_0 m - m|
  double generators = 0;   // max |d/dt Phi_{t e_i} m - xi_i(m)| by central differences
  double composition = 0;  // abelian only: max |Phi_p Phi_q m - Phi_{p+q} m|
  bool ok() const { return identity <= 1e-12 && generators <= 1e-6 && composition <= 1e-9; }
};

ActionSelfCheck self_check(const GroupAction& action, const SamplingPlan& plan);

}  // namespace polarred
