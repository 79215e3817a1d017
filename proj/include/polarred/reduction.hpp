#pragma once

#include <Eigen/Dense>
#include <array>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "polarred/flows.hpp"
#include "polarred/geometry.hpp"
#include "polarred/symmetry.hpp"

namespace polarred {

struct RankSettings {
  double relative = 1e-8;  // keep sigma > relative * sigma_max
  double absolute = 1e-12;  // and sigma > absolute, so an all-zero frame has rank 0
  double gap = 1e3;         // required sigma_retained / sigma_discarded
};

/// Numerical column span of A.
struct SpanInfo {
  Eigen::MatrixXd basis;  // orthonormal, n x rank
  std::size_t rank = 0;
  std::vector<double> singular_values;
  double smallest_retained = 0;
  double largest_discarded = 0;
  double gap = std::numeric_limits<double>::infinity();
  bool ill_conditioned = false;
};

SpanInfo column_span(const Eigen::MatrixXd& A, const RankSettings& rs = {});

/// Right null space of A with the relative cutoff scaled by `scale`.
Eigen::MatrixXd null_space(const Eigen::MatrixXd& A, double scale, double relative = 1e-8);

// ---------------------------------------------------------------------------

struct DistributionFrame {
  Point base;
  Eigen::MatrixXd generators;  // columns X_{f_i}(m)
  SpanInfo span;

  std::size_t rank() const { return span.rank; }
  const Eigen::MatrixXd& basis() const { return span.basis; }
};

/// Throws InputError on an empty family.
DistributionFrame distribution_at(const Point& m, const InvariantFamily& family, const PoissonStructure& B,
                                  const RankSettings& rs = {});

/// Largest frame rank over the plan's points.
std::size_t generic_rank(const SamplingPlan& plan, const InvariantFamily& family, const PoissonStructure& B,
                         const RankSettings& rs = {});

// ---------------------------------------------------------------------------

struct LeafBudget {
  std::size_t points = 1000;
  std::size_t segments = 64;
  std::uint64_t rng_seed = 0;
  double duration = 1.0;  // segment durations uniform in [-duration, duration]
  unsigned threads = 0;   // 0: hardware concurrency
  FlowOptions flow;
};

/// One flow of the randomly weighted family Hamiltonian sum_i w_i f_i.
struct FlowStep {
  Eigen::VectorXd weights;
  double duration = 0;
};

struct CloudPoint {
  Point point;
  Eigen::VectorXd cover;  // universal-cover coordinates
  std::size_t chain = 0;  // word = chains[chain][0..depth)
  std::size_t depth = 0;  // 0 only for the seed
  Eigen::MatrixXd frame;  // orthonormal basis of the distribution here
};

struct LeafSample {
  Point seed;
  std::size_t rank = 0;
  std::vector<CloudPoint> cloud;  // cloud[0] is the seed
  std::vector<std::vector<FlowStep>> chains;

  std::size_t size() const { return cloud.size(); }
  std::vector<FlowStep> word(std::size_t i) const;
};

/// Builds `budget.points` points (seed included) from chains of
/// `budget.segments` random flows restarting at the seed. Each chain draws
/// from its own generator, so the cloud does not depend on the thread count.
/// Throws IllConditioned when the seed frame has no spectral gap and RankJump
/// when any cloud point changes rank.
LeafSample trace_leaf(const Point& seed, const InvariantFamily& family, const PoissonStructure& B,
                      const LeafBudget& budget, const RankSettings& rs = {});

/// Largest wrapped distance between stored and re-executed points over `indices`.
double replay_discrepancy(const LeafSample& leaf, const std::vector<std::size_t>& indices,
                          const InvariantFamily& family, const PoissonStructure& B, const FlowOptions& flow = {});

/// Cloud points (canonical coordinates) as CSV with header of chart names.
std::string cloud_csv(const LeafSample& leaf);

/// Drift of each field over the cloud, evaluated on cover coordinates, and the
/// largest bracket with any family member at the cloud points.
struct ConservedReport {
  std::string expr;
  double drift = 0;
  double family_bracket = 0;
};
std::vector<ConservedReport> conserved_on_leaf(const LeafSample& leaf, const std::vector<Expr>& fields,
                                               const InvariantFamily& family, const PoissonStructure& B);

// ---------------------------------------------------------------------------

struct MembershipVerdict {
  bool reached = false;
  double distance = 0;
  std::vector<std::pair<std::size_t, double>> word;  // (family index, duration)
  struct Certificate {
    std::string expr;
    double seed_value = 0, target_value = 0;
  };
  std::optional<Certificate> certificate;
};

/// Greedy shooting towards `target` with single-member flows. `not reached`
/// does not prove the points lie on different leaves; a certificate is attached
/// when one of `conserved` separates them.
MembershipVerdict leaf_membership(const Point& seed, const Point& target, const InvariantFamily& family,
                                  const PoissonStructure& B, double tol, std::size_t max_moves,
                                  const std::vector<Expr>& conserved = {}, const FlowOptions& flow = {});

// ---------------------------------------------------------------------------

struct IsotropyAlgebra {
  Eigen::MatrixXd basis;  // k x dim, orthonormal coefficient vectors
  std::size_t dim = 0;
  std::size_t group_dim = 0;
  std::vector<double> singular_values;
  std::vector<double> basis_residuals;     // max over samples of dist(xi_M, frame span)
  std::vector<double> rejected_residuals;  // same for the complementary directions
};

/// Null space of xi -> (I - Q Q^T) xi_M(m), stacked over the cloud.
/// Throws InputError when the leaf has fewer than 8 points.
IsotropyAlgebra isotropy_algebra(const LeafSample& leaf, const GroupAction& action, double relative = 1e-8);

/// Orthonormal basis of span{xi_M(m) : xi in g_rho}.
Eigen::MatrixXd orbit_subspace(const Point& m, const IsotropyAlgebra& iso, const GroupAction& action,
                               const RankSettings& rs = {});

/// Whether the stabilizers {p in plan : Phi_p m = m} agree over the cloud.
struct StabilizerReport {
  bool agree = true;
  bool trivial = true;
  std::size_t samples = 0;
};
StabilizerReport sampled_stabilizers(const LeafSample& leaf, const GroupAction& action, const SamplingPlan& plan);

// ---------------------------------------------------------------------------

/// Analytic parameterization of a symplectic leaf: embedding params -> chart
/// and the leaf's symplectic form in the params.
struct LeafChart {
  std::size_t seed_index = 0;
  std::vector<std::string> params;
  std::vector<Expr> embedding;
  std::vector<std::vector<Expr>> form;
};

class BoundLeafChart {
 public:
  /// Throws InputError on shape or identifier mismatches.
  BoundLeafChart(const LeafChart& lc, ChartPtr chart);

  std::size_t dim() const { return params_.size(); }
  Eigen::VectorXd embed(const Eigen::VectorXd& u) const;
  Eigen::MatrixXd tangent(const Eigen::VectorXd& u) const;  // n x p
  Eigen::MatrixXd form(const Eigen::VectorXd& u) const;     // p x p

  /// Gauss-Newton solve of embed(u) = m; throws InputError("leafchart", ...)
  /// when the residual stays above 1e-9.
  Eigen::VectorXd locate(const Point& m, const Eigen::VectorXd& guess) const;

 private:
  ChartPtr chart_;
  std::vector<std::string> params_;
  std::vector<ScalarField> embed_;
  std::vector<ScalarField> form_;
};

struct ReducedFormOptions {
  RankSettings rank;
  std::vector<Expr> casimirs;                   // extra substitutions f_a + lambda c
  const BoundLeafChart* leafchart = nullptr;    // enables the pullback residual
  std::optional<Eigen::VectorXd> chart_guess;   // starting params for locate
};

struct ReducedFormReport {
  Point base;
  std::size_t leaf_rank = 0;
  std::size_t orbit_dim = 0;
  std::size_t reduced_dim = 0;
  std::vector<std::size_t> selected;  // family indices f_a
  Eigen::MatrixXd omega;
  std::vector<double> singular_values;
  bool nondegenerate = false;
  double antisymmetry = 0;
  double well_definedness = 0;  // max change of Omega under representative substitutions
  std::size_t substitutions = 0;
  double transport = 0;  // max change of Omega along the G_rho orbit
  std::optional<double> pullback_residual;
  std::optional<Eigen::VectorXd> chart_params;

  double conditioning() const;  // sigma_min / sigma_max, 1 for reduced_dim 0
};

/// Throws IllConditioned when no complement of the required size exists.
ReducedFormReport reduced_form(const Point& m, const IsotropyAlgebra& iso, const GroupAction& action,
                               const InvariantFamily& family, const PoissonStructure& B,
                               const ReducedFormOptions& opts = {});

// ---------------------------------------------------------------------------

struct PlaneReport {
  std::size_t a = 0, b = 0;  // axis indices
  std::string label;         // dense-line (Kronecker) | closed-curve | fills | point | curve
  std::size_t projected_rank = 0;
  Eigen::Vector2d direction = Eigen::Vector2d::Zero();
  double direction_spread = 0;  // max |d(m) x d(seed)|
  double line_distance = 0;     // max cover distance from the line through the seed
  double extent = 0;            // length of the traced interval along the line
  double strand_gap = 0;        // min transverse lattice offset within the extent
  std::optional<double> closing_length;
  std::vector<std::pair<std::size_t, double>> min_returns;  // (points nearest the seed, min wrapped return)
  double decay_exponent = 0;
  std::array<std::size_t, 3> boxes{};  // occupied boxes at period/4, /8, /16
  double box_dimension = 0;
};

struct ClosureReport {
  std::string status;  // ok | not-applicable | insufficient-cloud
  std::vector<PlaneReport> planes;
  std::vector<std::pair<std::size_t, std::size_t>> dense_planes() const;
};

/// Heuristic closure classification of the cloud's projection to each pair of
/// periodic axes. Needs at least `min_cloud` points.
ClosureReport closure_classifier(const LeafSample& leaf, const Chart& chart, const RankSettings& rs = {},
                                 std::size_t min_cloud = 1000);

struct PropernessScreen {
  bool warning = false;
  std::string message;
  struct Evidence {
    std::size_t a = 0, b = 0, generator = 0;
    std::vector<std::pair<double, double>> returns;  // (extent, smallest nonzero return parameter)
  };
  std::vector<Evidence> evidence;
};

/// Flags the dense-subgroup signature: a dense line, trivial g_rho, and a
/// generator whose transverse returns to the traced leaf accumulate at zero.
PropernessScreen properness_screen(const ClosureReport& closure, const LeafSample& leaf, const GroupAction& action,
                                   const IsotropyAlgebra& iso);

}  // namespace polarred
