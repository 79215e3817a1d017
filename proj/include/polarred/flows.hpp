#pragma once

#include <Eigen/Dense>
#include <cstddef>
#include <string>
#include <vector>

#include "polarred/geometry.hpp"

namespace polarred {

enum class Method { FixedRK4, AdaptiveRK45 };

struct FlowOptions {
  Method method = Method::AdaptiveRK45;
  double step = 1e-2;  // fixed-step size for RK4
  double atol = 1e-10;
  double rtol = 1e-10;
  std::size_t max_steps = 1'000'000;
  bool record = true;  // keep every accepted step, not just the endpoint
};

struct FlowSpec {
  VectorField field;
  double duration = 0.0;
  FlowOptions options;
};

/// Accepted states of an integration. `points` are canonical chart
/// coordinates; `cover` holds the same states with periodic increments
/// accumulated instead of wrapped (universal-cover coordinates).
struct Trajectory {
  ChartPtr chart;
  std::vector<double> times;  // elapsed |t|, strictly increasing, starts at 0
  std::vector<Eigen::VectorXd> points;
  std::vector<Eigen::VectorXd> cover;
  std::size_t steps = 0;
  std::size_t rejected = 0;

  Point endpoint() const { return Point(chart, points.back()); }
  const Eigen::VectorXd& cover_endpoint() const { return cover.back(); }
};

/// Negative durations integrate the reversed field, so recorded times remain
/// increasing. Throws IntegrationError on step-size underflow or when
/// max_steps is exceeded; evaluation domain errors propagate.
Trajectory integrate(const FlowSpec& spec, const Point& seed);
Trajectory integrate(const FlowSpec& spec, const Point& seed, const Eigen::VectorXd& cover_seed);

/// Max over the trajectory of |f(point) - f(seed)|, one entry per field.
/// With use_cover the fields are evaluated on universal-cover coordinates.
std::vector<double> monitor_conservation(const Trajectory& traj, const std::vector<ScalarField>& fields,
                                         bool use_cover = false);

struct FlowSegment {
  VectorField field;
  double duration = 0.0;
};

struct ComposedFlow {
  Point endpoint;
  Eigen::VectorXd cover;
};

/// Endpoint of running each segment in turn from `seed`.
Point compose_flows(const std::vector<FlowSegment>& segments, const Point& seed, const FlowOptions& options = {});
ComposedFlow compose_flows_tracked(const std::vector<FlowSegment>& segments, const Point& seed,
                                   const Eigen::VectorXd& cover_seed, const FlowOptions& options = {});

/// CSV with header `t,<coord names...>`.
std::string trajectory_csv(const Trajectory& traj);

}  // namespace polarred
