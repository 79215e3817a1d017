#include "polarred/flows.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "polarred/errors.hpp"

namespace polarred {

namespace {

using Vec = Eigen::VectorXd;

class Stepper {
 public:
  Stepper(const VectorField& field, double sign) : field_(field), sign_(sign) {}

  Vec f(const Vec& x) const {
    Vec out(x.size());
    field_(std::span<const double>(x.data(), static_cast<std::size_t>(x.size())),
           std::span<double>(out.data(), static_cast<std::size_t>(out.size())));
    if (sign_ < 0) out = -out;
    for (Eigen::Index i = 0; i < out.size(); ++i)
      if (!std::isfinite(out[i])) throw IntegrationError("vector field returned a non-finite component");
    return out;
  }

 private:
  const VectorField& field_;
  double sign_;
};

// Dormand-Prince 5(4) tableau.
constexpr double a21 = 1.0 / 5;
constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561, a54 = -212.0 / 729;
constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                 a65 = -5103.0 / 18656;
constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192, b5 = -2187.0 / 6784, b6 = 11.0 / 84;
constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920, e5 = -17253.0 / 339200, e6 = 22.0 / 525,
                 e7 = -1.0 / 40;

struct Recorder {
  Trajectory& traj;
  const Chart& chart;
  bool record;
  Vec x;      // canonical
  Vec cover;  // unwrapped
  double t = 0;

  void accept(const Vec& next, double t_next) {
    const Vec delta = next - x;
    cover += delta;
    x = next;
    chart.canonicalize(x);
    t = t_next;
    ++traj.steps;
    if (record) push();
  }
  void push() {
    traj.times.push_back(t);
    traj.points.push_back(x);
    traj.cover.push_back(cover);
  }
};

void run_rk4(const Stepper& s, Recorder& rec, double duration, const FlowOptions& opt) {
  if (!(opt.step > 0)) throw InputError("flow.step", "fixed step must be positive");
  const auto n = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(duration / opt.step - 1e-12)));
  if (n > opt.max_steps) throw BudgetExhausted("maximum step count exceeded");
  const double h = duration / static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) {
    const Vec& x = rec.x;
    const Vec k1 = s.f(x);
    const Vec k2 = s.f(x + 0.5 * h * k1);
    const Vec k3 = s.f(x + 0.5 * h * k2);
    const Vec k4 = s.f(x + h * k3);
    rec.accept(x + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4),
               i + 1 == n ? duration : h * static_cast<double>(i + 1));
  }
}

void run_rk45(const Stepper& s, Recorder& rec, double duration, const FlowOptions& opt, std::size_t& rejected) {
  if (!(opt.atol > 0) || !(opt.rtol > 0)) throw InputError("flow.tolerance", "tolerances must be positive");
  double h = std::min(duration, 0.05);
  Vec k1 = s.f(rec.x);
  std::size_t attempts = 0;
  while (rec.t < duration) {
    if (++attempts > opt.max_steps) throw BudgetExhausted("maximum step count exceeded");
    const bool last = rec.t + h >= duration;
    if (last) h = duration - rec.t;
    const Vec& x = rec.x;
    const Vec k2 = s.f(x + h * (a21 * k1));
    const Vec k3 = s.f(x + h * (a31 * k1 + a32 * k2));
    const Vec k4 = s.f(x + h * (a41 * k1 + a42 * k2 + a43 * k3));
    const Vec k5 = s.f(x + h * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4));
    const Vec k6 = s.f(x + h * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5));
    const Vec y = x + h * (b1 * k1 + b3 * k3 + b4 * k4 + b5 * k5 + b6 * k6);
    const Vec k7 = s.f(y);
    const Vec err = h * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7);
    double norm = 0.0;
    for (Eigen::Index i = 0; i < err.size(); ++i) {
      const double scale = opt.atol + opt.rtol * std::max(std::abs(x[i]), std::abs(y[i]));
      norm = std::max(norm, std::abs(err[i]) / scale);
    }
    if (norm <= 1.0) {
      rec.accept(y, last ? duration : rec.t + h);
      k1 = k7;
    } else {
      ++rejected;
    }
    const double fac = norm == 0.0 ? 5.0 : std::clamp(0.9 * std::pow(norm, -0.2), 0.2, 5.0);
    h *= norm <= 1.0 ? fac : std::min(fac, 1.0);
    if (rec.t < duration && h < 1e-14 * std::max(1.0, rec.t))
      throw IntegrationError("step size underflow at t = " + std::to_string(rec.t));
  }
}

}  // namespace

Trajectory integrate(const FlowSpec& spec, const Point& seed) { return integrate(spec, seed, seed.coords()); }

Trajectory integrate(const FlowSpec& spec, const Point& seed, const Eigen::VectorXd& cover_seed) {
  if (!spec.field.chart() || spec.field.chart()->dim() != seed.chart()->dim())
    throw InputError("flow", "field and seed live on different charts");
  if (!std::isfinite(spec.duration)) throw InputError("flow.duration", "duration must be finite");
  if (spec.options.max_steps == 0) throw InputError("flow.max_steps", "max steps must be positive");

  Trajectory traj;
  traj.chart = seed.chart();
  Recorder rec{traj, *seed.chart(), spec.options.record, seed.coords(), cover_seed};
  rec.push();
  const double duration = std::abs(spec.duration);
  if (duration > 0) {
    const Stepper stepper(spec.field, spec.duration < 0 ? -1.0 : 1.0);
    if (spec.options.method == Method::FixedRK4)
      run_rk4(stepper, rec, duration, spec.options);
    else
      run_rk45(stepper, rec, duration, spec.options, traj.rejected);
  }
  if (!spec.options.record && duration > 0) rec.push();
  return traj;
}

std::vector<double> monitor_conservation(const Trajectory& traj, const std::vector<ScalarField>& fields,
                                         bool use_cover) {
  const auto& pts = use_cover ? traj.cover : traj.points;
  std::vector<double> drift(fields.size(), 0.0);
  for (std::size_t k = 0; k < fields.size(); ++k) {
    auto at = [&](const Vec& x) { return fields[k](std::span<const double>(x.data(), static_cast<std::size_t>(x.size()))); };
    const double f0 = at(pts.front());
    for (const auto& x : pts) drift[k] = std::max(drift[k], std::abs(at(x) - f0));
  }
  return drift;
}

ComposedFlow compose_flows_tracked(const std::vector<FlowSegment>& segments, const Point& seed,
                                   const Eigen::VectorXd& cover_seed, const FlowOptions& options) {
  FlowOptions opt = options;
  opt.record = false;
  ComposedFlow state{seed, cover_seed};
  for (const auto& seg : segments) {
    const Trajectory t = integrate(FlowSpec{seg.field, seg.duration, opt}, state.endpoint, state.cover);
    state.endpoint = t.endpoint();
    state.cover = t.cover_endpoint();
  }
  return state;
}

Point compose_flows(const std::vector<FlowSegment>& segments, const Point& seed, const FlowOptions& options) {
  return compose_flows_tracked(segments, seed, seed.coords(), options).endpoint;
}

std::string trajectory_csv(const Trajectory& traj) {
  std::ostringstream out;
  out << 't';
  for (const auto& n : traj.chart->names()) out << ',' << n;
  out << '\n';
  for (std::size_t i = 0; i < traj.points.size(); ++i) {
    out << format_number(traj.times[i]);
    for (Eigen::Index j = 0; j < traj.points[i].size(); ++j) out << ',' << format_number(traj.points[i][j]);
    out << '\n';
  }
  return out.str();
}

}  // namespace polarred
