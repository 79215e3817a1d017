#include "polarred/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace polarred {

Chart::Chart(std::vector<Axis> axes) : axes_(std::move(axes)) {
  if (axes_.empty()) throw InputError("chart.names", "chart needs at least one coordinate");
  if (axes_.size() > kMaxPartials)
    throw InputError("chart.names", "at most " + std::to_string(kMaxPartials) + " coordinates are supported");
  std::set<std::string> seen;
  for (std::size_t i = 0; i < axes_.size(); ++i) {
    const Axis& a = axes_[i];
    const std::string key = "chart.names[" + std::to_string(i) + "]";
    if (a.name.empty()) throw InputError(key, "empty coordinate name");
    if (a.name == "pi") throw InputError(key, "'pi' is reserved");
    if (!seen.insert(a.name).second) throw InputError(key, "duplicate coordinate name '" + a.name + "'");
    if (a.period && !(*a.period > 0.0 && std::isfinite(*a.period)))
      throw InputError("chart.periodic[" + std::to_string(i) + "]", "period must be positive");
    if (!(a.lo < a.hi)) throw InputError("chart.box[" + std::to_string(i) + "]", "box needs lo < hi");
    names_.push_back(a.name);
  }
}

std::optional<std::size_t> Chart::index_of(const std::string& name) const {
  const auto it = std::find(names_.begin(), names_.end(), name);
  if (it == names_.end()) return std::nullopt;
  return static_cast<std::size_t>(it - names_.begin());
}

bool Chart::any_periodic() const {
  return std::any_of(axes_.begin(), axes_.end(), [](const Axis& a) { return a.period.has_value(); });
}

double Chart::canonical(std::size_t i, double x) const {
  if (!axes_[i].period) return x;
  const double p = *axes_[i].period;
  double r = x - p * std::floor(x / p);
  if (r >= p) r -= p;
  if (r < 0.0) r = 0.0;
  return r;
}

void Chart::canonicalize(Eigen::Ref<Eigen::VectorXd> x) const {
  for (std::size_t i = 0; i < dim(); ++i) x[static_cast<Eigen::Index>(i)] = canonical(i, x[static_cast<Eigen::Index>(i)]);
}

Eigen::VectorXd Chart::difference(const Eigen::VectorXd& a, const Eigen::VectorXd& b) const {
  Eigen::VectorXd d = b - a;
  for (std::size_t i = 0; i < dim(); ++i) {
    if (!axes_[i].period) continue;
    const double p = *axes_[i].period;
    const auto k = static_cast<Eigen::Index>(i);
    d[k] -= p * std::floor(d[k] / p + 0.5);
  }
  return d;
}

double Chart::distance(const Eigen::VectorXd& a, const Eigen::VectorXd& b) const { return difference(a, b).norm(); }

Point::Point(ChartPtr chart, Eigen::VectorXd coords) : chart_(std::move(chart)), coords_(std::move(coords)) {
  if (static_cast<std::size_t>(coords_.size()) != chart_->dim())
    throw InputError("point", "expected " + std::to_string(chart_->dim()) + " coordinates, got " +
                                  std::to_string(coords_.size()));
  chart_->canonicalize(coords_);
}

ScalarField make_field(const Expr& e, const Chart& chart) { return ScalarField(e, chart.names()); }
ScalarField make_field(std::string_view source, const Chart& chart) { return ScalarField(parse(source), chart.names()); }

double eval(const ScalarField& f, const Point& m) { return f(m.span()); }

Eigen::VectorXd grad(const ScalarField& f, const Point& m) {
  const std::size_t n = m.chart()->dim();
  const Dual<double> r = f.evaluate_dual(m.span(), n);
  Eigen::VectorXd g(static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) g[static_cast<Eigen::Index>(i)] = r.d[i];
  return g;
}

// ---------------------------------------------------------------------------

VectorField::VectorField(ChartPtr chart, Rule rule) : chart_(std::move(chart)), rule_(std::move(rule)) {}

VectorField VectorField::from_components(ChartPtr chart, std::vector<ScalarField> components) {
  if (components.size() != chart->dim())
    throw InputError("vector field", "expected " + std::to_string(chart->dim()) + " components, got " +
                                         std::to_string(components.size()));
  auto comps = std::make_shared<const std::vector<ScalarField>>(std::move(components));
  return VectorField(std::move(chart), [comps](std::span<const double> x, std::span<double> out) {
    for (std::size_t i = 0; i < comps->size(); ++i) out[i] = (*comps)[i](x);
  });
}

VectorField VectorField::zero(ChartPtr chart) {
  return VectorField(std::move(chart), [](std::span<const double>, std::span<double> out) {
    std::fill(out.begin(), out.end(), 0.0);
  });
}

Eigen::VectorXd VectorField::at(const Eigen::VectorXd& x) const {
  Eigen::VectorXd v(x.size());
  rule_({x.data(), static_cast<std::size_t>(x.size())}, {v.data(), static_cast<std::size_t>(v.size())});
  return v;
}

Eigen::VectorXd VectorField::at(const Point& m) const { return at(m.coords()); }

VectorField VectorField::scaled(double s) const {
  Rule inner = rule_;
  return VectorField(chart_, [inner, s](std::span<const double> x, std::span<double> out) {
    inner(x, out);
    for (double& v : out) v *= s;
  });
}

// ---------------------------------------------------------------------------

namespace {

void check_square(const ChartPtr& chart, const std::vector<std::vector<Expr>>& m, const std::string& key) {
  if (m.size() != chart->dim())
    throw InputError(key, "expected " + std::to_string(chart->dim()) + " rows, got " + std::to_string(m.size()));
  for (std::size_t i = 0; i < m.size(); ++i)
    if (m[i].size() != chart->dim())
      throw InputError(key + "[" + std::to_string(i) + "]",
                       "expected " + std::to_string(chart->dim()) + " entries, got " + std::to_string(m[i].size()));
}

std::vector<ScalarField> bind_all(const std::vector<std::vector<Expr>>& m, const Chart& chart) {
  std::vector<ScalarField> out;
  for (const auto& row : m)
    for (const Expr& e : row) out.push_back(make_field(e, chart));
  return out;
}

}  // namespace

PoissonStructure PoissonStructure::given(ChartPtr chart, const std::vector<std::vector<Expr>>& entries) {
  check_square(chart, entries, "poisson.tensor");
  PoissonStructure B;
  B.chart_ = chart;
  B.provenance_ = Provenance::Given;
  B.entries_ = entries;
  B.fields_ = bind_all(entries, *chart);
  B.constant_ = std::all_of(B.fields_.begin(), B.fields_.end(), [](const ScalarField& f) { return f.constant(); });
  if (B.constant_) {
    const auto n = static_cast<Eigen::Index>(chart->dim());
    B.constant_value_.resize(n, n);
    const std::vector<double> dummy(chart->dim(), 0.0);
    for (Eigen::Index i = 0; i < n * n; ++i) B.constant_value_(i / n, i % n) = B.fields_[static_cast<std::size_t>(i)](dummy);
  }
  return B;
}

PoissonStructure PoissonStructure::from_symplectic(ChartPtr chart, const std::vector<std::vector<Expr>>& omega) {
  check_square(chart, omega, "poisson.symplectic");
  PoissonStructure B;
  B.chart_ = chart;
  B.provenance_ = Provenance::InvertedFromSymplectic;
  B.omega_exprs_ = omega;
  B.omega_fields_ = bind_all(omega, *chart);
  const bool constant =
      std::all_of(B.omega_fields_.begin(), B.omega_fields_.end(), [](const ScalarField& f) { return f.constant(); });
  const std::size_t n = chart->dim();
  if (!constant) {
    B.invert_pointwise_ = true;
    return B;
  }
  const std::vector<double> dummy(n, 0.0);
  std::vector<double> w(n * n);
  for (std::size_t i = 0; i < n * n; ++i) w[i] = B.omega_fields_[i](dummy);
  invert_in_place(w, n);
  B.constant_ = true;
  B.constant_value_.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  B.entries_.assign(n, std::vector<Expr>(n));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      // -0.0 would print as a negated literal; store a clean zero instead.
      const double v = w[i * n + j] == 0.0 ? 0.0 : w[i * n + j];
      B.constant_value_(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = v;
      B.entries_[i][j] = v < 0 ? Expr::unary(ExprKind::Neg, Expr::number(-v)) : Expr::number(v);
    }
  B.fields_ = bind_all(B.entries_, *chart);
  return B;
}

Eigen::MatrixXd PoissonStructure::at(std::span<const double> x) const {
  if (constant_) return constant_value_;
  const std::size_t n = dim();
  std::vector<double> buf(n * n);
  tensor<double>(x, buf);
  Eigen::MatrixXd M(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n * n; ++i) M(static_cast<Eigen::Index>(i / n), static_cast<Eigen::Index>(i % n)) = buf[i];
  return M;
}

Eigen::MatrixXd PoissonStructure::at(const Point& m) const { return at(m.span()); }

Eigen::MatrixXd PoissonStructure::symplectic_at(std::span<const double> x) const {
  const std::size_t n = dim();
  Eigen::MatrixXd W(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n * n; ++i)
    W(static_cast<Eigen::Index>(i / n), static_cast<Eigen::Index>(i % n)) = omega_fields_.at(i)(x);
  return W;
}

// ---------------------------------------------------------------------------

double bracket(const PoissonStructure& B, const ScalarField& f, const ScalarField& g, const Point& m) {
  const Eigen::VectorXd df = grad(f, m);
  const Eigen::VectorXd dg = grad(g, m);
  return df.dot(B.at(m) * dg);
}

VectorField hamiltonian_vf(const PoissonStructure& B, const ScalarField& f) {
  return hamiltonian_vf(B, std::vector<ScalarField>{f}, Eigen::VectorXd::Ones(1));
}

VectorField hamiltonian_vf(const PoissonStructure& B, std::vector<ScalarField> family, Eigen::VectorXd weights) {
  auto fam = std::make_shared<const std::vector<ScalarField>>(std::move(family));
  auto Bp = std::make_shared<const PoissonStructure>(B);
  return VectorField(B.chart(), [fam, Bp, weights](std::span<const double> x, std::span<double> out) {
    const std::size_t n = Bp->dim();
    std::array<double, kMaxPartials> dh{};
    for (std::size_t k = 0; k < fam->size(); ++k) {
      const double w = weights[static_cast<Eigen::Index>(k)];
      if (w == 0.0) continue;
      const Dual<double> r = (*fam)[k].evaluate_dual(x, n);
      for (std::size_t i = 0; i < n; ++i) dh[i] += w * r.d[i];
    }
    std::array<double, kMaxPartials * kMaxPartials> b{};
    Bp->tensor<double>(x, std::span<double>(b.data(), n * n));
    for (std::size_t i = 0; i < n; ++i) {
      double s = 0.0;
      for (std::size_t j = 0; j < n; ++j) s += b[i * n + j] * dh[j];
      out[i] = s;
    }
  });
}

namespace {

using D1 = Dual<double>;
using D2 = Dual<D1>;

// {f,g} as a differentiable function: value and gradient at x.
D1 bracket_dual(const PoissonStructure& B, const ScalarField& f, const ScalarField& g, std::span<const double> x) {
  const std::size_t n = B.dim();
  std::vector<D1> outer(n);
  std::vector<D2> inner(n);
  for (std::size_t k = 0; k < n; ++k) {
    outer[k] = D1::variable(x[k], k, n);
    inner[k] = D2::variable(outer[k], k, n);
  }
  const D2 fr = f.evaluate<D2>(inner);
  const D2 gr = g.evaluate<D2>(inner);
  std::vector<D1> b(n * n);
  B.tensor<D1>(outer, b);
  D1 s(0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) s = s + b[i * n + j] * fr.d[i] * gr.d[j];
  return s;
}

double outer_bracket(const D1& inner, const Eigen::MatrixXd& Bm, const Eigen::VectorXd& dh) {
  const auto n = dh.size();
  Eigen::VectorXd di(n);
  for (Eigen::Index i = 0; i < n; ++i) di[i] = inner.d[static_cast<std::size_t>(i)];
  return di.dot(Bm * dh);
}

}  // namespace

double jacobi_defect(const PoissonStructure& B, const ScalarField& f, const ScalarField& g, const ScalarField& h,
                     const Point& m) {
  const Eigen::MatrixXd Bm = B.at(m);
  const D1 fg = bracket_dual(B, f, g, m.span());
  const D1 gh = bracket_dual(B, g, h, m.span());
  const D1 hf = bracket_dual(B, h, f, m.span());
  return outer_bracket(fg, Bm, grad(h, m)) + outer_bracket(gh, Bm, grad(f, m)) + outer_bracket(hf, Bm, grad(g, m));
}

double antisymmetry_defect(const PoissonStructure& B, const Point& m) {
  const Eigen::MatrixXd Bm = B.at(m);
  return (Bm + Bm.transpose()).cwiseAbs().maxCoeff();
}

double symplectic_residual(const PoissonStructure& B, const Point& m) {
  if (B.provenance() != Provenance::InvertedFromSymplectic) return 0.0;
  const Eigen::MatrixXd W = B.symplectic_at(m.span());
  const auto n = W.rows();
  return (W * B.at(m) - Eigen::MatrixXd::Identity(n, n)).cwiseAbs().maxCoeff();
}

}  // namespace polarred
