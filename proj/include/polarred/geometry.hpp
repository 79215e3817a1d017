#pragma once

#include <Eigen/Dense>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "polarred/dual.hpp"
#include "polarred/expr.hpp"

namespace polarred {

/// A single coordinate chart. Periodic axes carry a period; linear axes carry a
/// sampling box used by the default sampling plans.
class Chart {
 public:
  struct Axis {
    std::string name;
    std::optional<double> period;
    double lo = -1.0, hi = 1.0;
  };

  /// Throws InputError on duplicate or reserved names, nonpositive periods, or
  /// dimension above kMaxPartials.
  explicit Chart(std::vector<Axis> axes);

  std::size_t dim() const { return axes_.size(); }
  const Axis& axis(std::size_t i) const { return axes_[i]; }
  const std::vector<std::string>& names() const { return names_; }
  std::optional<std::size_t> index_of(const std::string& name) const;

  bool periodic(std::size_t i) const { return axes_[i].period.has_value(); }
  bool any_periodic() const;

  /// Canonical representative in [0, period) on periodic axes.
  double canonical(std::size_t i, double x) const;
  void canonicalize(Eigen::Ref<Eigen::VectorXd> x) const;

  /// b - a, wrapped into [-period/2, period/2) on periodic axes.
  Eigen::VectorXd difference(const Eigen::VectorXd& a, const Eigen::VectorXd& b) const;
  double distance(const Eigen::VectorXd& a, const Eigen::VectorXd& b) const;

 private:
  std::vector<Axis> axes_;
  std::vector<std::string> names_;
};

using ChartPtr = std::shared_ptr<const Chart>;

/// A point of the chart; periodic coordinates are stored canonically.
class Point {
 public:
  Point() = default;
  Point(ChartPtr chart, Eigen::VectorXd coords);

  const ChartPtr& chart() const { return chart_; }
  const Eigen::VectorXd& coords() const { return coords_; }
  double operator[](std::size_t i) const { return coords_[static_cast<Eigen::Index>(i)]; }
  std::span<const double> span() const { return {coords_.data(), static_cast<std::size_t>(coords_.size())}; }

  double distance_to(const Point& other) const { return chart_->distance(coords_, other.coords_); }

 private:
  ChartPtr chart_;
  Eigen::VectorXd coords_;
};

/// Binds an expression to the chart's coordinate names.
ScalarField make_field(const Expr& e, const Chart& chart);
ScalarField make_field(std::string_view source, const Chart& chart);

double eval(const ScalarField& f, const Point& m);
Eigen::VectorXd grad(const ScalarField& f, const Point& m);

// ---------------------------------------------------------------------------

/// Point -> tangent vector rule.
class VectorField {
 public:
  using Rule = std::function<void(std::span<const double> x, std::span<double> out)>;

  VectorField() = default;
  VectorField(ChartPtr chart, Rule rule);

  static VectorField from_components(ChartPtr chart, std::vector<ScalarField> components);
  static VectorField zero(ChartPtr chart);

  const ChartPtr& chart() const { return chart_; }
  std::size_t dim() const { return chart_->dim(); }

  void operator()(std::span<const double> x, std::span<double> out) const { rule_(x, out); }
  Eigen::VectorXd at(const Point& m) const;
  Eigen::VectorXd at(const Eigen::VectorXd& x) const;

  VectorField scaled(double s) const;

 private:
  ChartPtr chart_;
  Rule rule_;
};

// ---------------------------------------------------------------------------

enum class Provenance { Given, InvertedFromSymplectic };

/// The bivector B(m). Brackets follow {f,g} = (grad f)^T B grad g and
/// X_f = B grad f, so X_f[g] = {g,f}.
class PoissonStructure {
 public:
  PoissonStructure() = default;

  /// Tensor given entrywise. Throws InputError on shape mismatch.
  static PoissonStructure given(ChartPtr chart, const std::vector<std::vector<Expr>>& entries);

  /// B = omega^{-1}. Constant omega is inverted once and stored as literal
  /// entries; otherwise inversion happens at each evaluation. Throws
  /// NumericalAbort if a constant omega is singular.
  static PoissonStructure from_symplectic(ChartPtr chart, const std::vector<std::vector<Expr>>& omega);

  const ChartPtr& chart() const { return chart_; }
  std::size_t dim() const { return chart_->dim(); }
  Provenance provenance() const { return provenance_; }
  bool constant() const { return constant_; }

  /// Entries of B as expressions. Empty for pointwise-inverted structures.
  const std::vector<std::vector<Expr>>& entries() const { return entries_; }
  /// Entries of omega when inverted from a symplectic form.
  const std::vector<std::vector<Expr>>& symplectic_entries() const { return omega_exprs_; }

  /// Row-major B at x in arithmetic T.
  template <class T>
  void tensor(std::span<const T> x, std::span<T> out) const;

  Eigen::MatrixXd at(const Point& m) const;
  Eigen::MatrixXd at(std::span<const double> x) const;
  /// omega(m) for inverted structures.
  Eigen::MatrixXd symplectic_at(std::span<const double> x) const;

 private:
  ChartPtr chart_;
  Provenance provenance_ = Provenance::Given;
  bool constant_ = false;
  Eigen::MatrixXd constant_value_;
  std::vector<std::vector<Expr>> entries_;
  std::vector<ScalarField> fields_;  // row-major B entries, or omega entries when inverting pointwise
  std::vector<std::vector<Expr>> omega_exprs_;
  std::vector<ScalarField> omega_fields_;
  bool invert_pointwise_ = false;
};

/// Throws NumericalAbort when the matrix is singular. a is row-major n*n.
template <class T>
void invert_in_place(std::vector<T>& a, std::size_t n);

double bracket(const PoissonStructure& B, const ScalarField& f, const ScalarField& g, const Point& m);
VectorField hamiltonian_vf(const PoissonStructure& B, const ScalarField& f);

/// X_H for H = sum_i weights[i] * family[i].
VectorField hamiltonian_vf(const PoissonStructure& B, std::vector<ScalarField> family, Eigen::VectorXd weights);

/// {{f,g},h} + {{g,h},f} + {{h,f},g} at m, each outer bracket differentiating
/// the inner one with nested duals.
double jacobi_defect(const PoissonStructure& B, const ScalarField& f, const ScalarField& g, const ScalarField& h,
                     const Point& m);

/// max |B + B^T| entry at m.
double antisymmetry_defect(const PoissonStructure& B, const Point& m);

/// max |omega B - I| entry at m (0 for given tensors).
double symplectic_residual(const PoissonStructure& B, const Point& m);

// ---------------------------------------------------------------------------

template <class T>
void invert_in_place(std::vector<T>& a, std::size_t n) {
  using std::abs;
  std::vector<T> inv(n * n, T(0.0));
  for (std::size_t i = 0; i < n; ++i) inv[i * n + i] = T(1.0);
  for (std::size_t col = 0; col < n; ++col) {
    std::size_t piv = col;
    double best = std::abs(primal(a[col * n + col]));
    for (std::size_t r = col + 1; r < n; ++r) {
      const double v = std::abs(primal(a[r * n + col]));
      if (v > best) {
        best = v;
        piv = r;
      }
    }
    if (best == 0.0) throw NumericalAbort("singular symplectic form");
    if (piv != col)
      for (std::size_t c = 0; c < n; ++c) {
        std::swap(a[piv * n + c], a[col * n + c]);
        std::swap(inv[piv * n + c], inv[col * n + c]);
      }
    const T p = a[col * n + col];
    for (std::size_t c = 0; c < n; ++c) {
      a[col * n + c] = a[col * n + c] / p;
      inv[col * n + c] = inv[col * n + c] / p;
    }
    for (std::size_t r = 0; r < n; ++r) {
      if (r == col) continue;
      const T factor = a[r * n + col];
      if (primal(factor) == 0.0 && !has_partials(factor)) continue;
      for (std::size_t c = 0; c < n; ++c) {
        a[r * n + c] = a[r * n + c] - factor * a[col * n + c];
        inv[r * n + c] = inv[r * n + c] - factor * inv[col * n + c];
      }
    }
  }
  a = std::move(inv);
}

template <class T>
void PoissonStructure::tensor(std::span<const T> x, std::span<T> out) const {
  const std::size_t n = dim();
  if (constant_) {
    for (std::size_t i = 0; i < n * n; ++i)
      out[i] = T(constant_value_(static_cast<Eigen::Index>(i / n), static_cast<Eigen::Index>(i % n)));
    return;
  }
  if (!invert_pointwise_) {
    for (std::size_t i = 0; i < n * n; ++i) out[i] = fields_[i].evaluate<T>(x);
    return;
  }
  std::vector<T> w(n * n);
  for (std::size_t i = 0; i < n * n; ++i) w[i] = omega_fields_[i].evaluate<T>(x);
  invert_in_place(w, n);
  for (std::size_t i = 0; i < n * n; ++i) out[i] = w[i];
}

}  // namespace polarred
