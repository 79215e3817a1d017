#pragma once

// Forward-mode dual numbers. Dual<double> carries a gradient, Dual<Dual<double>>
// carries a gradient whose entries are themselves differentiable, which is how
// brackets of brackets are evaluated.

#include <array>
#include <cmath>
#include <cstddef>

namespace polarred {

inline constexpr std::size_t kMaxPartials = 8;

template <class T>
struct Dual {
  T v{};
  std::array<T, kMaxPartials> d{};
  std::size_t n = 0;

  Dual() = default;
  Dual(double c) : v(c) {}  // NOLINT: constants promote implicitly
  Dual(const T& value, std::size_t width) : v(value), n(width) {}

  static Dual variable(const T& value, std::size_t index, std::size_t width) {
    Dual r(value, width);
    r.d[index] = T(1.0);
    return r;
  }
};

template <class T>
struct is_dual : std::false_type {};
template <class T>
struct is_dual<Dual<T>> : std::true_type {};

inline double primal(double x) { return x; }
template <class T>
double primal(const Dual<T>& x) {
  return primal(x.v);
}

inline bool all_finite(double x) { return std::isfinite(x); }
template <class T>
bool all_finite(const Dual<T>& x) {
  if (!all_finite(x.v)) return false;
  for (std::size_t i = 0; i < x.n; ++i)
    if (!all_finite(x.d[i])) return false;
  return true;
}

inline bool has_partials(double) { return false; }
template <class T>
bool has_partials(const Dual<T>& x) {
  for (std::size_t i = 0; i < x.n; ++i)
    if (primal(x.d[i]) != 0.0 || has_partials(x.d[i])) return true;
  return has_partials(x.v);
}

namespace detail {
inline std::size_t width(std::size_t a, std::size_t b) { return a > b ? a : b; }

// Chain rule for a unary function with value fv and derivative dfv at x.v.
template <class T>
Dual<T> chain(const Dual<T>& x, const T& fv, const T& dfv) {
  Dual<T> r(fv, x.n);
  for (std::size_t i = 0; i < x.n; ++i) r.d[i] = dfv * x.d[i];
  return r;
}
}  // namespace detail

template <class T>
Dual<T> operator-(const Dual<T>& a) {
  Dual<T> r(-a.v, a.n);
  for (std::size_t i = 0; i < a.n; ++i) r.d[i] = -a.d[i];
  return r;
}

template <class T>
Dual<T> operator+(const Dual<T>& a, const Dual<T>& b) {
  Dual<T> r(a.v + b.v, detail::width(a.n, b.n));
  for (std::size_t i = 0; i < r.n; ++i) r.d[i] = a.d[i] + b.d[i];
  return r;
}

template <class T>
Dual<T> operator-(const Dual<T>& a, const Dual<T>& b) {
  Dual<T> r(a.v - b.v, detail::width(a.n, b.n));
  for (std::size_t i = 0; i < r.n; ++i) r.d[i] = a.d[i] - b.d[i];
  return r;
}

template <class T>
Dual<T> operator*(const Dual<T>& a, const Dual<T>& b) {
  Dual<T> r(a.v * b.v, detail::width(a.n, b.n));
  for (std::size_t i = 0; i < r.n; ++i) r.d[i] = a.d[i] * b.v + a.v * b.d[i];
  return r;
}

template <class T>
Dual<T> operator/(const Dual<T>& a, const Dual<T>& b) {
  const T q = a.v / b.v;
  Dual<T> r(q, detail::width(a.n, b.n));
  for (std::size_t i = 0; i < r.n; ++i) r.d[i] = (a.d[i] - q * b.d[i]) / b.v;
  return r;
}

template <class T>
Dual<T>& operator+=(Dual<T>& a, const Dual<T>& b) {
  a = a + b;
  return a;
}

template <class T>
Dual<T> operator*(double s, const Dual<T>& a) {
  Dual<T> r(s * a.v, a.n);
  for (std::size_t i = 0; i < a.n; ++i) r.d[i] = s * a.d[i];
  return r;
}

template <class T>
Dual<T> sin(const Dual<T>& x) {
  using std::cos;
  using std::sin;
  return detail::chain(x, T(sin(x.v)), T(cos(x.v)));
}

template <class T>
Dual<T> cos(const Dual<T>& x) {
  using std::cos;
  using std::sin;
  return detail::chain(x, T(cos(x.v)), T(-sin(x.v)));
}

template <class T>
Dual<T> tan(const Dual<T>& x) {
  using std::tan;
  const T t = tan(x.v);
  return detail::chain(x, t, T(T(1.0) + t * t));
}

template <class T>
Dual<T> exp(const Dual<T>& x) {
  using std::exp;
  const T e = exp(x.v);
  return detail::chain(x, e, e);
}

template <class T>
Dual<T> log(const Dual<T>& x) {
  using std::log;
  return detail::chain(x, T(log(x.v)), T(T(1.0) / x.v));
}

template <class T>
Dual<T> sqrt(const Dual<T>& x) {
  using std::sqrt;
  const T s = sqrt(x.v);
  return detail::chain(x, s, T(T(0.5) / s));
}

// a^b. The log-term pairs with db and is only formed when b actually varies,
// so negative bases with constant exponents stay in the domain.
template <class T>
Dual<T> pow(const Dual<T>& a, const Dual<T>& b) {
  using std::log;
  using std::pow;
  const T p = pow(a.v, b.v);
  Dual<T> r(p, detail::width(a.n, b.n));
  const T da = b.v * pow(a.v, b.v - T(1.0));
  const bool exponent_varies = has_partials(b);
  const T db = exponent_varies ? T(log(a.v) * p) : T(0.0);
  for (std::size_t i = 0; i < r.n; ++i) {
    r.d[i] = da * a.d[i];
    if (exponent_varies) r.d[i] = r.d[i] + db * b.d[i];
  }
  return r;
}

template <class T>
Dual<T> atan2(const Dual<T>& y, const Dual<T>& x) {
  using std::atan2;
  const T v = atan2(y.v, x.v);
  const T r2 = x.v * x.v + y.v * y.v;
  Dual<T> r(v, detail::width(y.n, x.n));
  for (std::size_t i = 0; i < r.n; ++i) r.d[i] = (x.v * y.d[i] - y.v * x.d[i]) / r2;
  return r;
}

}  // namespace polarred
