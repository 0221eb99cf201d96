#pragma once

#include <cmath>
#include <concepts>
#include <utility>

namespace bc {

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

/// First-order forward-mode dual number along a single tangent direction.
/// The base scalar T may itself be a Dual (nested sweeps) or a tape variable.
template <class T>
struct Dual {
  T v{};
  T d{};

  Dual() = default;
  template <class U>
    requires std::constructible_from<T, const U&>
  Dual(const U& c) : v(c), d(T(0.0)) {}  // NOLINT: implicit lift of constants
  Dual(T value, T deriv) : v(std::move(value)), d(std::move(deriv)) {}
};

template <class T>
Dual<T> operator+(const Dual<T>& a, const Dual<T>& b) {
  return {a.v + b.v, a.d + b.d};
}
template <class T>
Dual<T> operator-(const Dual<T>& a, const Dual<T>& b) {
  return {a.v - b.v, a.d - b.d};
}
template <class T>
Dual<T> operator-(const Dual<T>& a) {
  return {-a.v, -a.d};
}
template <class T>
Dual<T> operator*(const Dual<T>& a, const Dual<T>& b) {
  return {a.v * b.v, a.v * b.d + a.d * b.v};
}
template <class T>
Dual<T> operator/(const Dual<T>& a, const Dual<T>& b) {
  T q = a.v / b.v;
  return {q, (a.d - q * b.d) / b.v};
}

template <class T>
Dual<T> operator+(const Dual<T>& a, double c) {
  return {a.v + c, a.d};
}
template <class T>
Dual<T> operator+(double c, const Dual<T>& a) {
  return a + c;
}
template <class T>
Dual<T> operator-(const Dual<T>& a, double c) {
  return {a.v - c, a.d};
}
template <class T>
Dual<T> operator-(double c, const Dual<T>& a) {
  return {c - a.v, -a.d};
}
template <class T>
Dual<T> operator*(const Dual<T>& a, double c) {
  return {a.v * c, a.d * c};
}
template <class T>
Dual<T> operator*(double c, const Dual<T>& a) {
  return a * c;
}
template <class T>
Dual<T> operator/(const Dual<T>& a, double c) {
  return {a.v / c, a.d / c};
}
template <class T>
Dual<T> operator/(double c, const Dual<T>& a) {
  return Dual<T>(c) / a;
}

template <class T>
Dual<T> exp(const Dual<T>& a) {
  using std::exp;
  T e = exp(a.v);
  return {e, e * a.d};
}
template <class T>
Dual<T> log(const Dual<T>& a) {
  using std::log;
  return {log(a.v), a.d / a.v};
}
template <class T>
Dual<T> sqrt(const Dual<T>& a) {
  using std::sqrt;
  T r = sqrt(a.v);
  return {r, a.d / (2.0 * r)};
}
/// Analytic sigmoid: the derivative s(1-s) underflows cleanly at saturation
/// where the exp/division route would produce inf/inf.
template <class T>
Dual<T> sigmoid(const Dual<T>& a) {
  T s = sigmoid(a.v);
  return {s, s * (1.0 - s) * a.d};
}
template <class T>
Dual<T> tanh(const Dual<T>& a) {
  using std::tanh;
  T th = tanh(a.v);
  return {th, (1.0 - th * th) * a.d};
}

/// Second-order dual along a single direction: value, first and second
/// directional derivative. Used for exact Laplacians in d sweeps.
template <class T>
struct Dual2 {
  T v{};
  T d1{};
  T d2{};

  Dual2() = default;
  template <class U>
    requires std::constructible_from<T, const U&>
  Dual2(const U& c) : v(c), d1(T(0.0)), d2(T(0.0)) {}  // NOLINT
  Dual2(T value, T first, T second)
      : v(std::move(value)), d1(std::move(first)), d2(std::move(second)) {}
};

template <class T>
Dual2<T> operator+(const Dual2<T>& a, const Dual2<T>& b) {
  return {a.v + b.v, a.d1 + b.d1, a.d2 + b.d2};
}
template <class T>
Dual2<T> operator-(const Dual2<T>& a, const Dual2<T>& b) {
  return {a.v - b.v, a.d1 - b.d1, a.d2 - b.d2};
}
template <class T>
Dual2<T> operator-(const Dual2<T>& a) {
  return {-a.v, -a.d1, -a.d2};
}
template <class T>
Dual2<T> operator*(const Dual2<T>& a, const Dual2<T>& b) {
  return {a.v * b.v, a.v * b.d1 + a.d1 * b.v,
          a.v * b.d2 + 2.0 * (a.d1 * b.d1) + a.d2 * b.v};
}
template <class T>
Dual2<T> operator/(const Dual2<T>& a, const Dual2<T>& b) {
  T q = a.v / b.v;
  T q1 = (a.d1 - q * b.d1) / b.v;
  T q2 = (a.d2 - 2.0 * (q1 * b.d1) - q * b.d2) / b.v;
  return {q, q1, q2};
}

template <class T>
Dual2<T> operator+(const Dual2<T>& a, double c) {
  return {a.v + c, a.d1, a.d2};
}
template <class T>
Dual2<T> operator+(double c, const Dual2<T>& a) {
  return a + c;
}
template <class T>
Dual2<T> operator-(const Dual2<T>& a, double c) {
  return {a.v - c, a.d1, a.d2};
}
template <class T>
Dual2<T> operator-(double c, const Dual2<T>& a) {
  return {c - a.v, -a.d1, -a.d2};
}
template <class T>
Dual2<T> operator*(const Dual2<T>& a, double c) {
  return {a.v * c, a.d1 * c, a.d2 * c};
}
template <class T>
Dual2<T> operator*(double c, const Dual2<T>& a) {
  return a * c;
}
template <class T>
Dual2<T> operator/(const Dual2<T>& a, double c) {
  return {a.v / c, a.d1 / c, a.d2 / c};
}
template <class T>
Dual2<T> operator/(double c, const Dual2<T>& a) {
  return Dual2<T>(c) / a;
}

template <class T>
Dual2<T> exp(const Dual2<T>& a) {
  using std::exp;
  T e = exp(a.v);
  return {e, e * a.d1, e * (a.d1 * a.d1 + a.d2)};
}
template <class T>
Dual2<T> log(const Dual2<T>& a) {
  using std::log;
  T g1 = 1.0 / a.v;
  return {log(a.v), g1 * a.d1, g1 * (a.d2 - g1 * (a.d1 * a.d1))};
}
template <class T>
Dual2<T> sqrt(const Dual2<T>& a) {
  using std::sqrt;
  T r = sqrt(a.v);
  T g1 = 0.5 / r;
  return {r, g1 * a.d1, g1 * a.d2 - (g1 / (2.0 * a.v)) * (a.d1 * a.d1)};
}
template <class T>
Dual2<T> sigmoid(const Dual2<T>& a) {
  T s = sigmoid(a.v);
  T s1 = s * (1.0 - s);
  T s2 = s1 * (1.0 - 2.0 * s);
  return {s, s1 * a.d1, s2 * (a.d1 * a.d1) + s1 * a.d2};
}

}  // namespace bc
