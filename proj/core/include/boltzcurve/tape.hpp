#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

namespace bc::ad {

/// Reverse-mode tape over scalar operations. Nodes store local partials with
/// respect to at most two parents; backward is one linear sweep.
///
/// A tape is activated with Tape::Scope (thread-local). Var values created
/// while no tape is active behave as constants.
class Tape {
 public:
  struct Node {
    double w0, w1;
    std::int32_t p0, p1;
  };

  std::int32_t push(double w0, std::int32_t p0, double w1, std::int32_t p1) {
    nodes_.push_back({w0, w1, p0, p1});
    return static_cast<std::int32_t>(nodes_.size()) - 1;
  }
  std::int32_t push_leaf() { return push(0.0, -1, 0.0, -1); }
  std::size_t size() const { return nodes_.size(); }
  const std::vector<Node>& nodes() const { return nodes_; }

  static Tape*& active();

 private:
  std::vector<Node> nodes_;
};

/// RAII activation of a fresh tape on this thread.
class TapeScope {
 public:
  TapeScope() : prev_(Tape::active()) { Tape::active() = &tape_; }
  ~TapeScope() { Tape::active() = prev_; }
  TapeScope(const TapeScope&) = delete;
  TapeScope& operator=(const TapeScope&) = delete;
  Tape& tape() { return tape_; }

 private:
  Tape tape_;
  Tape* prev_;
};

/// Tracked scalar. idx < 0 marks a constant (not on the tape).
struct Var {
  double v = 0.0;
  std::int32_t idx = -1;

  Var() = default;
  Var(double c) : v(c) {}  // NOLINT: constants lift implicitly
};

/// Registers an input (leaf) variable on the active tape.
Var lift(double value);

/// Adjoints of every node with respect to `result`; read the entries at the
/// indices of your leaf Vars.
std::vector<double> backward(const Var& result);

namespace detail {
inline Var binary(double v, double w0, std::int32_t p0, double w1,
                  std::int32_t p1) {
  Var r;
  r.v = v;
  Tape* t = Tape::active();
  if (t != nullptr && (p0 >= 0 || p1 >= 0)) {
    r.idx = t->push(p0 >= 0 ? w0 : 0.0, p0, p1 >= 0 ? w1 : 0.0, p1);
  }
  return r;
}
inline Var unary(double v, double w, std::int32_t p) {
  return binary(v, w, p, 0.0, -1);
}
}  // namespace detail

inline Var operator+(const Var& a, const Var& b) {
  return detail::binary(a.v + b.v, 1.0, a.idx, 1.0, b.idx);
}
inline Var operator-(const Var& a, const Var& b) {
  return detail::binary(a.v - b.v, 1.0, a.idx, -1.0, b.idx);
}
inline Var operator*(const Var& a, const Var& b) {
  return detail::binary(a.v * b.v, b.v, a.idx, a.v, b.idx);
}
inline Var operator/(const Var& a, const Var& b) {
  const double q = a.v / b.v;
  return detail::binary(q, 1.0 / b.v, a.idx, -q / b.v, b.idx);
}
inline Var operator-(const Var& a) { return detail::unary(-a.v, -1.0, a.idx); }

inline Var operator+(const Var& a, double c) {
  return detail::unary(a.v + c, 1.0, a.idx);
}
inline Var operator+(double c, const Var& a) { return a + c; }
inline Var operator-(const Var& a, double c) {
  return detail::unary(a.v - c, 1.0, a.idx);
}
inline Var operator-(double c, const Var& a) {
  return detail::unary(c - a.v, -1.0, a.idx);
}
inline Var operator*(const Var& a, double c) {
  return detail::unary(a.v * c, c, a.idx);
}
inline Var operator*(double c, const Var& a) { return a * c; }
inline Var operator/(const Var& a, double c) {
  return detail::unary(a.v / c, 1.0 / c, a.idx);
}
inline Var operator/(double c, const Var& a) {
  const double q = c / a.v;
  return detail::unary(q, -q / a.v, a.idx);
}

inline Var exp(const Var& a) {
  const double e = std::exp(a.v);
  return detail::unary(e, e, a.idx);
}
inline Var log(const Var& a) {
  return detail::unary(std::log(a.v), 1.0 / a.v, a.idx);
}
inline Var sqrt(const Var& a) {
  const double r = std::sqrt(a.v);
  return detail::unary(r, 0.5 / r, a.idx);
}
inline Var sigmoid(const Var& a) {
  const double s = 1.0 / (1.0 + std::exp(-a.v));
  return detail::unary(s, s * (1.0 - s), a.idx);
}
inline Var tanh(const Var& a) {
  const double th = std::tanh(a.v);
  return detail::unary(th, 1.0 - th * th, a.idx);
}

}  // namespace bc::ad
