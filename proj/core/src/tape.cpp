#include "boltzcurve/tape.hpp"

#include <stdexcept>

namespace bc::ad {

Tape*& Tape::active() {
  thread_local Tape* current = nullptr;
  return current;
}

Var lift(double value) {
  Tape* t = Tape::active();
  if (t == nullptr) {
    throw std::logic_error("ad::lift called without an active tape scope");
  }
  Var r;
  r.v = value;
  r.idx = t->push_leaf();
  return r;
}

std::vector<double> backward(const Var& result) {
  Tape* t = Tape::active();
  if (t == nullptr) {
    throw std::logic_error("ad::backward called without an active tape scope");
  }
  std::vector<double> adj(t->size(), 0.0);
  if (result.idx < 0) {
    return adj;  // constant result: all-zero gradient
  }
  adj[static_cast<std::size_t>(result.idx)] = 1.0;
  const auto& nodes = t->nodes();
  for (std::int32_t i = result.idx; i >= 0; --i) {
    const double a = adj[static_cast<std::size_t>(i)];
    if (a == 0.0) continue;
    const Tape::Node& n = nodes[static_cast<std::size_t>(i)];
    if (n.p0 >= 0) adj[static_cast<std::size_t>(n.p0)] += n.w0 * a;
    if (n.p1 >= 0) adj[static_cast<std::size_t>(n.p1)] += n.w1 * a;
  }
  return adj;
}

}  // namespace bc::ad
