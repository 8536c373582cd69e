#pragma once

// Shared internals for the autodiff core (tensor.cpp, conv.cpp).

#include <functional>
#include <vector>

#include "sar/tensor.hpp"

namespace sar::detail {

struct Node {
  Shape shape;
  std::vector<double> value;
  std::vector<double> grad;  // empty until first accumulation
  bool requires_grad = false;

  void ensure_grad() {
    if (grad.empty()) grad.assign(value.size(), 0.0);
  }
};

using NodePtr = std::shared_ptr<Node>;

NodePtr make_node(Shape shape, std::vector<double> value, bool requires_grad);

bool recording();

// Push a backward closure onto the active tape. Closures run in reverse
// push order and must themselves check whether the output ever received a
// gradient (nodes not reachable from the loss never do).
void record(std::function<void()> fn);

// Output of an op requires grad iff recording is on and an input does.
inline bool out_requires(const NodePtr& a) { return recording() && a->requires_grad; }
inline bool out_requires(const NodePtr& a, const NodePtr& b) {
  return recording() && (a->requires_grad || b->requires_grad);
}

}  // namespace sar::detail
