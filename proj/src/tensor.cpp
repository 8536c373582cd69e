#include "sar/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <set>

#include "tensor_internal.hpp"

namespace sar {

std::string shape_str(const Shape& s) {
  std::string out = "[";
  for (size_t i = 0; i < s.size(); ++i) {
    if (i) out += ",";
    out += std::to_string(s[i]);
  }
  return out + "]";
}

int64_t shape_numel(const Shape& s) {
  int64_t n = 1;
  for (int64_t d : s) n *= d;
  return n;
}

namespace detail {

namespace {
thread_local std::vector<std::function<void()>> g_tape;
thread_local bool g_grad_enabled = true;
}  // namespace

NodePtr make_node(Shape shape, std::vector<double> value, bool requires_grad) {
  auto n = std::make_shared<Node>();
  n->shape = std::move(shape);
  n->value = std::move(value);
  n->requires_grad = requires_grad;
  return n;
}

bool recording() { return g_grad_enabled; }

void record(std::function<void()> fn) { g_tape.push_back(std::move(fn)); }

}  // namespace detail

using detail::NodePtr;

// ---------------------------------------------------------------------------
// Tensor handle

Tensor Tensor::wrap(std::shared_ptr<detail::Node> n) {
  Tensor t;
  t.n_ = std::move(n);
  return t;
}

Tensor Tensor::zeros(const Shape& shape, bool requires_grad) {
  return full(shape, 0.0, requires_grad);
}

Tensor Tensor::full(const Shape& shape, double value, bool requires_grad) {
  for (int64_t d : shape)
    if (d <= 0) throw std::invalid_argument("tensor dims must be positive, got " + shape_str(shape));
  return wrap(detail::make_node(shape, std::vector<double>(shape_numel(shape), value),
                                requires_grad));
}

Tensor Tensor::from_data(const Shape& shape, std::vector<double> data, bool requires_grad) {
  if (shape_numel(shape) != static_cast<int64_t>(data.size()))
    throw std::invalid_argument("data size " + std::to_string(data.size()) +
                                " does not match shape " + shape_str(shape));
  return wrap(detail::make_node(shape, std::move(data), requires_grad));
}

Tensor Tensor::scalar(double value, bool requires_grad) {
  return wrap(detail::make_node({}, {value}, requires_grad));
}

const Shape& Tensor::shape() const { return n_->shape; }
int64_t Tensor::size() const { return static_cast<int64_t>(n_->value.size()); }
int64_t Tensor::ndim() const { return static_cast<int64_t>(n_->shape.size()); }
int64_t Tensor::dim(int64_t i) const { return n_->shape.at(i); }

bool Tensor::requires_grad() const { return n_->requires_grad; }
void Tensor::set_requires_grad(bool rg) { n_->requires_grad = rg; }

const std::vector<double>& Tensor::values() const { return n_->value; }
std::vector<double>& Tensor::raw_values() { return n_->value; }

double Tensor::item() const {
  if (size() != 1)
    throw std::invalid_argument("item() on non-scalar tensor of shape " + shape_str(shape()));
  return n_->value[0];
}

double Tensor::at(std::initializer_list<int64_t> idx) const {
  if (static_cast<int64_t>(idx.size()) != ndim())
    throw std::invalid_argument("index rank mismatch for shape " + shape_str(shape()));
  int64_t flat = 0;
  int64_t d = 0;
  for (int64_t i : idx) {
    if (i < 0 || i >= n_->shape[d])
      throw std::out_of_range("index out of range for shape " + shape_str(shape()));
    flat = flat * n_->shape[d] + i;
    ++d;
  }
  return n_->value[flat];
}

bool Tensor::has_grad() const { return !n_->grad.empty(); }

const std::vector<double>& Tensor::grad() const {
  if (n_->grad.empty())
    throw std::runtime_error("tensor has no gradient (backward not run or not reachable)");
  return n_->grad;
}

std::vector<double>& Tensor::raw_grad() {
  n_->ensure_grad();
  return n_->grad;
}

void Tensor::zero_grad() { n_->grad.assign(n_->value.size(), 0.0); }

Tensor Tensor::detach() const {
  auto n = detail::make_node(n_->shape, n_->value, false);
  return wrap(n);
}

Tensor Tensor::clone() const {
  return wrap(detail::make_node(n_->shape, n_->value, n_->requires_grad));
}

// ---------------------------------------------------------------------------
// Tape

NoGradGuard::NoGradGuard() : prev_(detail::g_grad_enabled) { detail::g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { detail::g_grad_enabled = prev_; }

bool grad_enabled() { return detail::g_grad_enabled; }

size_t tape_size() { return detail::g_tape.size(); }
void clear_tape() { detail::g_tape.clear(); }

void backward(const Tensor& loss) {
  if (loss.size() != 1)
    throw std::invalid_argument("backward() needs a scalar loss, got shape " +
                                shape_str(loss.shape()));
  if (detail::g_tape.empty())
    throw std::runtime_error("backward() on an empty tape (re-run the forward pass)");
  auto n = loss.node();
  n->ensure_grad();
  n->grad[0] += 1.0;
  for (auto it = detail::g_tape.rbegin(); it != detail::g_tape.rend(); ++it) (*it)();
  detail::g_tape.clear();
}

// ---------------------------------------------------------------------------
// Broadcasting machinery

namespace {

Shape broadcast_shape(const Shape& a, const Shape& b) {
  size_t nd = std::max(a.size(), b.size());
  Shape out(nd);
  for (size_t i = 0; i < nd; ++i) {
    int64_t da = i < nd - a.size() ? 1 : a[i - (nd - a.size())];
    int64_t db = i < nd - b.size() ? 1 : b[i - (nd - b.size())];
    if (da != db && da != 1 && db != 1)
      throw std::invalid_argument("shapes not broadcastable: " + shape_str(a) + " vs " +
                                  shape_str(b));
    out[i] = std::max(da, db);
  }
  return out;
}

// Per-out-dim element strides of `in` aligned to `out` (0 on broadcast dims).
std::vector<int64_t> broadcast_strides(const Shape& in, const Shape& out) {
  std::vector<int64_t> st(out.size(), 0);
  int64_t acc = 1;
  for (int64_t i = static_cast<int64_t>(in.size()) - 1; i >= 0; --i) {
    int64_t oi = i + static_cast<int64_t>(out.size() - in.size());
    st[oi] = (in[i] == 1 && out[oi] != 1) ? 0 : acc;
    acc *= in[i];
  }
  return st;
}

// Calls f(out_idx, a_idx, b_idx) for every element of out_shape in linear
// order, with a/b indices advanced odometer-style.
template <class F>
void for_each_pair(const Shape& out_shape, const std::vector<int64_t>& sa,
                   const std::vector<int64_t>& sb, F&& f) {
  int64_t n = shape_numel(out_shape);
  int64_t nd = static_cast<int64_t>(out_shape.size());
  std::vector<int64_t> coord(nd, 0);
  int64_t ai = 0, bi = 0;
  for (int64_t i = 0; i < n; ++i) {
    f(i, ai, bi);
    for (int64_t d = nd - 1; d >= 0; --d) {
      ++coord[d];
      ai += sa[d];
      bi += sb[d];
      if (coord[d] < out_shape[d]) break;
      ai -= sa[d] * out_shape[d];
      bi -= sb[d] * out_shape[d];
      coord[d] = 0;
    }
  }
}

enum class BinOp { Add, Sub, Mul, Div };

Tensor binary_op(const Tensor& a, const Tensor& b, BinOp op) {
  auto an = a.node();
  auto bn = b.node();
  const auto& av = an->value;
  const auto& bv = bn->value;
  Shape out_shape;
  std::vector<double> out;

  bool same = an->shape == bn->shape;
  if (same) {
    out_shape = an->shape;
    out.resize(av.size());
    switch (op) {
      case BinOp::Add:
        for (size_t i = 0; i < av.size(); ++i) out[i] = av[i] + bv[i];
        break;
      case BinOp::Sub:
        for (size_t i = 0; i < av.size(); ++i) out[i] = av[i] - bv[i];
        break;
      case BinOp::Mul:
        for (size_t i = 0; i < av.size(); ++i) out[i] = av[i] * bv[i];
        break;
      case BinOp::Div:
        for (size_t i = 0; i < av.size(); ++i) out[i] = av[i] / bv[i];
        break;
    }
  } else {
    out_shape = broadcast_shape(an->shape, bn->shape);
    auto sa = broadcast_strides(an->shape, out_shape);
    auto sb = broadcast_strides(bn->shape, out_shape);
    out.resize(shape_numel(out_shape));
    switch (op) {
      case BinOp::Add:
        for_each_pair(out_shape, sa, sb,
                      [&](int64_t i, int64_t ai, int64_t bi) { out[i] = av[ai] + bv[bi]; });
        break;
      case BinOp::Sub:
        for_each_pair(out_shape, sa, sb,
                      [&](int64_t i, int64_t ai, int64_t bi) { out[i] = av[ai] - bv[bi]; });
        break;
      case BinOp::Mul:
        for_each_pair(out_shape, sa, sb,
                      [&](int64_t i, int64_t ai, int64_t bi) { out[i] = av[ai] * bv[bi]; });
        break;
      case BinOp::Div:
        for_each_pair(out_shape, sa, sb,
                      [&](int64_t i, int64_t ai, int64_t bi) { out[i] = av[ai] / bv[bi]; });
        break;
    }
  }

  auto on = detail::make_node(std::move(out_shape), std::move(out),
                              detail::out_requires(an, bn));
  if (on->requires_grad) {
    detail::record([an, bn, on, op, same]() {
      if (on->grad.empty()) return;
      const auto& g = on->grad;
      const auto& av = an->value;
      const auto& bv = bn->value;
      bool need_a = an->requires_grad;
      bool need_b = bn->requires_grad;
      if (need_a) an->ensure_grad();
      if (need_b) bn->ensure_grad();
      auto acc = [&](int64_t i, int64_t ai, int64_t bi) {
        switch (op) {
          case BinOp::Add:
            if (need_a) an->grad[ai] += g[i];
            if (need_b) bn->grad[bi] += g[i];
            break;
          case BinOp::Sub:
            if (need_a) an->grad[ai] += g[i];
            if (need_b) bn->grad[bi] -= g[i];
            break;
          case BinOp::Mul:
            if (need_a) an->grad[ai] += g[i] * bv[bi];
            if (need_b) bn->grad[bi] += g[i] * av[ai];
            break;
          case BinOp::Div:
            if (need_a) an->grad[ai] += g[i] / bv[bi];
            if (need_b) bn->grad[bi] -= g[i] * av[ai] / (bv[bi] * bv[bi]);
            break;
        }
      };
      if (same) {
        for (int64_t i = 0; i < static_cast<int64_t>(g.size()); ++i) acc(i, i, i);
      } else {
        auto sa = broadcast_strides(an->shape, on->shape);
        auto sb = broadcast_strides(bn->shape, on->shape);
        for_each_pair(on->shape, sa, sb, acc);
      }
    });
  }
  return Tensor::wrap(on);
}

// Unary op template: fwd computes value, bwd returns d(out)/d(x) given
// (x_value, out_value).
template <class Fwd, class Bwd>
Tensor unary_op(const Tensor& x, Fwd fwd, Bwd bwd) {
  auto xn = x.node();
  std::vector<double> out(xn->value.size());
  for (size_t i = 0; i < out.size(); ++i) out[i] = fwd(xn->value[i]);
  auto on = detail::make_node(xn->shape, std::move(out), detail::out_requires(xn));
  if (on->requires_grad) {
    detail::record([xn, on, bwd]() {
      if (on->grad.empty() || !xn->requires_grad) return;
      xn->ensure_grad();
      for (size_t i = 0; i < on->grad.size(); ++i)
        xn->grad[i] += on->grad[i] * bwd(xn->value[i], on->value[i]);
    });
  }
  return Tensor::wrap(on);
}

}  // namespace

// ---------------------------------------------------------------------------
// Elementwise

Tensor add(const Tensor& a, const Tensor& b) { return binary_op(a, b, BinOp::Add); }
Tensor sub(const Tensor& a, const Tensor& b) { return binary_op(a, b, BinOp::Sub); }
Tensor mul(const Tensor& a, const Tensor& b) { return binary_op(a, b, BinOp::Mul); }
Tensor div(const Tensor& a, const Tensor& b) { return binary_op(a, b, BinOp::Div); }

Tensor add_scalar(const Tensor& a, double s) {
  return unary_op(
      a, [s](double v) { return v + s; }, [](double, double) { return 1.0; });
}

Tensor mul_scalar(const Tensor& a, double s) {
  return unary_op(
      a, [s](double v) { return v * s; }, [s](double, double) { return s; });
}

Tensor neg(const Tensor& a) { return mul_scalar(a, -1.0); }

Tensor relu(const Tensor& x) {
  return unary_op(
      x, [](double v) { return v > 0.0 ? v : 0.0; },
      [](double v, double) { return v > 0.0 ? 1.0 : 0.0; });
}

Tensor tanh(const Tensor& x) {
  return unary_op(
      x, [](double v) { return std::tanh(v); },
      [](double, double y) { return 1.0 - y * y; });
}

Tensor exp(const Tensor& x) {
  return unary_op(
      x, [](double v) { return std::exp(v); }, [](double, double y) { return y; });
}

Tensor log(const Tensor& x) {
  for (double v : x.values())
    if (!(v > 0.0))
      throw std::domain_error("log of non-positive value " + std::to_string(v));
  return unary_op(
      x, [](double v) { return std::log(v); }, [](double v, double) { return 1.0 / v; });
}

Tensor softplus(const Tensor& x) {
  // log(1 + e^x), evaluated on the non-overflowing side.
  return unary_op(
      x,
      [](double v) { return v > 0.0 ? v + std::log1p(std::exp(-v)) : std::log1p(std::exp(v)); },
      [](double v, double) { return 1.0 / (1.0 + std::exp(-v)); });
}

Tensor sqrt(const Tensor& x) {
  return unary_op(
      x, [](double v) { return std::sqrt(v); },
      [](double, double y) { return 0.5 / y; });
}

Tensor square(const Tensor& x) {
  return unary_op(
      x, [](double v) { return v * v; }, [](double v, double) { return 2.0 * v; });
}

Tensor min_elementwise(const Tensor& a, const Tensor& b) {
  auto an = a.node();
  auto bn = b.node();
  if (an->shape != bn->shape)
    throw std::invalid_argument("min_elementwise shape mismatch: " + shape_str(an->shape) +
                                " vs " + shape_str(bn->shape));
  std::vector<double> out(an->value.size());
  for (size_t i = 0; i < out.size(); ++i) out[i] = std::min(an->value[i], bn->value[i]);
  auto on = detail::make_node(an->shape, std::move(out), detail::out_requires(an, bn));
  if (on->requires_grad) {
    detail::record([an, bn, on]() {
      if (on->grad.empty()) return;
      if (an->requires_grad) an->ensure_grad();
      if (bn->requires_grad) bn->ensure_grad();
      for (size_t i = 0; i < on->grad.size(); ++i) {
        // ties route to the first argument
        if (an->value[i] <= bn->value[i]) {
          if (an->requires_grad) an->grad[i] += on->grad[i];
        } else if (bn->requires_grad) {
          bn->grad[i] += on->grad[i];
        }
      }
    });
  }
  return Tensor::wrap(on);
}

Tensor clip(const Tensor& x, double lo, double hi) {
  if (!(lo <= hi)) throw std::invalid_argument("clip bounds inverted");
  return unary_op(
      x, [lo, hi](double v) { return std::min(std::max(v, lo), hi); },
      [lo, hi](double v, double) { return (v >= lo && v <= hi) ? 1.0 : 0.0; });
}

// ---------------------------------------------------------------------------
// Shape ops

Tensor reshape(const Tensor& x, const Shape& shape) {
  auto xn = x.node();
  if (shape_numel(shape) != static_cast<int64_t>(xn->value.size()))
    throw std::invalid_argument("reshape " + shape_str(xn->shape) + " -> " + shape_str(shape) +
                                " changes element count");
  auto on = detail::make_node(shape, xn->value, detail::out_requires(xn));
  if (on->requires_grad) {
    detail::record([xn, on]() {
      if (on->grad.empty() || !xn->requires_grad) return;
      xn->ensure_grad();
      for (size_t i = 0; i < on->grad.size(); ++i) xn->grad[i] += on->grad[i];
    });
  }
  return Tensor::wrap(on);
}

Tensor broadcast_to(const Tensor& x, const Shape& shape) {
  auto xn = x.node();
  Shape check = broadcast_shape(xn->shape, shape);
  if (check != shape)
    throw std::invalid_argument("cannot broadcast " + shape_str(xn->shape) + " to " +
                                shape_str(shape));
  auto st = broadcast_strides(xn->shape, shape);
  std::vector<double> out(shape_numel(shape));
  std::vector<int64_t> zero(shape.size(), 0);
  for_each_pair(shape, st, zero,
                [&](int64_t i, int64_t xi, int64_t) { out[i] = xn->value[xi]; });
  auto on = detail::make_node(shape, std::move(out), detail::out_requires(xn));
  if (on->requires_grad) {
    detail::record([xn, on]() {
      if (on->grad.empty() || !xn->requires_grad) return;
      xn->ensure_grad();
      auto st = broadcast_strides(xn->shape, on->shape);
      std::vector<int64_t> zero(on->shape.size(), 0);
      for_each_pair(on->shape, st, zero,
                    [&](int64_t i, int64_t xi, int64_t) { xn->grad[xi] += on->grad[i]; });
    });
  }
  return Tensor::wrap(on);
}

Tensor concat_lastdim(const Tensor& a, const Tensor& b) {
  auto an = a.node();
  auto bn = b.node();
  if (an->shape.size() != bn->shape.size() || an->shape.empty())
    throw std::invalid_argument("concat_lastdim rank mismatch: " + shape_str(an->shape) +
                                " vs " + shape_str(bn->shape));
  for (size_t i = 0; i + 1 < an->shape.size(); ++i)
    if (an->shape[i] != bn->shape[i])
      throw std::invalid_argument("concat_lastdim shape mismatch: " + shape_str(an->shape) +
                                  " vs " + shape_str(bn->shape));
  int64_t la = an->shape.back(), lb = bn->shape.back();
  int64_t rows = shape_numel(an->shape) / la;
  Shape out_shape = an->shape;
  out_shape.back() = la + lb;
  std::vector<double> out(rows * (la + lb));
  for (int64_t r = 0; r < rows; ++r) {
    std::copy_n(an->value.begin() + r * la, la, out.begin() + r * (la + lb));
    std::copy_n(bn->value.begin() + r * lb, lb, out.begin() + r * (la + lb) + la);
  }
  auto on = detail::make_node(std::move(out_shape), std::move(out),
                              detail::out_requires(an, bn));
  if (on->requires_grad) {
    detail::record([an, bn, on, rows, la, lb]() {
      if (on->grad.empty()) return;
      if (an->requires_grad) {
        an->ensure_grad();
        for (int64_t r = 0; r < rows; ++r)
          for (int64_t i = 0; i < la; ++i) an->grad[r * la + i] += on->grad[r * (la + lb) + i];
      }
      if (bn->requires_grad) {
        bn->ensure_grad();
        for (int64_t r = 0; r < rows; ++r)
          for (int64_t i = 0; i < lb; ++i)
            bn->grad[r * lb + i] += on->grad[r * (la + lb) + la + i];
      }
    });
  }
  return Tensor::wrap(on);
}

// ---------------------------------------------------------------------------
// Reductions

Tensor sum_all(const Tensor& x) {
  auto xn = x.node();
  double s = 0.0;
  for (double v : xn->value) s += v;
  auto on = detail::make_node({}, {s}, detail::out_requires(xn));
  if (on->requires_grad) {
    detail::record([xn, on]() {
      if (on->grad.empty() || !xn->requires_grad) return;
      xn->ensure_grad();
      for (auto& g : xn->grad) g += on->grad[0];
    });
  }
  return Tensor::wrap(on);
}

Tensor mean_all(const Tensor& x) {
  auto xn = x.node();
  double s = 0.0;
  for (double v : xn->value) s += v;
  double inv = 1.0 / static_cast<double>(xn->value.size());
  auto on = detail::make_node({}, {s * inv}, detail::out_requires(xn));
  if (on->requires_grad) {
    detail::record([xn, on, inv]() {
      if (on->grad.empty() || !xn->requires_grad) return;
      xn->ensure_grad();
      for (auto& g : xn->grad) g += on->grad[0] * inv;
    });
  }
  return Tensor::wrap(on);
}

namespace {

struct ReducePlan {
  Shape out_shape;          // with keepdims applied
  std::vector<int64_t> out_idx;  // input linear index -> output linear index
  int64_t count = 1;        // reduced element count
};

ReducePlan reduce_plan(const Shape& in, const std::vector<int64_t>& axes, bool keepdims) {
  std::set<int64_t> ax;
  for (int64_t a : axes) {
    if (a < 0 || a >= static_cast<int64_t>(in.size()))
      throw std::invalid_argument("reduce axis " + std::to_string(a) + " out of range for " +
                                  shape_str(in));
    ax.insert(a);
  }
  ReducePlan plan;
  Shape kept = in;
  for (int64_t a : ax) {
    plan.count *= in[a];
    kept[a] = 1;
  }
  if (keepdims) {
    plan.out_shape = kept;
  } else {
    for (size_t i = 0; i < in.size(); ++i)
      if (!ax.count(static_cast<int64_t>(i))) plan.out_shape.push_back(in[i]);
  }
  // out strides over the kept-dims view
  std::vector<int64_t> ost(in.size(), 0);
  int64_t acc = 1;
  for (int64_t i = static_cast<int64_t>(in.size()) - 1; i >= 0; --i) {
    if (kept[i] != 1 || in[i] == 1) {
      ost[i] = acc;
      acc *= kept[i];
    }
  }
  int64_t n = shape_numel(in);
  plan.out_idx.resize(n);
  std::vector<int64_t> coord(in.size(), 0);
  int64_t oi = 0;
  for (int64_t i = 0; i < n; ++i) {
    plan.out_idx[i] = oi;
    for (int64_t d = static_cast<int64_t>(in.size()) - 1; d >= 0; --d) {
      ++coord[d];
      oi += ost[d];
      if (coord[d] < in[d]) break;
      oi -= ost[d] * in[d];
      coord[d] = 0;
    }
  }
  return plan;
}

Tensor reduce_impl(const Tensor& x, const std::vector<int64_t>& axes, bool keepdims,
                   bool mean) {
  auto xn = x.node();
  auto plan = reduce_plan(xn->shape, axes, keepdims);
  double scale = mean ? 1.0 / static_cast<double>(plan.count) : 1.0;
  std::vector<double> out(shape_numel(plan.out_shape), 0.0);
  for (size_t i = 0; i < xn->value.size(); ++i) out[plan.out_idx[i]] += xn->value[i];
  if (mean)
    for (auto& v : out) v *= scale;
  auto on =
      detail::make_node(plan.out_shape, std::move(out), detail::out_requires(xn));
  if (on->requires_grad) {
    auto out_idx = std::make_shared<std::vector<int64_t>>(std::move(plan.out_idx));
    detail::record([xn, on, out_idx, scale]() {
      if (on->grad.empty() || !xn->requires_grad) return;
      xn->ensure_grad();
      for (size_t i = 0; i < xn->grad.size(); ++i)
        xn->grad[i] += on->grad[(*out_idx)[i]] * scale;
    });
  }
  return Tensor::wrap(on);
}

}  // namespace

Tensor reduce_sum(const Tensor& x, const std::vector<int64_t>& axes, bool keepdims) {
  return reduce_impl(x, axes, keepdims, false);
}

Tensor reduce_mean(const Tensor& x, const std::vector<int64_t>& axes, bool keepdims) {
  return reduce_impl(x, axes, keepdims, true);
}

Tensor max_lastdim_detached(const Tensor& x) {
  auto xn = x.node();
  if (xn->shape.empty())
    throw std::invalid_argument("max_lastdim_detached needs ndim >= 1");
  int64_t cols = xn->shape.back();
  int64_t rows = static_cast<int64_t>(xn->value.size()) / cols;
  Shape out_shape = xn->shape;
  out_shape.back() = 1;
  std::vector<double> out(rows);
  for (int64_t r = 0; r < rows; ++r) {
    double m = xn->value[r * cols];
    for (int64_t c = 1; c < cols; ++c) m = std::max(m, xn->value[r * cols + c]);
    out[r] = m;
  }
  return Tensor::wrap(detail::make_node(std::move(out_shape), std::move(out), false));
}

// ---------------------------------------------------------------------------
// Softmax family

namespace {
void check_finite_logits(const detail::NodePtr& xn, const char* what) {
  for (double v : xn->value)
    if (!std::isfinite(v)) throw NumericError(std::string(what) + ": non-finite logit");
}
}  // namespace

Tensor softmax_logits_to_probs(const Tensor& logits) {
  auto xn = logits.node();
  if (xn->shape.empty())
    throw std::invalid_argument("softmax needs ndim >= 1");
  check_finite_logits(xn, "softmax_logits_to_probs");
  int64_t cols = xn->shape.back();
  int64_t rows = static_cast<int64_t>(xn->value.size()) / cols;
  std::vector<double> out(xn->value.size());
  for (int64_t r = 0; r < rows; ++r) {
    const double* x = xn->value.data() + r * cols;
    double* p = out.data() + r * cols;
    double m = x[0];
    for (int64_t c = 1; c < cols; ++c) m = std::max(m, x[c]);
    double s = 0.0;
    for (int64_t c = 0; c < cols; ++c) {
      p[c] = std::exp(x[c] - m);
      s += p[c];
    }
    for (int64_t c = 0; c < cols; ++c) p[c] /= s;
  }
  auto on = detail::make_node(xn->shape, std::move(out), detail::out_requires(xn));
  if (on->requires_grad) {
    detail::record([xn, on, rows, cols]() {
      if (on->grad.empty() || !xn->requires_grad) return;
      xn->ensure_grad();
      for (int64_t r = 0; r < rows; ++r) {
        const double* p = on->value.data() + r * cols;
        const double* g = on->grad.data() + r * cols;
        double dot = 0.0;
        for (int64_t c = 0; c < cols; ++c) dot += g[c] * p[c];
        double* dx = xn->grad.data() + r * cols;
        for (int64_t c = 0; c < cols; ++c) dx[c] += p[c] * (g[c] - dot);
      }
    });
  }
  return Tensor::wrap(on);
}

Tensor log_softmax_lastdim(const Tensor& logits) {
  auto xn = logits.node();
  if (xn->shape.empty())
    throw std::invalid_argument("log_softmax needs ndim >= 1");
  check_finite_logits(xn, "log_softmax_lastdim");
  int64_t cols = xn->shape.back();
  int64_t rows = static_cast<int64_t>(xn->value.size()) / cols;
  std::vector<double> out(xn->value.size());
  for (int64_t r = 0; r < rows; ++r) {
    const double* x = xn->value.data() + r * cols;
    double* ls = out.data() + r * cols;
    double m = x[0];
    for (int64_t c = 1; c < cols; ++c) m = std::max(m, x[c]);
    double s = 0.0;
    for (int64_t c = 0; c < cols; ++c) s += std::exp(x[c] - m);
    double lse = m + std::log(s);
    for (int64_t c = 0; c < cols; ++c) ls[c] = x[c] - lse;
  }
  auto on = detail::make_node(xn->shape, std::move(out), detail::out_requires(xn));
  if (on->requires_grad) {
    detail::record([xn, on, rows, cols]() {
      if (on->grad.empty() || !xn->requires_grad) return;
      xn->ensure_grad();
      for (int64_t r = 0; r < rows; ++r) {
        const double* ls = on->value.data() + r * cols;
        const double* g = on->grad.data() + r * cols;
        double gsum = 0.0;
        for (int64_t c = 0; c < cols; ++c) gsum += g[c];
        double* dx = xn->grad.data() + r * cols;
        for (int64_t c = 0; c < cols; ++c) dx[c] += g[c] - std::exp(ls[c]) * gsum;
      }
    });
  }
  return Tensor::wrap(on);
}

Tensor take_per_row(const Tensor& x, const std::vector<int64_t>& idx) {
  auto xn = x.node();
  if (xn->shape.size() != 2)
    throw std::invalid_argument("take_per_row expects [B,A], got " + shape_str(xn->shape));
  int64_t rows = xn->shape[0], cols = xn->shape[1];
  if (static_cast<int64_t>(idx.size()) != rows)
    throw std::invalid_argument("take_per_row index count " + std::to_string(idx.size()) +
                                " != rows " + std::to_string(rows));
  std::vector<double> out(rows);
  for (int64_t r = 0; r < rows; ++r) {
    if (idx[r] < 0 || idx[r] >= cols)
      throw std::out_of_range("take_per_row index " + std::to_string(idx[r]) +
                              " out of range [0," + std::to_string(cols) + ")");
    out[r] = xn->value[r * cols + idx[r]];
  }
  auto on = detail::make_node({rows}, std::move(out), detail::out_requires(xn));
  if (on->requires_grad) {
    auto ix = std::make_shared<std::vector<int64_t>>(idx);
    detail::record([xn, on, ix, cols]() {
      if (on->grad.empty() || !xn->requires_grad) return;
      xn->ensure_grad();
      for (size_t r = 0; r < ix->size(); ++r)
        xn->grad[r * cols + (*ix)[r]] += on->grad[r];
    });
  }
  return Tensor::wrap(on);
}

Tensor index_select0(const Tensor& x, const std::vector<int64_t>& idx) {
  auto xn = x.node();
  if (xn->shape.empty())
    throw std::invalid_argument("index_select0 needs ndim >= 1");
  int64_t b = xn->shape[0];
  int64_t row = static_cast<int64_t>(xn->value.size()) / b;
  for (int64_t i : idx)
    if (i < 0 || i >= b)
      throw std::out_of_range("index_select0 index " + std::to_string(i) + " out of range [0," +
                              std::to_string(b) + ")");
  Shape out_shape = xn->shape;
  out_shape[0] = static_cast<int64_t>(idx.size());
  std::vector<double> out(idx.size() * row);
  for (size_t i = 0; i < idx.size(); ++i)
    std::copy_n(xn->value.begin() + idx[i] * row, row, out.begin() + i * row);
  auto on = detail::make_node(std::move(out_shape), std::move(out), detail::out_requires(xn));
  if (on->requires_grad) {
    auto ix = std::make_shared<std::vector<int64_t>>(idx);
    detail::record([xn, on, ix, row]() {
      if (on->grad.empty() || !xn->requires_grad) return;
      xn->ensure_grad();
      for (size_t i = 0; i < ix->size(); ++i)
        for (int64_t j = 0; j < row; ++j)
          xn->grad[(*ix)[i] * row + j] += on->grad[i * row + j];
    });
  }
  return Tensor::wrap(on);
}

// ---------------------------------------------------------------------------
// Channel statistics

std::pair<Tensor, Tensor> channel_stats(const Tensor& z) {
  if (z.ndim() != 4)
    throw std::invalid_argument("channel_stats expects [B,C,H,W], got " + shape_str(z.shape()));
  int64_t b = z.dim(0), c = z.dim(1);
  Tensor mu4 = reduce_mean(z, {2, 3}, true);
  Tensor centered = sub(z, mu4);
  Tensor var4 = reduce_mean(square(centered), {2, 3}, true);
  Tensor sig4 = sqrt(add_scalar(var4, kEpsStat));
  return {reshape(mu4, {b, c}), reshape(sig4, {b, c})};
}

}  // namespace sar
