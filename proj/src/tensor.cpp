#include "hdnet/tensor.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include "hdnet/error.hpp"

namespace hdnet {

namespace {

std::atomic<std::uint64_t> g_sequence{0};
thread_local bool t_grad_enabled = true;
thread_local KinkTrace* t_kink_trace = nullptr;

void check_finite(const std::vector<double>& values, const std::string& op) {
#ifndef NDEBUG
  for (double v : values) {
    if (!std::isfinite(v)) throw NumericError("non-finite value produced by " + op);
  }
#else
  (void)values;
  (void)op;
#endif
}

void accumulate(std::vector<double>& dst, const std::vector<double>& src) {
  for (std::size_t i = 0; i < src.size(); ++i) dst[i] += src[i];
}

}  // namespace

std::size_t shape_numel(const Shape& shape) {
  std::size_t n = 1;
  for (std::size_t d : shape) n *= d;
  return n;
}

std::string shape_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
  os << ']';
  return os.str();
}

Tensor::Tensor() : impl_(std::make_shared<TensorImpl>()) {}

Tensor::Tensor(Shape shape, double fill) : impl_(std::make_shared<TensorImpl>()) {
  impl_->data.assign(shape_numel(shape), fill);
  impl_->shape = std::move(shape);
}

Tensor::Tensor(Shape shape, std::vector<double> values)
    : impl_(std::make_shared<TensorImpl>()) {
  if (shape_numel(shape) != values.size()) {
    throw DimensionError("shape " + shape_string(shape) + " holds " +
                         std::to_string(shape_numel(shape)) + " elements, got " +
                         std::to_string(values.size()));
  }
  impl_->shape = std::move(shape);
  impl_->data = std::move(values);
}

std::size_t Tensor::dim(std::size_t axis) const {
  if (axis >= rank()) {
    throw DimensionError("axis " + std::to_string(axis) + " out of range for shape " +
                         shape_string(shape()));
  }
  return impl_->shape[axis];
}

double Tensor::item() const {
  if (numel() != 1) throw ContractError("item() on non-scalar tensor " + shape_string(shape()));
  return impl_->data[0];
}

double Tensor::at(std::size_t n, std::size_t c, std::size_t y, std::size_t x) const {
  const auto& s = impl_->shape;
  return impl_->data[((n * s[1] + c) * s[2] + y) * s[3] + x];
}

double& Tensor::at(std::size_t n, std::size_t c, std::size_t y, std::size_t x) {
  const auto& s = impl_->shape;
  return impl_->data[((n * s[1] + c) * s[2] + y) * s[3] + x];
}

Tensor& Tensor::set_requires_grad(bool on) {
  impl_->requires_grad = on;
  return *this;
}

const std::vector<double>& Tensor::grad() const {
  if (!impl_->grad) throw ContractError("tensor has no gradient");
  return *impl_->grad;
}

void Tensor::zero_grad() { impl_->grad = std::vector<double>(numel(), 0.0); }

Tensor Tensor::detach() const { return Tensor(shape(), values()); }

Tensor Tensor::clone() const {
  Tensor t(shape(), values());
  t.set_requires_grad(requires_grad());
  return t;
}

Tensor Tensor::from_op(Shape shape, std::vector<double> values, std::string op,
                       std::vector<Tensor> inputs, BackwardFn backward) {
  check_finite(values, op);
  Tensor out(std::move(shape), std::move(values));
  if (!t_grad_enabled) return out;
  bool any = std::any_of(inputs.begin(), inputs.end(),
                         [](const Tensor& t) { return t.requires_grad(); });
  if (!any) return out;
  auto node = std::make_shared<TapeNode>();
  node->op = std::move(op);
  node->inputs.reserve(inputs.size());
  for (auto& in : inputs) node->inputs.push_back(in.impl_);
  node->backward = std::move(backward);
  node->sequence = g_sequence.fetch_add(1);
  out.impl_->requires_grad = true;
  out.impl_->node = std::move(node);
  return out;
}

void backward(const Tensor& root) {
  if (root.numel() != 1) {
    throw ContractError("backward root must be scalar, got shape " + shape_string(root.shape()));
  }
  if (!root.requires_grad()) throw ContractError("backward root is not connected to the tape");
  if (root.is_leaf()) {
    auto& g = root.impl()->grad;
    if (!g) g = std::vector<double>(1, 0.0);
    (*g)[0] += 1.0;
    return;
  }

  std::vector<TapeNode*> order;
  std::unordered_set<TapeNode*> seen;
  std::vector<TapeNode*> stack{root.node().get()};
  seen.insert(stack.back());
  while (!stack.empty()) {
    TapeNode* n = stack.back();
    stack.pop_back();
    order.push_back(n);
    for (const auto& in : n->inputs) {
      TapeNode* child = in->node.get();
      if (child && seen.insert(child).second) stack.push_back(child);
    }
  }
  std::sort(order.begin(), order.end(),
            [](const TapeNode* a, const TapeNode* b) { return a->sequence > b->sequence; });

  std::unordered_map<TapeNode*, std::vector<double>> pending;
  pending[root.node().get()] = std::vector<double>(1, 1.0);
  for (TapeNode* n : order) {
    auto it = pending.find(n);
    if (it == pending.end()) continue;
    std::vector<double> grad_out = std::move(it->second);
    pending.erase(it);
    auto grads = n->backward(grad_out);
    for (std::size_t i = 0; i < n->inputs.size() && i < grads.size(); ++i) {
      const auto& in = n->inputs[i];
      if (!in->requires_grad || grads[i].empty()) continue;
      if (in->node) {
        auto [slot, inserted] = pending.try_emplace(in->node.get());
        if (inserted) {
          slot->second = std::move(grads[i]);
        } else {
          accumulate(slot->second, grads[i]);
        }
      } else {
        if (!in->grad) in->grad = std::vector<double>(in->data.size(), 0.0);
        accumulate(*in->grad, grads[i]);
      }
    }
  }
}

bool grad_enabled() { return t_grad_enabled; }

NoGradGuard::NoGradGuard() : previous_(t_grad_enabled) { t_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { t_grad_enabled = previous_; }

void KinkTrace::record_branch(bool positive) {
  if (!branches_) return;
  hash_ ^= positive ? 0x9e3779b97f4a7c15ull : 0x2545f4914f6cdd1dull;
  hash_ *= 1099511628211ull;
  ++events_;
}

void KinkTrace::record_index(std::uint64_t index) {
  hash_ ^= index + 0x632be59bd9b4e019ull;
  hash_ *= 1099511628211ull;
  ++events_;
}

KinkTrace* active_kink_trace() { return t_kink_trace; }

KinkTraceScope::KinkTraceScope(KinkTrace& trace) : previous_(t_kink_trace) {
  t_kink_trace = &trace;
}
KinkTraceScope::~KinkTraceScope() { t_kink_trace = previous_; }

}  // namespace hdnet
