#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace hdnet {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_string(const Shape& shape);

struct TensorImpl;

// Receives d(root)/d(output) and returns one gradient buffer per input.
// An empty buffer means "no contribution" for that input.
using BackwardFn =
    std::function<std::vector<std::vector<double>>(const std::vector<double>& grad_out)>;

// One recorded operation. Nodes are numbered by construction order, so sorting
// by sequence gives a topological order of the tape.
struct TapeNode {
  std::string op;
  std::vector<std::shared_ptr<TensorImpl>> inputs;
  BackwardFn backward;
  std::uint64_t sequence = 0;
};

struct TensorImpl {
  Shape shape;
  std::vector<double> data;
  bool requires_grad = false;
  std::optional<std::vector<double>> grad;
  std::shared_ptr<TapeNode> node;
};

// Dense row-major float64 array with an optional gradient slot. Copies share
// storage; use clone() for a deep copy.
class Tensor {
 public:
  Tensor();
  explicit Tensor(Shape shape, double fill = 0.0);
  Tensor(Shape shape, std::vector<double> values);

  static Tensor zeros(Shape shape) { return Tensor(std::move(shape), 0.0); }
  static Tensor ones(Shape shape) { return Tensor(std::move(shape), 1.0); }
  static Tensor scalar(double v) { return Tensor(Shape{1}, v); }

  const Shape& shape() const { return impl_->shape; }
  std::size_t dim(std::size_t axis) const;
  std::size_t rank() const { return impl_->shape.size(); }
  std::size_t numel() const { return impl_->data.size(); }

  std::span<double> data() { return impl_->data; }
  std::span<const double> data() const { return impl_->data; }
  const std::vector<double>& values() const { return impl_->data; }
  double item() const;

  // Element access for rank-4 [N,C,H,W] tensors.
  double at(std::size_t n, std::size_t c, std::size_t y, std::size_t x) const;
  double& at(std::size_t n, std::size_t c, std::size_t y, std::size_t x);

  bool requires_grad() const { return impl_->requires_grad; }
  Tensor& set_requires_grad(bool on);
  bool has_grad() const { return impl_->grad.has_value(); }
  // Throws ContractError when the gradient slot is empty.
  const std::vector<double>& grad() const;
  void zero_grad();
  void clear_grad() { impl_->grad.reset(); }

  bool is_leaf() const { return impl_->node == nullptr; }
  const std::shared_ptr<TapeNode>& node() const { return impl_->node; }

  // Same values, no tape history, requires_grad off.
  Tensor detach() const;
  Tensor clone() const;

  const std::shared_ptr<TensorImpl>& impl() const { return impl_; }
  bool same_storage(const Tensor& other) const { return impl_ == other.impl_; }

  // Records `node` as this tensor's producer. Used by operator implementations.
  static Tensor from_op(Shape shape, std::vector<double> values, std::string op,
                        std::vector<Tensor> inputs, BackwardFn backward);

 private:
  explicit Tensor(std::shared_ptr<TensorImpl> impl) : impl_(std::move(impl)) {}
  std::shared_ptr<TensorImpl> impl_;
};

// Reverse pass from a scalar root. Leaf gradients accumulate across calls.
void backward(const Tensor& root);

bool grad_enabled();

// Disables tape recording in its scope.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

// Records discrete forward decisions (activation branch, neighbour choice) so
// that finite differences can detect when a perturbation crosses one.
class KinkTrace {
 public:
  explicit KinkTrace(bool branches = true) : branches_(branches) {}
  void record_branch(bool positive);
  void record_index(std::uint64_t index);
  std::uint64_t fingerprint() const { return hash_; }
  std::size_t events() const { return events_; }

 private:
  std::uint64_t hash_ = 1469598103934665603ull;
  std::size_t events_ = 0;
  bool branches_ = true;
};

// Active trace for this thread, or nullptr.
KinkTrace* active_kink_trace();

class KinkTraceScope {
 public:
  explicit KinkTraceScope(KinkTrace& trace);
  ~KinkTraceScope();
  KinkTraceScope(const KinkTraceScope&) = delete;
  KinkTraceScope& operator=(const KinkTraceScope&) = delete;

 private:
  KinkTrace* previous_;
};

}  // namespace hdnet
