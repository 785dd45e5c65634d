#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace ear::diff {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_string(const Shape& shape);

namespace detail {

// One vertex of the dynamic compute graph. Leaves are created by the user;
// interior nodes are created by ops and own a backward closure that reads
// `grad` and accumulates into the parents' grads.
template <class T>
struct Node {
  Shape shape;
  std::vector<T> value;
  std::vector<T> grad;
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backward;
  const char* op = "leaf";

  bool is_leaf() const noexcept { return !backward; }
  std::span<T> ensure_grad();
};

}  // namespace detail

/// Dense row-major array with optional reverse-mode gradient tracking.
///
/// A Tensor is a cheap handle; copies share storage and graph identity.
/// Values are fixed once an op has produced them. Parameters (leaves with
/// requires_grad) are the only tensors mutated in place, and only between
/// forward passes.
template <class T>
class Tensor {
 public:
  using value_type = T;

  Tensor() = default;

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, T value, bool requires_grad = false);
  static Tensor from_vector(Shape shape, std::vector<T> values, bool requires_grad = false);
  static Tensor scalar(T value);

  bool defined() const noexcept { return node_ != nullptr; }
  const Shape& shape() const;
  std::size_t rank() const { return shape().size(); }
  std::size_t dim(std::size_t axis) const;
  std::size_t numel() const { return node_->value.size(); }
  // Trailing axis and the product of the leading ones.
  std::size_t cols() const;
  std::size_t rows() const;

  std::span<const T> data() const { return node_->value; }
  std::span<T> mutable_data() { return node_->value; }
  T item() const;

  bool requires_grad() const noexcept { return node_ && node_->requires_grad; }
  void set_requires_grad(bool flag);
  bool has_grad() const noexcept { return node_ && !node_->grad.empty(); }
  std::span<const T> grad() const { return node_->grad; }
  std::span<T> mutable_grad() { return node_->ensure_grad(); }
  void zero_grad();

  /// Value copy cut from the graph.
  Tensor detach() const;
  Tensor reshape(Shape shape) const;
  bool all_finite() const;
  const char* op_name() const { return node_->op; }

  detail::Node<T>* node() const noexcept { return node_.get(); }
  const std::shared_ptr<detail::Node<T>>& node_ptr() const noexcept { return node_; }
  static Tensor wrap(std::shared_ptr<detail::Node<T>> node) {
    Tensor t;
    t.node_ = std::move(node);
    return t;
  }

 private:
  std::shared_ptr<detail::Node<T>> node_;
};

/// Topologically ordered view of the subgraph that feeds a scalar seed.
/// Construction walks parents once; backward() visits each node exactly once
/// in reverse order and accumulates into parent gradients.
template <class T>
class ComputeGraph {
 public:
  explicit ComputeGraph(const Tensor<T>& seed);

  std::size_t size() const noexcept { return order_.size(); }
  const std::vector<detail::Node<T>*>& nodes() const noexcept { return order_; }
  void backward();

 private:
  Tensor<T> seed_;
  std::vector<detail::Node<T>*> order_;
};

/// Populates grad on every requires_grad leaf reachable from `loss`.
/// Leaf gradients accumulate across calls until zero_grad().
template <class T>
void backward(const Tensor<T>& loss);

extern template class Tensor<float>;
extern template class Tensor<double>;
extern template class ComputeGraph<float>;
extern template class ComputeGraph<double>;

}  // namespace ear::diff
