#include "ear/diff/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_set>

#include "ear/common/errors.hpp"

namespace ear::diff {

std::size_t shape_numel(const Shape& shape) {
  std::size_t n = 1;
  for (std::size_t d : shape) n *= d;
  return n;
}

std::string shape_string(const Shape& shape) {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += "x";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

namespace detail {

template <class T>
std::span<T> Node<T>::ensure_grad() {
  if (grad.size() != value.size()) grad.assign(value.size(), T(0));
  return grad;
}

template struct Node<float>;
template struct Node<double>;

}  // namespace detail

template <class T>
Tensor<T> Tensor<T>::zeros(Shape shape, bool requires_grad) {
  return full(std::move(shape), T(0), requires_grad);
}

template <class T>
Tensor<T> Tensor<T>::full(Shape shape, T value, bool requires_grad) {
  std::vector<T> values(shape_numel(shape), value);
  return from_vector(std::move(shape), std::move(values), requires_grad);
}

template <class T>
Tensor<T> Tensor<T>::from_vector(Shape shape, std::vector<T> values, bool requires_grad) {
  if (shape_numel(shape) != values.size()) {
    throw DimensionError("tensor data length " + std::to_string(values.size()) +
                         " does not match shape " + shape_string(shape));
  }
  auto node = std::make_shared<detail::Node<T>>();
  node->shape = std::move(shape);
  node->value = std::move(values);
  node->requires_grad = requires_grad;
  return wrap(std::move(node));
}

template <class T>
Tensor<T> Tensor<T>::scalar(T value) {
  return from_vector({}, {value});
}

template <class T>
const Shape& Tensor<T>::shape() const {
  if (!node_) throw ContractError("use of an undefined tensor");
  return node_->shape;
}

template <class T>
std::size_t Tensor<T>::dim(std::size_t axis) const {
  const Shape& s = shape();
  if (axis >= s.size()) {
    throw DimensionError("axis " + std::to_string(axis) + " out of range for " + shape_string(s));
  }
  return s[axis];
}

template <class T>
std::size_t Tensor<T>::cols() const {
  const Shape& s = shape();
  return s.empty() ? 1 : s.back();
}

template <class T>
std::size_t Tensor<T>::rows() const {
  const std::size_t c = cols();
  return c == 0 ? 0 : numel() / c;
}

template <class T>
T Tensor<T>::item() const {
  if (numel() != 1) {
    throw ContractError("item() on tensor of shape " + shape_string(shape()));
  }
  return node_->value[0];
}

template <class T>
void Tensor<T>::set_requires_grad(bool flag) {
  if (!node_->is_leaf()) throw ContractError("requires_grad can only be set on leaf tensors");
  node_->requires_grad = flag;
}

template <class T>
void Tensor<T>::zero_grad() {
  if (node_) std::fill(node_->grad.begin(), node_->grad.end(), T(0));
}

template <class T>
Tensor<T> Tensor<T>::detach() const {
  return from_vector(shape(), node_->value);
}

template <class T>
Tensor<T> Tensor<T>::reshape(Shape new_shape) const {
  if (shape_numel(new_shape) != numel()) {
    throw DimensionError("cannot reshape " + shape_string(shape()) + " to " +
                         shape_string(new_shape));
  }
  auto out = std::make_shared<detail::Node<T>>();
  out->shape = std::move(new_shape);
  out->value = node_->value;
  out->op = "reshape";
  if (node_->requires_grad) {
    out->requires_grad = true;
    out->parents = {node_};
    out->backward = [](detail::Node<T>& self) {
      auto g = self.parents[0]->ensure_grad();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
    };
  }
  return wrap(std::move(out));
}

template <class T>
bool Tensor<T>::all_finite() const {
  return std::all_of(node_->value.begin(), node_->value.end(),
                     [](T v) { return std::isfinite(v); });
}

template <class T>
ComputeGraph<T>::ComputeGraph(const Tensor<T>& seed) : seed_(seed) {
  if (!seed.defined() || seed.numel() != 1) {
    throw ContractError("backward seed must be a scalar, got shape " +
                        (seed.defined() ? shape_string(seed.shape()) : std::string("<undefined>")));
  }
  // Iterative post-order DFS; parents are visited in declaration order so the
  // resulting order is a pure function of the graph.
  std::unordered_set<const detail::Node<T>*> seen;
  struct Frame {
    detail::Node<T>* node;
    std::size_t next_parent;
  };
  std::vector<Frame> stack;
  if (seed.node()->requires_grad) {
    stack.push_back({seed.node(), 0});
    seen.insert(seed.node());
  }
  while (!stack.empty()) {
    Frame& top = stack.back();
    if (top.next_parent < top.node->parents.size()) {
      detail::Node<T>* parent = top.node->parents[top.next_parent++].get();
      if (parent->requires_grad && seen.insert(parent).second) stack.push_back({parent, 0});
      continue;
    }
    order_.push_back(top.node);
    stack.pop_back();
  }
}

template <class T>
void ComputeGraph<T>::backward() {
  for (detail::Node<T>* node : order_) {
    if (!node->is_leaf()) {
      node->grad.assign(node->value.size(), T(0));
    }
  }
  if (order_.empty()) return;
  seed_.node()->ensure_grad()[0] += T(1);
  for (auto it = order_.rbegin(); it != order_.rend(); ++it) {
    detail::Node<T>* node = *it;
    if (!node->is_leaf()) node->backward(*node);
  }
}

template <class T>
void backward(const Tensor<T>& loss) {
  ComputeGraph<T> graph(loss);
  graph.backward();
}

template class Tensor<float>;
template class Tensor<double>;
template class ComputeGraph<float>;
template class ComputeGraph<double>;
template void backward<float>(const Tensor<float>&);
template void backward<double>(const Tensor<double>&);

}  // namespace ear::diff
