#pragma once

#include <cstddef>
#include <string>
#include <unordered_map>
#include <vector>

#include "ear/diff/tensor.hpp"

namespace ear::model {

/// Learning-rate group. Generator tensors train at lr * lambda_gen.
enum class ParamGroup { backbone, generator };

std::string to_string(ParamGroup group);

template <class T>
struct ParamEntry {
  std::string name;
  diff::Tensor<T> tensor;
  ParamGroup group;
};

/// Ordered, named tensor collection. Insertion order is the canonical
/// order used by the optimizer and by checkpoints.
template <class T>
class ModelParams {
 public:
  diff::Tensor<T>& add(std::string name, diff::Tensor<T> tensor, ParamGroup group);

  bool contains(const std::string& name) const { return index_.count(name) != 0; }
  const diff::Tensor<T>& get(const std::string& name) const;
  diff::Tensor<T>& get(const std::string& name);
  const ParamEntry<T>& entry(const std::string& name) const;

  std::size_t size() const { return entries_.size(); }
  std::vector<ParamEntry<T>>& entries() { return entries_; }
  const std::vector<ParamEntry<T>>& entries() const { return entries_; }

  std::size_t numel() const;
  std::size_t numel(ParamGroup group) const;

  void zero_grad();
  /// Deep copy of values; the copy's tensors carry the given grad flag.
  ModelParams clone(bool requires_grad) const;
  /// Copies values from `other`, which must have the same names and shapes.
  void assign_values(const ModelParams& other);
  bool same_values(const ModelParams& other) const;

 private:
  std::vector<ParamEntry<T>> entries_;
  std::unordered_map<std::string, std::size_t> index_;
};

extern template class ModelParams<float>;
extern template class ModelParams<double>;

}  // namespace ear::model
