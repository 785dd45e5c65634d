#include "ear/model/params.hpp"

#include <algorithm>

#include "ear/common/errors.hpp"

namespace ear::model {

std::string to_string(ParamGroup group) {
  return group == ParamGroup::backbone ? "backbone" : "generator";
}

template <class T>
diff::Tensor<T>& ModelParams<T>::add(std::string name, diff::Tensor<T> tensor, ParamGroup group) {
  if (contains(name)) throw ContractError("duplicate parameter name '" + name + "'");
  index_.emplace(name, entries_.size());
  entries_.push_back({std::move(name), std::move(tensor), group});
  return entries_.back().tensor;
}

template <class T>
const ParamEntry<T>& ModelParams<T>::entry(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw ContractError("no parameter named '" + name + "'");
  return entries_[it->second];
}

template <class T>
const diff::Tensor<T>& ModelParams<T>::get(const std::string& name) const {
  return entry(name).tensor;
}

template <class T>
diff::Tensor<T>& ModelParams<T>::get(const std::string& name) {
  auto it = index_.find(name);
  if (it == index_.end()) throw ContractError("no parameter named '" + name + "'");
  return entries_[it->second].tensor;
}

template <class T>
std::size_t ModelParams<T>::numel() const {
  std::size_t n = 0;
  for (const auto& e : entries_) n += e.tensor.numel();
  return n;
}

template <class T>
std::size_t ModelParams<T>::numel(ParamGroup group) const {
  std::size_t n = 0;
  for (const auto& e : entries_)
    if (e.group == group) n += e.tensor.numel();
  return n;
}

template <class T>
void ModelParams<T>::zero_grad() {
  for (auto& e : entries_) e.tensor.zero_grad();
}

template <class T>
ModelParams<T> ModelParams<T>::clone(bool requires_grad) const {
  ModelParams<T> out;
  for (const auto& e : entries_) {
    auto values = std::vector<T>(e.tensor.data().begin(), e.tensor.data().end());
    out.add(e.name, diff::Tensor<T>::from_vector(e.tensor.shape(), std::move(values), requires_grad),
            e.group);
  }
  return out;
}

template <class T>
void ModelParams<T>::assign_values(const ModelParams& other) {
  if (other.size() != size()) throw DimensionError("parameter sets differ in size");
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    auto& dst = entries_[i];
    const auto& src = other.entries_[i];
    if (dst.name != src.name || dst.tensor.shape() != src.tensor.shape()) {
      throw DimensionError("parameter mismatch at '" + dst.name + "'");
    }
    std::copy(src.tensor.data().begin(), src.tensor.data().end(), dst.tensor.mutable_data().begin());
  }
}

template <class T>
bool ModelParams<T>::same_values(const ModelParams& other) const {
  if (other.size() != size()) return false;
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    const auto& a = entries_[i];
    const auto& b = other.entries_[i];
    if (a.name != b.name || a.tensor.shape() != b.tensor.shape()) return false;
    if (!std::equal(a.tensor.data().begin(), a.tensor.data().end(), b.tensor.data().begin())) {
      return false;
    }
  }
  return true;
}

template class ModelParams<float>;
template class ModelParams<double>;

}  // namespace ear::model
