#include "tiger/nn/parameter_store.hpp"

#include <algorithm>

#include "tiger/common/error.hpp"

namespace tiger::nn {

template <typename T>
Tensor<T> ParameterStore<T>::add(const std::string& name, Shape shape, InitRule init) {
  if (name.empty()) throw InvalidArgument("parameter store: empty parameter name");
  if (contains(name)) throw InvalidArgument("parameter store: duplicate parameter '" + name + "'");
  Tensor<T> t(std::move(shape));
  t.set_requires_grad(true);
  index_.emplace(name, entries_.size());
  entries_.push_back({name, t, init});
  return t;
}

template <typename T>
const Tensor<T>& ParameterStore<T>::get(const std::string& name) const {
  const auto it = index_.find(name);
  if (it == index_.end()) throw InvalidArgument("parameter store: no parameter '" + name + "'");
  return entries_[it->second].tensor;
}

template <typename T>
std::size_t ParameterStore<T>::scalar_count() const {
  std::size_t n = 0;
  for (const auto& e : entries_) n += e.tensor.numel();
  return n;
}

template <typename T>
std::size_t ParameterStore<T>::scalar_count(const std::string& prefix) const {
  std::size_t n = 0;
  for (const auto& e : entries_) {
    if (e.name.compare(0, prefix.size(), prefix) == 0) n += e.tensor.numel();
  }
  return n;
}

template <typename T>
void ParameterStore<T>::initialize(Rng& rng) {
  for (auto& e : entries_) {
    auto values = e.tensor.mutable_data();
    for (auto& v : values) {
      const double raw = e.init.kind == InitRule::Kind::Uniform
                             ? rng.uniform(-e.init.value, e.init.value)
                             : e.init.value;
      v = static_cast<T>(static_cast<float>(raw));
    }
  }
}

template <typename T>
void ParameterStore<T>::zero_grad() {
  for (auto& e : entries_) e.tensor.zero_grad();
}

template <typename T>
std::vector<std::vector<T>> ParameterStore<T>::snapshot() const {
  std::vector<std::vector<T>> out;
  out.reserve(entries_.size());
  for (const auto& e : entries_) out.emplace_back(e.tensor.data().begin(), e.tensor.data().end());
  return out;
}

template <typename T>
void ParameterStore<T>::restore(const std::vector<std::vector<T>>& values) {
  if (values.size() != entries_.size()) {
    throw InvalidArgument("parameter store: snapshot has " + std::to_string(values.size()) +
                          " tensors, store has " + std::to_string(entries_.size()));
  }
  for (std::size_t i = 0; i < values.size(); ++i) {
    auto dst = entries_[i].tensor.mutable_data();
    if (values[i].size() != dst.size()) {
      throw InvalidArgument("parameter store: snapshot size mismatch for '" + entries_[i].name +
                            "'");
    }
    std::copy(values[i].begin(), values[i].end(), dst.begin());
  }
}

template class ParameterStore<float>;
template class ParameterStore<double>;

}  // namespace tiger::nn
