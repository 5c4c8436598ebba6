#pragma once

#include <cstddef>
#include <string>
#include <unordered_map>
#include <vector>

#include "tiger/common/random.hpp"
#include "tiger/nn/tensor.hpp"

namespace tiger::nn {

/// How a parameter is initialised by ParameterStore::initialize.
struct InitRule {
  enum class Kind { Uniform, Constant } kind = Kind::Constant;
  double value = 0.0;  // half-width for Uniform, fill value for Constant

  static InitRule uniform(double bound) { return {Kind::Uniform, bound}; }
  static InitRule constant(double v) { return {Kind::Constant, v}; }
};

/// Ordered registry of named trainable tensors. Registration order is the
/// iteration order, so names, initial values and checkpoints are stable for
/// a given construction sequence. A shared parameter is registered once and
/// the returned handle is reused at every call site.
template <typename T>
class ParameterStore {
 public:
  struct Entry {
    std::string name;
    Tensor<T> tensor;
    InitRule init;
  };

  /// Registers a new parameter; throws InvalidArgument on a duplicate name.
  Tensor<T> add(const std::string& name, Shape shape, InitRule init);

  bool contains(const std::string& name) const { return index_.count(name) != 0; }
  const Tensor<T>& get(const std::string& name) const;
  const std::vector<Entry>& entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }

  /// Total number of scalar parameters.
  std::size_t scalar_count() const;
  /// Scalars whose name starts with `prefix`.
  std::size_t scalar_count(const std::string& prefix) const;

  /// Draws every parameter from its rule in registration order. Values are
  /// rounded to single precision so float and double models built from the
  /// same seed hold identical numbers.
  void initialize(Rng& rng);

  void zero_grad();

  std::vector<std::vector<T>> snapshot() const;
  void restore(const std::vector<std::vector<T>>& values);

 private:
  std::vector<Entry> entries_;
  std::unordered_map<std::string, std::size_t> index_;
};

}  // namespace tiger::nn
