#pragma once

#include <cstddef>
#include <string>
#include <unordered_map>
#include <vector>

#include "spnet/adam.hpp"
#include "spnet/tensor.hpp"

namespace spnet {

// Named learnable tensors in insertion order, with gradient buffers and Adam
// state alongside. Names are hierarchical, e.g. mln.encoder.block0.conv1.weight.
class ParameterStore {
 public:
  struct Entry {
    std::string name;
    Tensor value;
    Tensor grad;
    AdamState adam;
  };

  // Adds a zero-filled parameter and returns its index. Throws
  // ConstructionError on a duplicate name.
  std::size_t add(std::string name, Shape shape);
  std::size_t add(std::string name, Tensor value);

  std::size_t size() const noexcept { return entries_.size(); }
  bool contains(const std::string& name) const { return index_.count(name) != 0; }
  std::size_t index_of(const std::string& name) const;

  Entry& entry(std::size_t i) { return entries_.at(i); }
  const Entry& entry(std::size_t i) const { return entries_.at(i); }
  Tensor& value(const std::string& name) { return entries_[index_of(name)].value; }
  const Tensor& value(const std::string& name) const { return entries_[index_of(name)].value; }

  auto begin() noexcept { return entries_.begin(); }
  auto end() noexcept { return entries_.end(); }
  auto begin() const noexcept { return entries_.begin(); }
  auto end() const noexcept { return entries_.end(); }

  // Total number of scalar parameters.
  std::size_t parameter_count() const;

  void zero_grad();
  // One Adam update of every parameter from its accumulated gradient.
  void adam_step(const AdamHyperParams& hp);

  // Copies values (and, when present in `source`, optimizer state) for every
  // name in this store. Throws SpecMismatchError on missing names or shape
  // differences.
  void load_from(const ParameterStore& source, bool with_optimizer_state = false);

  bool all_finite() const;

 private:
  std::vector<Entry> entries_;
  std::unordered_map<std::string, std::size_t> index_;
};

}  // namespace spnet
