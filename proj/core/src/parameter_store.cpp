#include "spnet/parameter_store.hpp"

#include "spnet/error.hpp"

namespace spnet {

std::size_t ParameterStore::add(std::string name, Shape shape) {
  return add(std::move(name), Tensor(std::move(shape)));
}

std::size_t ParameterStore::add(std::string name, Tensor value) {
  if (index_.count(name)) throw ConstructionError("duplicate parameter name: " + name);
  const std::size_t i = entries_.size();
  index_.emplace(name, i);
  Tensor grad = Tensor::zeros_like(value);
  entries_.push_back(Entry{std::move(name), std::move(value), std::move(grad), AdamState{}});
  return i;
}

std::size_t ParameterStore::index_of(const std::string& name) const {
  const auto it = index_.find(name);
  if (it == index_.end()) throw SpecMismatchError("unknown parameter: " + name);
  return it->second;
}

std::size_t ParameterStore::parameter_count() const {
  std::size_t n = 0;
  for (const auto& e : entries_) n += e.value.size();
  return n;
}

void ParameterStore::zero_grad() {
  for (auto& e : entries_) e.grad.fill(0.0f);
}

void ParameterStore::adam_step(const AdamHyperParams& hp) {
  for (auto& e : entries_) spnet::adam_step(e.value, e.grad, e.adam, hp);
}

void ParameterStore::load_from(const ParameterStore& source, bool with_optimizer_state) {
  for (auto& e : entries_) {
    const auto it = source.index_.find(e.name);
    if (it == source.index_.end()) throw SpecMismatchError("checkpoint lacks parameter " + e.name);
    const Entry& src = source.entries_[it->second];
    if (src.value.shape() != e.value.shape()) {
      throw SpecMismatchError("parameter " + e.name + " has shape " +
                              shape_to_string(src.value.shape()) + ", expected " +
                              shape_to_string(e.value.shape()));
    }
    e.value = src.value;
    if (with_optimizer_state) e.adam = src.adam;
  }
}

bool ParameterStore::all_finite() const {
  for (const auto& e : entries_) {
    if (!e.value.all_finite()) return false;
  }
  return true;
}

}  // namespace spnet
