#pragma once

#include <deque>
#include <string>

#include "eegnet/tensor.hpp"

namespace eegnet {

/// Named trainable tensors with grad slots plus per-parameter optimizer
/// state. Entry addresses are stable, so layers can hold raw pointers.
class ParamStore {
 public:
  struct Entry {
    std::string name;
    Tensor tensor;
    std::vector<Real> opt_state;  // squared-gradient average for rmsprop
  };

  Tensor* add(std::string name, Tensor init) {
    for (const Entry& e : entries_)
      if (e.name == name)
        throw ConfigError("duplicate parameter name '" + name + "'");
    entries_.push_back(Entry{std::move(name), std::move(init), {}});
    Entry& e = entries_.back();
    e.tensor.requires_grad = true;
    e.tensor.ensure_grad();
    return &e.tensor;
  }

  Entry* find(const std::string& name) {
    for (Entry& e : entries_)
      if (e.name == name) return &e;
    return nullptr;
  }

  void zero_grad() {
    for (Entry& e : entries_) e.tensor.zero_grad();
  }

  void scale_grad(Real c) {
    for (Entry& e : entries_)
      for (Real& g : e.tensor.grad) g *= c;
  }

  size_t count() const { return entries_.size(); }

  long total_elements() const {
    long n = 0;
    for (const Entry& e : entries_) n += e.tensor.size();
    return n;
  }

  std::deque<Entry>& entries() { return entries_; }
  const std::deque<Entry>& entries() const { return entries_; }

  /// Copies of all parameter values, in store order.
  std::vector<std::vector<Real>> snapshot() const {
    std::vector<std::vector<Real>> out;
    out.reserve(entries_.size());
    for (const Entry& e : entries_) out.push_back(e.tensor.data);
    return out;
  }

  void restore(const std::vector<std::vector<Real>>& snap) {
    if (snap.size() != entries_.size())
      throw ConfigError("parameter snapshot does not match store layout");
    for (size_t i = 0; i < snap.size(); ++i) {
      if (snap[i].size() != entries_[i].tensor.data.size())
        throw ConfigError("parameter snapshot shape mismatch at '" +
                          entries_[i].name + "'");
      entries_[i].tensor.data = snap[i];
    }
  }

 private:
  std::deque<Entry> entries_;
};

}  // namespace eegnet
