#pragma once

#include <map>
#include <string>
#include <vector>

#include "mlfa/autodiff.hpp"
#include "mlfa/errors.hpp"
#include "mlfa/matrix.hpp"
#include "mlfa/rng.hpp"

namespace mlfa {

/// Ordered collection of named trainable tensors. Iteration order is the
/// name order, which keeps gradient reduction and checkpoints deterministic.
class ParamStore {
 public:
  void add(const std::string& name, Matrix m) {
    if (tensors_.count(name)) throw ShapeMismatch("duplicate parameter: " + name);
    tensors_.emplace(name, std::move(m));
  }

  Matrix& at(const std::string& name) {
    auto it = tensors_.find(name);
    if (it == tensors_.end()) throw ShapeMismatch("unknown parameter: " + name);
    return it->second;
  }

  const Matrix& at(const std::string& name) const {
    auto it = tensors_.find(name);
    if (it == tensors_.end()) throw ShapeMismatch("unknown parameter: " + name);
    return it->second;
  }

  bool has(const std::string& name) const { return tensors_.count(name) > 0; }

  /// Total scalar count, optionally restricted to a name prefix.
  size_t param_count(const std::string& prefix = "") const {
    size_t n = 0;
    for (const auto& [name, m] : tensors_)
      if (name.rfind(prefix, 0) == 0) n += m.size();
    return n;
  }

  auto begin() { return tensors_.begin(); }
  auto end() { return tensors_.end(); }
  auto begin() const { return tensors_.begin(); }
  auto end() const { return tensors_.end(); }
  size_t size() const { return tensors_.size(); }

 private:
  std::map<std::string, Matrix> tensors_;
};

/// Per-tape cache of parameter leaves so a batch binds each name once.
class ParamBinder {
 public:
  ParamBinder(ad::Tape& tape, const ParamStore& store) : tape_(&tape), store_(&store) {}

  ad::Var operator()(const std::string& name) {
    auto it = bound_.find(name);
    if (it != bound_.end()) return it->second;
    ad::Var v = tape_->param(name, store_->at(name));
    bound_.emplace(name, v);
    return v;
  }

 private:
  ad::Tape* tape_;
  const ParamStore* store_;
  std::map<std::string, ad::Var> bound_;
};

/// Xavier-uniform init: U(-a, a) with a = sqrt(6 / (fan_in + fan_out)).
inline Matrix xavier_uniform(int rows, int cols, Rng& rng) {
  Matrix m(rows, cols);
  const double a = std::sqrt(6.0 / (rows + cols));
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) m(r, c) = rng.uniform(-a, a);
  return m;
}

}  // namespace mlfa
