#pragma once

#include <functional>
#include <map>
#include <string>
#include <vector>

#include "lookaround/ad.hpp"

namespace lookaround::learn {

struct Tensor {
  std::string name;
  int rows = 0;
  int cols = 1;
  std::vector<double> data;

  std::size_t size() const { return data.size(); }
};

/// Named parameter tensors in a stable order, each paired with a momentum
/// buffer of the same shape.
class ParamStore {
 public:
  int add(const std::string& name, int rows, int cols, std::vector<double> values);
  bool has(const std::string& name) const { return index_.count(name) > 0; }
  Tensor& get(const std::string& name);
  const Tensor& get(const std::string& name) const;
  std::vector<double>& momentum(int i) { return momentum_[i]; }

  int count() const { return static_cast<int>(tensors_.size()); }
  Tensor& tensor(int i) { return tensors_[i]; }
  const Tensor& tensor(int i) const { return tensors_[i]; }
  int index_of(const std::string& name) const;

 private:
  std::vector<Tensor> tensors_;
  std::vector<std::vector<double>> momentum_;
  std::map<std::string, int> index_;
};

/// Tape leaves for every tensor of a store, in store order.
struct BoundParams {
  const ParamStore* store = nullptr;
  std::vector<ad::Var> vars;

  ad::Var of(const std::string& name) const;
};

BoundParams bind(ad::Tape& tape, const ParamStore& store);

/// Per-tensor gradients aligned with the store order.
struct Gradients {
  std::vector<std::vector<double>> by_tensor;
  double loss = 0.0;
};

using LossBuilder = std::function<ad::Var(ad::Tape&, const BoundParams&)>;

/// Reverse-mode gradients of a loss built from the supported primitives.
Gradients grad(const LossBuilder& loss_fn, const ParamStore& params);

}  // namespace lookaround::learn
