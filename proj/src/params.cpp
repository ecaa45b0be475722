#include "lookaround/params.hpp"

#include "lookaround/errors.hpp"

namespace lookaround::learn {

int ParamStore::add(const std::string& name, int rows, int cols, std::vector<double> values) {
  if (index_.count(name)) throw ContractViolation("ParamStore: duplicate tensor " + name);
  if (values.size() != static_cast<std::size_t>(rows) * cols)
    throw ContractViolation("ParamStore: shape/data mismatch for " + name);
  Tensor t{name, rows, cols, std::move(values)};
  tensors_.push_back(std::move(t));
  momentum_.emplace_back(tensors_.back().size(), 0.0);
  index_[name] = static_cast<int>(tensors_.size()) - 1;
  return index_[name];
}

int ParamStore::index_of(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw ContractViolation("ParamStore: unknown tensor " + name);
  return it->second;
}

Tensor& ParamStore::get(const std::string& name) { return tensors_[index_of(name)]; }
const Tensor& ParamStore::get(const std::string& name) const { return tensors_[index_of(name)]; }

ad::Var BoundParams::of(const std::string& name) const {
  return vars[store->index_of(name)];
}

BoundParams bind(ad::Tape& tape, const ParamStore& store) {
  BoundParams bound;
  bound.store = &store;
  bound.vars.reserve(store.count());
  for (int i = 0; i < store.count(); ++i) {
    const Tensor& t = store.tensor(i);
    bound.vars.push_back(tape.leaf(t.data, t.rows, t.cols));
  }
  return bound;
}

Gradients grad(const LossBuilder& loss_fn, const ParamStore& params) {
  ad::Tape tape;
  const BoundParams bound = bind(tape, params);
  const ad::Var root = loss_fn(tape, bound);
  tape.backward(root);

  Gradients out;
  out.loss = tape.value(root);
  out.by_tensor.reserve(params.count());
  for (int i = 0; i < params.count(); ++i) {
    auto g = tape.grad(bound.vars[i]);
    out.by_tensor.emplace_back(g.begin(), g.end());
  }
  return out;
}

}  // namespace lookaround::learn
