// Copyright 2026 The bevground Authors
// SPDX-License-Identifier: Apache-2.0

#include "bevg/nn/tape.hpp"

#include <numeric>
#include <sstream>
#include <stdexcept>

namespace bevg::nn {

std::size_t numel(const Shape& shape) {
  std::size_t n = 1;
  for (int d : shape) {
    if (d < 0) throw std::invalid_argument("negative dimension in shape");
    n *= static_cast<std::size_t>(d);
  }
  return n;
}

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
  os << ']';
  return os.str();
}

Parameter& ParamStore::add(const std::string& name, Shape shape, std::vector<double> init) {
  if (index_.count(name)) throw std::invalid_argument("ParamStore: duplicate parameter " + name);
  if (init.size() != numel(shape)) {
    throw std::invalid_argument("ParamStore: init size mismatch for " + name);
  }
  auto p = std::make_unique<Parameter>();
  p->name = name;
  p->shape = std::move(shape);
  p->value = std::move(init);
  p->grad.assign(p->value.size(), 0.0);
  index_[name] = params_.size();
  params_.push_back(std::move(p));
  return *params_.back();
}

Parameter& ParamStore::get(const std::string& name) {
  const auto it = index_.find(name);
  if (it == index_.end()) throw std::out_of_range("ParamStore: no parameter " + name);
  return *params_[it->second];
}

const Parameter& ParamStore::get(const std::string& name) const {
  const auto it = index_.find(name);
  if (it == index_.end()) throw std::out_of_range("ParamStore: no parameter " + name);
  return *params_[it->second];
}

std::vector<Parameter*> ParamStore::all() {
  std::vector<Parameter*> out;
  for (auto& p : params_) out.push_back(p.get());
  return out;
}

std::vector<const Parameter*> ParamStore::all() const {
  std::vector<const Parameter*> out;
  for (const auto& p : params_) out.push_back(p.get());
  return out;
}

std::size_t ParamStore::total_size() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += p->size();
  return n;
}

void ParamStore::zero_grad() {
  for (auto& p : params_) std::fill(p->grad.begin(), p->grad.end(), 0.0);
}

void ParamStore::set_trainable(const std::string& prefix, bool trainable) {
  for (auto& p : params_) {
    if (p->name.rfind(prefix, 0) == 0) p->trainable = trainable;
  }
}

const Shape& Var::shape() const { return tape_->shape(id_); }
std::size_t Var::numel() const { return nn::numel(shape()); }
std::span<const double> Var::value() const { return tape_->value(id_); }
std::span<const double> Var::grad() const { return tape_->grad_view(id_); }
bool Var::requires_grad() const { return tape_->requires_grad(id_); }

double Var::item() const {
  const auto v = value();
  if (v.size() != 1) throw std::logic_error("Var::item on non-scalar " + shape_str(shape()));
  return v[0];
}

Var Tape::push(Shape shape, std::vector<double> value, bool requires_grad, BackwardFn backward,
               Parameter* param) {
  if (value.size() != numel(shape)) {
    throw std::logic_error("Tape: value size " + std::to_string(value.size()) +
                           " does not match shape " + shape_str(shape));
  }
  auto n = std::make_unique<Node>();
  n->shape = std::move(shape);
  n->value = std::move(value);
  n->requires_grad = requires_grad;
  if (requires_grad) n->backward = std::move(backward);
  n->param = param;
  nodes_.push_back(std::move(n));
  return Var(this, static_cast<int>(nodes_.size() - 1));
}

Var Tape::constant(Shape shape, std::vector<double> value) {
  return push(std::move(shape), std::move(value), false, nullptr, nullptr);
}

Var Tape::input(Shape shape, std::vector<double> value, bool requires_grad) {
  return push(std::move(shape), std::move(value), requires_grad && grad_enabled_, nullptr, nullptr);
}

Var Tape::param(Parameter& p) {
  const bool rg = grad_enabled_ && p.trainable;
  return push(p.shape, p.value, rg, nullptr, rg ? &p : nullptr);
}

Var Tape::record(Shape shape, std::vector<double> value, std::initializer_list<Var> inputs,
                 BackwardFn backward) {
  return record(std::move(shape), std::move(value), std::span<const Var>(inputs.begin(), inputs.size()),
                std::move(backward));
}

Var Tape::record(Shape shape, std::vector<double> value, std::span<const Var> inputs,
                 BackwardFn backward) {
  bool rg = false;
  for (const Var& v : inputs) {
    if (v.tape() != this) throw std::logic_error("Tape::record: input from another tape");
    rg = rg || requires_grad(v.id());
  }
  return push(std::move(shape), std::move(value), rg && grad_enabled_, std::move(backward), nullptr);
}

std::span<double> Tape::grad(int id) {
  Node& n = *nodes_[id];
  if (n.grad.size() != n.value.size()) n.grad.assign(n.value.size(), 0.0);
  return n.grad;
}

void Tape::backward(Var loss) {
  if (loss.tape() != this) throw std::logic_error("Tape::backward: foreign variable");
  if (loss.numel() != 1) throw std::logic_error("Tape::backward: loss must be scalar");
  if (!requires_grad(loss.id())) return;
  grad(loss.id())[0] += 1.0;
  for (int id = loss.id(); id >= 0; --id) {
    Node& n = *nodes_[id];
    if (!n.requires_grad || !n.backward || n.grad.empty()) continue;
    n.backward(*this, id);
  }
}

void Tape::accumulate_param_grads() {
  for (auto& n : nodes_) {
    if (!n->param || n->grad.empty()) continue;
    auto& g = n->param->grad;
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += n->grad[i];
  }
}

}  // namespace bevg::nn
