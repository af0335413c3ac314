// Copyright 2026 The bevground Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <functional>
#include <initializer_list>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace bevg::nn {

using Shape = std::vector<int>;

std::size_t numel(const Shape& shape);
std::string shape_str(const Shape& shape);

/// A named trainable array. Values are double precision; optimizers keep them
/// representable in float32 so checkpoints round-trip exactly.
struct Parameter {
  std::string name;
  Shape shape;
  std::vector<double> value;
  std::vector<double> grad;
  bool trainable = true;

  std::size_t size() const { return value.size(); }
};

/// Insertion-ordered parameter registry with stable addresses.
class ParamStore {
 public:
  Parameter& add(const std::string& name, Shape shape, std::vector<double> init);
  Parameter& get(const std::string& name);
  const Parameter& get(const std::string& name) const;
  bool contains(const std::string& name) const { return index_.count(name) > 0; }

  std::vector<Parameter*> all();
  std::vector<const Parameter*> all() const;
  std::size_t count() const { return params_.size(); }
  std::size_t total_size() const;

  void zero_grad();
  /// Freezes or unfreezes every parameter whose name starts with `prefix`.
  void set_trainable(const std::string& prefix, bool trainable);

 private:
  std::vector<std::unique_ptr<Parameter>> params_;
  std::map<std::string, std::size_t> index_;
};

class Tape;

/// Handle to a node on a Tape. Cheap to copy; valid while the tape lives.
class Var {
 public:
  Var() = default;
  Var(Tape* tape, int id) : tape_(tape), id_(id) {}

  Tape* tape() const { return tape_; }
  int id() const { return id_; }
  bool valid() const { return tape_ != nullptr; }

  const Shape& shape() const;
  int dim(std::size_t i) const { return shape()[i]; }
  std::size_t numel() const;
  std::span<const double> value() const;
  std::span<const double> grad() const;
  double item() const;
  bool requires_grad() const;

 private:
  Tape* tape_ = nullptr;
  int id_ = -1;
};

/// Reverse-mode autodiff tape. Ops append nodes; backward() replays their
/// closures in reverse order. Single-threaded; use one tape per forward pass.
class Tape {
 public:
  using BackwardFn = std::function<void(Tape&, int out)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  /// When disabled, parameters enter as constants and no closures are kept.
  void set_grad_enabled(bool on) { grad_enabled_ = on; }
  bool grad_enabled() const { return grad_enabled_; }

  Var constant(Shape shape, std::vector<double> value);
  Var input(Shape shape, std::vector<double> value, bool requires_grad = true);
  Var param(Parameter& p);

  /// Adds a node computed from `inputs`; `backward` is kept only when some
  /// input requires a gradient.
  Var record(Shape shape, std::vector<double> value, std::initializer_list<Var> inputs, BackwardFn backward);
  Var record(Shape shape, std::vector<double> value, std::span<const Var> inputs, BackwardFn backward);

  void backward(Var scalar_loss);
  /// Adds gradients of parameter leaves into Parameter::grad.
  void accumulate_param_grads();

  const Shape& shape(int id) const { return nodes_[id]->shape; }
  std::span<const double> value(int id) const { return nodes_[id]->value; }
  /// Gradient buffer for a node, allocated on first use.
  std::span<double> grad(int id);
  std::span<const double> grad_view(int id) const { return nodes_[id]->grad; }
  bool requires_grad(int id) const { return nodes_[id]->requires_grad; }
  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Shape shape;
    std::vector<double> value;
    std::vector<double> grad;
    bool requires_grad = false;
    BackwardFn backward;
    Parameter* param = nullptr;
  };
  Var push(Shape shape, std::vector<double> value, bool requires_grad, BackwardFn backward,
           Parameter* param);

  std::vector<std::unique_ptr<Node>> nodes_;
  bool grad_enabled_ = true;
};

}  // namespace bevg::nn
