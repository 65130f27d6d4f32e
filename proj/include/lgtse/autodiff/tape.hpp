// Copyright 2026 lgtse authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <Eigen/Dense>
#include <cstddef>
#include <functional>
#include <initializer_list>
#include <string>
#include <vector>

// Minimal reverse-mode automatic differentiation over dense double matrices.
// A Tape records one forward evaluation; backward() walks it in reverse.
// Tapes are single-threaded objects; independent items use independent tapes.
namespace lgtse::ad {

using Matrix = Eigen::MatrixXd;

enum class ParamGroup { kDenoiser, kBackbone };

const char* to_string(ParamGroup g);

struct Parameter {
  std::string name;
  ParamGroup group;
  Matrix value;
};

// Per-parameter gradient buffers aligned with a ParameterStore.
using Gradients = std::vector<Matrix>;

class ParameterStore {
 public:
  std::size_t add(std::string name, ParamGroup group, Matrix init);

  std::size_t size() const { return params_.size(); }
  Parameter& operator[](std::size_t i) { return params_[i]; }
  const Parameter& operator[](std::size_t i) const { return params_[i]; }
  std::vector<Parameter>& all() { return params_; }
  const std::vector<Parameter>& all() const { return params_; }

  std::size_t scalar_count() const;
  std::size_t scalar_count(ParamGroup group) const;
  Gradients zeros() const;

 private:
  std::vector<Parameter> params_;
};

class Tape;

class Var {
 public:
  Var() = default;
  const Matrix& value() const;
  Tape* tape() const { return tape_; }
  std::size_t id() const { return id_; }
  long rows() const { return value().rows(); }
  long cols() const { return value().cols(); }

 private:
  friend class Tape;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}
  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

class Tape {
 public:
  using Backward = std::function<void(Tape&, std::size_t self)>;

  Tape() { nodes_.reserve(256); }
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  // Leaf with no gradient.
  Var constant(Matrix value);
  // Leaf whose gradient is retained (for input-gradient checks).
  Var variable(Matrix value);
  // Leaf bound to store[index] without copying; gradients are collected by
  // collect() when `trainable`.
  Var parameter(const ParameterStore& store, std::size_t index,
                bool trainable = true);

  // Appends an interior node. `fn` is dropped when no parent needs a gradient.
  Var record(Matrix value, std::initializer_list<Var> parents, Backward fn);
  Var record(Matrix value, const std::vector<Var>& parents, Backward fn);

  const Matrix& value(std::size_t id) const;
  // Upstream gradient of `id`; valid while its backward function runs.
  const Matrix& grad(std::size_t id) const { return nodes_[id].grad; }
  bool requires_grad(std::size_t id) const {
    return nodes_[id].requires_grad;
  }
  void accumulate(std::size_t id, const Matrix& g);
  void accumulate(std::size_t id, Matrix&& g);

  void backward(Var root, const Matrix& seed);
  // Gradient of a leaf after backward(); zeros when none reached it.
  Matrix grad_of(Var v) const;
  // Adds parameter-leaf gradients into `out` (sized like the store).
  void collect(Gradients& out) const;

  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Matrix owned;
    const Matrix* external = nullptr;
    Matrix grad;
    bool requires_grad = false;
    long param = -1;
    Backward backward;
  };
  Var push(Node node);
  std::vector<Node> nodes_;
};

}  // namespace lgtse::ad
