// Copyright 2026 lgtse authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "lgtse/autodiff/tape.hpp"

#include "lgtse/common/error.hpp"

namespace lgtse::ad {

const char* to_string(ParamGroup g) {
  return g == ParamGroup::kDenoiser ? "denoiser" : "backbone";
}

std::size_t ParameterStore::add(std::string name, ParamGroup group,
                                Matrix init) {
  params_.push_back(Parameter{std::move(name), group, std::move(init)});
  return params_.size() - 1;
}

std::size_t ParameterStore::scalar_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += static_cast<std::size_t>(p.value.size());
  return n;
}

std::size_t ParameterStore::scalar_count(ParamGroup group) const {
  std::size_t n = 0;
  for (const auto& p : params_) {
    if (p.group == group) n += static_cast<std::size_t>(p.value.size());
  }
  return n;
}

Gradients ParameterStore::zeros() const {
  Gradients g;
  g.reserve(params_.size());
  for (const auto& p : params_) {
    g.push_back(Matrix::Zero(p.value.rows(), p.value.cols()));
  }
  return g;
}

const Matrix& Var::value() const { return tape_->value(id_); }

Var Tape::push(Node node) {
  nodes_.push_back(std::move(node));
  return Var(this, nodes_.size() - 1);
}

Var Tape::constant(Matrix value) {
  Node n;
  n.owned = std::move(value);
  return push(std::move(n));
}

Var Tape::variable(Matrix value) {
  Node n;
  n.owned = std::move(value);
  n.requires_grad = true;
  return push(std::move(n));
}

Var Tape::parameter(const ParameterStore& store, std::size_t index,
                    bool trainable) {
  Node n;
  n.external = &store[index].value;
  n.requires_grad = trainable;
  n.param = static_cast<long>(index);
  return push(std::move(n));
}

Var Tape::record(Matrix value, std::initializer_list<Var> parents,
                 Backward fn) {
  Node n;
  n.owned = std::move(value);
  for (const Var& p : parents) {
    require(p.tape_ == this, ErrorKind::kShape, "Var from a different tape");
    n.requires_grad = n.requires_grad || nodes_[p.id_].requires_grad;
  }
  if (n.requires_grad) n.backward = std::move(fn);
  return push(std::move(n));
}

Var Tape::record(Matrix value, const std::vector<Var>& parents, Backward fn) {
  Node n;
  n.owned = std::move(value);
  for (const Var& p : parents) {
    require(p.tape_ == this, ErrorKind::kShape, "Var from a different tape");
    n.requires_grad = n.requires_grad || nodes_[p.id_].requires_grad;
  }
  if (n.requires_grad) n.backward = std::move(fn);
  return push(std::move(n));
}

const Matrix& Tape::value(std::size_t id) const {
  const Node& n = nodes_[id];
  return n.external ? *n.external : n.owned;
}

void Tape::accumulate(std::size_t id, const Matrix& g) {
  Node& n = nodes_[id];
  if (!n.requires_grad) return;
  if (n.grad.size() == 0) {
    n.grad = g;
  } else {
    n.grad += g;
  }
}

void Tape::accumulate(std::size_t id, Matrix&& g) {
  Node& n = nodes_[id];
  if (!n.requires_grad) return;
  if (n.grad.size() == 0) {
    n.grad = std::move(g);
  } else {
    n.grad += g;
  }
}

void Tape::backward(Var root, const Matrix& seed) {
  require(root.tape_ == this, ErrorKind::kShape, "root from a different tape");
  const Matrix& rv = value(root.id_);
  require(seed.rows() == rv.rows() && seed.cols() == rv.cols(),
          ErrorKind::kShape, "backward seed shape does not match root");
  for (auto& n : nodes_) n.grad.resize(0, 0);
  accumulate(root.id_, seed);
  for (std::size_t i = root.id_ + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (n.backward && n.grad.size() != 0) n.backward(*this, i);
  }
}

Matrix Tape::grad_of(Var v) const {
  const Node& n = nodes_[v.id_];
  if (n.grad.size() != 0) return n.grad;
  const Matrix& val = value(v.id_);
  return Matrix::Zero(val.rows(), val.cols());
}

void Tape::collect(Gradients& out) const {
  for (const Node& n : nodes_) {
    if (n.param < 0 || n.grad.size() == 0) continue;
    out[static_cast<std::size_t>(n.param)] += n.grad;
  }
}

}  // namespace lgtse::ad
