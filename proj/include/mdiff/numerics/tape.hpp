#pragma once

#include <cstddef>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "mdiff/numerics/dense_array.hpp"

namespace mdiff::num {

// Handle to a node on a Tape.
struct Var {
  std::size_t id = 0;
};

using Gradients = std::map<std::string, DenseArray>;

// Linear record of array operations for reverse-mode differentiation.
//
// Nodes are appended in evaluation order, so every node's inputs precede it.
// A node takes part in backward only if it is a parameter or depends on one;
// constants and everything computed purely from constants carry no pullback.
// With gradients disabled the tape only evaluates, which is what inference uses.
class Tape {
 public:
  // Accumulates d(loss)/d(input_i) into grad_in[i] given d(loss)/d(output).
  // grad_in[i] is null for inputs that do not require a gradient.
  using Pullback = std::function<void(const DenseArray& grad_out, std::span<DenseArray* const> grad_in)>;

  explicit Tape(bool grad_enabled = true) : grad_enabled_(grad_enabled) {}

  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;
  // Pullbacks refer back to the tape, so it stays put.
  Tape(Tape&&) = delete;
  Tape& operator=(Tape&&) = delete;

  Var constant(DenseArray value);
  // Leaf that receives a gradient in backward(). Names must be unique per tape.
  Var parameter(std::string name, DenseArray value);

  // Appends an op node. Throws NumericError if `value` holds a NaN or Inf.
  Var record(std::string_view op, DenseArray value, std::vector<Var> inputs, Pullback pullback);

  const DenseArray& value(Var v) const { return nodes_.at(v.id).value; }
  const Shape& shape(Var v) const { return value(v).shape(); }
  bool requires_grad(Var v) const { return nodes_.at(v.id).requires_grad; }
  bool grad_enabled() const noexcept { return grad_enabled_; }
  std::size_t size() const noexcept { return nodes_.size(); }
  std::string_view op_name(Var v) const { return nodes_.at(v.id).op; }
  const std::vector<Var>& inputs(Var v) const { return nodes_.at(v.id).inputs; }

  // Reverse sweep from a scalar loss. Every registered parameter appears in the
  // result; parameters the loss does not depend on get zero gradients.
  Gradients backward(Var loss) const;

 private:
  struct Node {
    std::string op;
    DenseArray value;
    std::vector<Var> inputs;
    Pullback pullback;
    bool requires_grad = false;
    std::string param_name;
  };

  bool grad_enabled_;
  std::vector<Node> nodes_;
  std::vector<std::size_t> params_;
};

}  // namespace mdiff::num
