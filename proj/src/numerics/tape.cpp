#include "mdiff/numerics/tape.hpp"

#include <algorithm>

#include "mdiff/errors.hpp"

namespace mdiff::num {

Var Tape::constant(DenseArray value) {
  if (!value.all_finite()) throw NumericError("constant holds a non-finite value");
  nodes_.push_back(Node{"constant", std::move(value), {}, {}, false, {}});
  return Var{nodes_.size() - 1};
}

Var Tape::parameter(std::string name, DenseArray value) {
  if (!value.all_finite()) throw NumericError("parameter '" + name + "' holds a non-finite value");
  for (std::size_t id : params_) {
    if (nodes_[id].param_name == name) throw ContractError("parameter '" + name + "' registered twice");
  }
  nodes_.push_back(Node{"parameter", std::move(value), {}, {}, grad_enabled_, std::move(name)});
  params_.push_back(nodes_.size() - 1);
  return Var{nodes_.size() - 1};
}

Var Tape::record(std::string_view op, DenseArray value, std::vector<Var> inputs, Pullback pullback) {
  if (!value.all_finite()) {
    throw NumericError("op '" + std::string(op) + "' produced a non-finite value");
  }
  bool needs = false;
  for (Var in : inputs) {
    if (in.id >= nodes_.size()) throw ContractError("op '" + std::string(op) + "' references a future node");
    needs = needs || nodes_[in.id].requires_grad;
  }
  needs = needs && grad_enabled_;
  Node node{std::string(op), std::move(value), std::move(inputs), {}, needs, {}};
  if (needs) node.pullback = std::move(pullback);
  nodes_.push_back(std::move(node));
  return Var{nodes_.size() - 1};
}

Gradients Tape::backward(Var loss) const {
  const Node& root = nodes_.at(loss.id);
  if (root.value.size() != 1) {
    throw ContractError("backward needs a scalar loss, got shape " + shape_string(root.value.shape()));
  }

  std::vector<DenseArray> grads(loss.id + 1);
  if (root.requires_grad) grads[loss.id] = DenseArray(root.value.shape(), 1.0);

  std::vector<DenseArray*> slots;
  for (std::size_t i = loss.id + 1; i-- > 0;) {
    const Node& node = nodes_[i];
    if (!node.requires_grad || !node.pullback || grads[i].empty()) continue;
    slots.assign(node.inputs.size(), nullptr);
    for (std::size_t j = 0; j < node.inputs.size(); ++j) {
      const std::size_t in = node.inputs[j].id;
      if (!nodes_[in].requires_grad) continue;
      if (grads[in].empty()) grads[in] = DenseArray(nodes_[in].value.shape(), 0.0);
      slots[j] = &grads[in];
    }
    node.pullback(grads[i], slots);
    // Intermediate gradients are no longer needed once propagated.
    if (node.param_name.empty()) grads[i] = DenseArray();
  }

  Gradients out;
  for (std::size_t id : params_) {
    const Node& p = nodes_[id];
    if (id < grads.size() && !grads[id].empty()) {
      if (!grads[id].all_finite()) throw NumericError("gradient of '" + p.param_name + "' is non-finite");
      out.emplace(p.param_name, std::move(grads[id]));
    } else {
      out.emplace(p.param_name, DenseArray(p.value.shape(), 0.0));
    }
  }
  return out;
}

}  // namespace mdiff::num
