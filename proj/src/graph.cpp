#include "rezero/tensor.hpp"

namespace rezero {

bool GradSink::wants(std::size_t k) const {
  return graph_.nodes_[inputs_[k]].requires_grad;
}

void GradSink::add(std::size_t k, const Vector& contribution) {
  if (wants(k)) graph_.accumulate(inputs_[k], contribution);
}

Tensor Graph::attach(Tensor value, NodeId id) {
  value.graph_ = this;
  value.node_ = id;
  return value;
}

Tensor Graph::variable(const Tensor& value) {
  nodes_.push_back({OpKind::Variable, {}, nullptr, value.size(), true, nullptr});
  return attach(value.detached(), nodes_.size() - 1);
}

Tensor Graph::constant(const Tensor& value) {
  nodes_.push_back({OpKind::Constant, {}, nullptr, value.size(), false, nullptr});
  return attach(value.detached(), nodes_.size() - 1);
}

Tensor Graph::parameter(Parameter& p) {
  if (auto it = param_index_.find(&p); it != param_index_.end()) {
    return attach(p.value(), it->second);
  }
  nodes_.push_back({OpKind::Parameter, {}, nullptr, p.value().size(), true, &p});
  params_.emplace_back(&p, nodes_.size() - 1);
  param_index_.emplace(&p, nodes_.size() - 1);
  return attach(p.value(), nodes_.size() - 1);
}

NodeId Graph::adopt(const Tensor& t) {
  if (t.graph_ == this) return t.node_;
  if (t.graph_ != nullptr) throw ContractError("operands belong to different graphs");
  return constant(t).node_;
}

Tensor Graph::record(OpKind kind, Tensor value, const std::vector<Tensor>& inputs,
                     Backward backward) {
  Node node{kind, {}, nullptr, value.size(), false, nullptr};
  node.inputs.reserve(inputs.size());
  for (const Tensor& in : inputs) {
    const NodeId id = adopt(in);
    node.inputs.push_back(id);
    node.requires_grad = node.requires_grad || nodes_[id].requires_grad;
  }
  if (node.requires_grad) node.backward = std::move(backward);
  nodes_.push_back(std::move(node));
  return attach(value.detached(), nodes_.size() - 1);
}

void Graph::accumulate(NodeId id, const Vector& contribution) {
  Vector& g = grads_[id];
  if (g.size() == 0) {
    g = contribution;
  } else {
    g += contribution;
  }
}

void Graph::sweep(NodeId start, const Vector& seed) {
  grads_.assign(nodes_.size(), Vector());
  visited_.clear();
  grads_[start] = seed;
  for (NodeId id = start + 1; id-- > 0;) {
    Node& node = nodes_[id];
    if (!node.requires_grad || grads_[id].size() == 0) continue;
    visited_.push_back(id);
    if (node.backward) {
      GradSink sink(*this, node.inputs);
      node.backward(grads_[id], sink);
    }
  }
  for (auto& [param, id] : params_) {
    if (grads_[id].size() == 0) {
      param->grad().setZero();
    } else {
      param->grad() = grads_[id];
    }
  }
}

void Graph::backward(const Tensor& loss) {
  if (loss.graph_ != this) throw ContractError("loss was not produced on this graph");
  if (!loss.is_scalar()) {
    throw ContractError("backward needs a scalar loss, got shape " + shape_string(loss.shape()));
  }
  sweep(loss.node_, Vector::Ones(1));
}

void Graph::backward(const Tensor& output, const Tensor& cotangent) {
  if (output.graph_ != this) throw ContractError("output was not produced on this graph");
  if (output.shape() != cotangent.shape()) {
    throw ShapeError("cotangent shape " + shape_string(cotangent.shape()) +
                     " does not match output shape " + shape_string(output.shape()));
  }
  sweep(output.node_, cotangent.data());
}

Tensor Graph::gradient(const Tensor& t) const {
  if (t.graph_ != this) throw ContractError("tensor is not on this graph");
  if (t.node_ < grads_.size() && grads_[t.node_].size() != 0) {
    return Tensor(t.shape(), grads_[t.node_]);
  }
  return Tensor::zeros(t.shape());
}

std::vector<Parameter*> Graph::parameters() const {
  std::vector<Parameter*> out;
  out.reserve(params_.size());
  for (const auto& [param, id] : params_) out.push_back(param);
  return out;
}

Tensor bind(Parameter& p, Graph* g) {
  return g ? g->parameter(p) : p.value();
}

}  // namespace rezero
