#include "dcan/tape.hpp"

#include "dcan/errors.hpp"

namespace dcan {

const Tensor& Var::value() const {
    if (!tape_) throw ContractError("use of an unbound Var");
    return tape_->value(*this);
}

const Tensor& BackwardContext::out() const { return tape_.nodes_[node_].value; }

const Tensor& BackwardContext::out_grad() const { return *(*tape_.sweep_)[node_]; }

const Tensor& BackwardContext::input(std::size_t i) const {
    return tape_.nodes_[tape_.nodes_[node_].parents.at(i)].value;
}

bool BackwardContext::needs(std::size_t i) const {
    return tape_.nodes_[tape_.nodes_[node_].parents.at(i)].requires_grad;
}

Tensor& BackwardContext::grad(std::size_t i) const {
    const std::size_t p = tape_.nodes_[node_].parents.at(i);
    auto& slot = (*tape_.sweep_)[p];
    if (!slot) slot.emplace(tape_.nodes_[p].value.shape(), 0.0);
    return *slot;
}

const Tensor& Gradients::of(Var v) const {
    if (v.id() >= grads_.size()) throw ContractError("Var is not part of this gradient sweep");
    if (grads_[v.id()]) return *grads_[v.id()];
    auto it = zeros_.find(v.id());
    if (it == zeros_.end()) it = zeros_.emplace(v.id(), Tensor(shapes_[v.id()], 0.0)).first;
    return it->second;
}

Var Tape::leaf(Tensor value) {
    nodes_.push_back(Node{"leaf", std::move(value), {}, {}, true});
    return Var(this, nodes_.size() - 1);
}

Var Tape::constant(Tensor value) {
    nodes_.push_back(Node{"const", std::move(value), {}, {}, false});
    return Var(this, nodes_.size() - 1);
}

void Tape::check_owner(Var v) const {
    if (v.tape() != this || v.id() >= nodes_.size()) throw ContractError("Var belongs to a different tape");
}

Var Tape::record(std::string_view op, Tensor value, std::vector<Var> parents, BackwardFn backward) {
    if (!value.all_finite()) {
        throw NumericError("non-finite value produced by '" + std::string(op) + "'");
    }
    Node node{std::string(op), std::move(value), {}, std::move(backward), false};
    node.parents.reserve(parents.size());
    for (Var p : parents) {
        check_owner(p);
        node.parents.push_back(p.id());
        node.requires_grad = node.requires_grad || nodes_[p.id()].requires_grad;
    }
    nodes_.push_back(std::move(node));
    return Var(this, nodes_.size() - 1);
}

const Tensor& Tape::value(Var v) const {
    check_owner(v);
    return nodes_[v.id()].value;
}

std::vector<std::string> Tape::trace() const {
    std::vector<std::string> ops;
    ops.reserve(nodes_.size());
    for (const Node& n : nodes_) ops.push_back(n.op);
    return ops;
}

Gradients Tape::grad(Var output) {
    check_owner(output);
    if (nodes_[output.id()].value.size() != 1) {
        throw ContractError("grad() needs a scalar output, got shape " +
                            shape_string(nodes_[output.id()].value.shape()));
    }
    Gradients result;
    result.grads_.assign(nodes_.size(), std::nullopt);
    result.grads_[output.id()].emplace(nodes_[output.id()].value.shape(), 1.0);
    sweep_ = &result.grads_;
    for (std::size_t i = output.id() + 1; i-- > 0;) {
        Node& n = nodes_[i];
        if (!n.requires_grad || !n.backward || !result.grads_[i]) continue;
        n.backward(BackwardContext(*this, i));
    }
    sweep_ = nullptr;

    result.shapes_.reserve(nodes_.size());
    for (const Node& n : nodes_) result.shapes_.push_back(n.value.shape());
    return result;
}

}  // namespace dcan
