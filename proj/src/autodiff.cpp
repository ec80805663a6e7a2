#include "surromesh/autodiff.hpp"

namespace surromesh {

const Tensor& Var::value() const { return tape->value(id); }
const Tensor& Var::grad() const { return static_cast<const Tape*>(tape)->grad(id); }

Var Tape::leaf(Tensor value) {
    bool rg = value.requires_grad;
    return leaf(std::move(value), rg);
}

Var Tape::leaf(Tensor value, bool requires_grad) {
    Node n;
    n.value = std::move(value);
    n.on_grad_path = requires_grad;
    nodes_.push_back(std::move(n));
    return Var{this, nodes_.size() - 1};
}

Var Tape::record(Tensor value, std::vector<std::size_t> parents, BackwardFn fn) {
    Node n;
    n.value = std::move(value);
    n.on_grad_path = needs_grad(parents);
    n.parents = std::move(parents);
    if (n.on_grad_path) n.backward = std::move(fn);
    nodes_.push_back(std::move(n));
    return Var{this, nodes_.size() - 1};
}

bool Tape::needs_grad(const std::vector<std::size_t>& parents) const {
    for (std::size_t p : parents)
        if (nodes_[p].on_grad_path) return true;
    return false;
}

Tensor& Tape::grad(std::size_t id) {
    Node& n = nodes_[id];
    if (n.grad.size() == 0) n.grad = Tensor::zeros(n.value.shape());
    return n.grad;
}

const Tensor& Tape::grad(std::size_t id) const {
    static const Tensor empty;
    const Node& n = nodes_[id];
    return n.grad.size() ? n.grad : empty;
}

void Tape::backward(Var loss) {
    if (loss.tape != this) throw Error("backward: loss recorded on a different tape");
    if (value(loss.id).size() != 1)
        throw Error("backward: loss must be scalar, got shape " + value(loss.id).shape_str());

    for (Node& n : nodes_)
        if (n.grad.size()) n.grad.fill(0.0);
    ran_backward_ = true;

    grad(loss.id)[0] = 1.0;
    for (std::size_t i = nodes_.size(); i-- > 0;) {
        Node& n = nodes_[i];
        if (n.backward && n.on_grad_path) n.backward(*this, i);
    }
}

} // namespace surromesh
