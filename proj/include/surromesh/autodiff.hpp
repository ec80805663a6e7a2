#pragma once

#include <cstddef>
#include <functional>
#include <vector>

#include "surromesh/tensor.hpp"

namespace surromesh {

class Tape;

// Handle to a value recorded on a Tape. Cheap to copy; valid for the
// lifetime of the owning tape.
struct Var {
    Tape* tape = nullptr;
    std::size_t id = 0;

    const Tensor& value() const;
    const Tensor& grad() const;
    const std::vector<std::size_t>& shape() const { return value().shape(); }
    bool valid() const { return tape != nullptr; }
};

// Reverse-mode autodiff tape. Operations append nodes in evaluation order,
// so the recorded list is always topologically sorted; backward() walks it
// once in reverse. A tape is single-owner and rebuilt per forward pass.
class Tape {
public:
    using BackwardFn = std::function<void(Tape&, std::size_t self)>;

    Tape() = default;
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    // Registers an input or parameter. requires_grad is taken from the tensor.
    Var leaf(Tensor value);
    Var leaf(Tensor value, bool requires_grad);

    // Appends an operation node. `fn` may be empty when no parent needs a
    // gradient; such nodes are skipped during the backward sweep.
    Var record(Tensor value, std::vector<std::size_t> parents, BackwardFn fn);

    bool needs_grad(const std::vector<std::size_t>& parents) const;

    // Reverse accumulation from a scalar loss. Gradients are reset first, so
    // calling backward twice on the same tape is bit-identical.
    void backward(Var loss);

    const Tensor& value(std::size_t id) const { return nodes_[id].value; }
    Tensor& grad(std::size_t id);
    const Tensor& grad(std::size_t id) const;
    bool grad_path(std::size_t id) const { return nodes_[id].on_grad_path; }
    std::size_t size() const { return nodes_.size(); }

private:
    struct Node {
        Tensor value;
        Tensor grad;            // allocated lazily in backward()
        bool on_grad_path = false;
        std::vector<std::size_t> parents;
        BackwardFn backward;
    };
    std::vector<Node> nodes_;
    bool ran_backward_ = false;
};

} // namespace surromesh
