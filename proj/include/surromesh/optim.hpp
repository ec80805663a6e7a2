#pragma once

#include <cstdint>
#include <map>
#include <string>

#include "surromesh/models/common.hpp"

namespace surromesh {

enum class OptimizerKind { Adam, AdamW };

struct OptimizerConfig {
    OptimizerKind kind = OptimizerKind::Adam;
    double lr = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 0.01; // AdamW only
};

// Decoupled weight decay never touches biases, layer-norm gains/shifts, or
// the positional/query/latent embeddings.
bool weight_decay_excluded(const std::string& name);

// Adam / AdamW with bias-corrected moments. Parameters are traversed in
// name-sorted order; state tensors are keyed by parameter name.
class Optimizer {
public:
    struct State {
        std::size_t t = 0;
        std::map<std::string, Tensor> m;
        std::map<std::string, Tensor> v;
    };

    explicit Optimizer(OptimizerConfig config) : config_(config), lr_(config.lr) {}

    void step(ModelParameters& params, const std::map<std::string, Tensor>& grads);

    double learning_rate() const { return lr_; }
    void set_learning_rate(double lr) { lr_ = lr; }
    std::size_t step_count() const { return state_.t; }

    const OptimizerConfig& config() const { return config_; }
    const State& state() const { return state_; }
    void restore_state(State state) { state_ = std::move(state); }

private:
    OptimizerConfig config_;
    double lr_;
    State state_;
};

} // namespace surromesh
