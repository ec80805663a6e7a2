#include "surromesh/optim.hpp"

#include <cmath>

namespace surromesh {

bool weight_decay_excluded(const std::string& name) {
    if (name.find("pos_embed") != std::string::npos) return true;
    if (name.find("out_query") != std::string::npos) return true;
    if (name.find("latents") != std::string::npos) return true;
    const std::size_t dot = name.rfind('.');
    const std::string leaf = dot == std::string::npos ? name : name.substr(dot + 1);
    if (!leaf.empty() && leaf[0] == 'b') return true;      // biases
    return leaf == "g" || leaf == "s";                     // layer norm affine
}

void Optimizer::step(ModelParameters& params, const std::map<std::string, Tensor>& grads) {
    ++state_.t;
    const double b1 = config_.beta1, b2 = config_.beta2;
    const double c1 = 1.0 - std::pow(b1, static_cast<double>(state_.t));
    const double c2 = 1.0 - std::pow(b2, static_cast<double>(state_.t));
    for (auto& [name, param] : params) {
        auto git = grads.find(name);
        if (git == grads.end()) throw TrainingError("optimizer: missing gradient for '" + name + "'");
        const Tensor& g = git->second;
        check_same_shape(param, g, "optimizer");
        if (!g.all_finite()) throw TrainingError("optimizer: non-finite gradient for '" + name + "'");

        Tensor& m = state_.m.try_emplace(name, Tensor::zeros(param.shape())).first->second;
        Tensor& v = state_.v.try_emplace(name, Tensor::zeros(param.shape())).first->second;

        if (config_.kind == OptimizerKind::AdamW && config_.weight_decay != 0.0 &&
            !weight_decay_excluded(name)) {
            const double shrink = 1.0 - lr_ * config_.weight_decay;
            for (std::size_t i = 0; i < param.size(); ++i) param[i] *= shrink;
        }
        for (std::size_t i = 0; i < param.size(); ++i) {
            m[i] = b1 * m[i] + (1.0 - b1) * g[i];
            v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i];
            const double mhat = m[i] / c1;
            const double vhat = v[i] / c2;
            param[i] -= lr_ * mhat / (std::sqrt(vhat) + config_.eps);
        }
    }
}

} // namespace surromesh
