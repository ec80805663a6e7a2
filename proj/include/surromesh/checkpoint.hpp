#pragma once

#include <string>

#include "surromesh/models/common.hpp"
#include "surromesh/optim.hpp"

namespace surromesh {

// Progress needed to resume a run deterministically.
struct TrainProgress {
    std::size_t epochs_done = 0;
    double lr = 0.0;
    double best_loss = 0.0;
    std::size_t plateau_counter = 0;
};

struct Checkpoint {
    ModelConfig model;
    ModelParameters params;
    OptimizerConfig optimizer;
    Optimizer::State opt_state;
    TrainProgress progress;
};

// Single file: little-endian u64 header length, JSON header (configs, named
// tensor shapes and byte offsets), then the raw little-endian float64 payload.
void save_checkpoint(const Checkpoint& ckpt, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

} // namespace surromesh
