#pragma once

#include <functional>
#include <limits>
#include <ostream>

#include <nlohmann/json_fwd.hpp>

#include "surromesh/checkpoint.hpp"
#include "surromesh/dataset.hpp"
#include "surromesh/models/common.hpp"
#include "surromesh/optim.hpp"

namespace surromesh {

struct PlateauConfig {
    std::size_t patience = 50; // epochs without improvement before halving
    double factor = 0.5;
    double floor = 1e-6;
};

struct TrainRunConfig {
    std::size_t batch_size = 16;
    std::size_t epochs = 0;
    std::uint64_t seed = 0;
    OptimizerConfig optimizer;
    PlateauConfig plateau;
    std::size_t checkpoint_every = 0; // epochs; 0 = final only
    double target_loss = 0.0;         // early stop when epoch mean <= target; 0 = off
    double grad_clip = 0.0;           // max global gradient norm; 0 = off
    std::size_t log_every = 0;        // epochs; 0 = silent
};

nlohmann::json train_run_to_json(const TrainRunConfig& run);
TrainRunConfig train_run_from_json(const nlohmann::json& j);

struct TrainResult {
    std::vector<double> loss_history; // epoch means, resumed epochs included
    std::size_t epochs_done = 0;
    double final_loss = std::numeric_limits<double>::infinity();
};

// Invoked at every checkpoint cadence and once after the final epoch.
using CheckpointHook =
    std::function<void(const TrainProgress&, const Optimizer::State&, const ModelParameters&,
                       const std::vector<double>& history)>;

// Minimizes the mean squared training objective with seeded shuffling and
// per-epoch derived RNG streams, so resuming from a checkpoint reproduces an
// uninterrupted run exactly. Aborts with TrainingError on non-finite loss.
TrainResult train(const Model& model, ModelParameters& params, const Dataset& data,
                  const TrainRunConfig& run, const TrainProgress* resume = nullptr,
                  const Optimizer::State* resume_state = nullptr,
                  const CheckpointHook& hook = nullptr, std::ostream* log = nullptr);

void write_loss_history_csv(const std::vector<double>& history, const std::string& path);

} // namespace surromesh
