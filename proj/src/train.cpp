#include "surromesh/train.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <fstream>

namespace surromesh {

nlohmann::json train_run_to_json(const TrainRunConfig& run) {
    nlohmann::json j;
    j["batch_size"] = run.batch_size;
    j["epochs"] = run.epochs;
    j["seed"] = run.seed;
    j["optimizer"] = {{"kind", run.optimizer.kind == OptimizerKind::Adam ? "adam" : "adamw"},
                      {"lr", run.optimizer.lr},
                      {"beta1", run.optimizer.beta1},
                      {"beta2", run.optimizer.beta2},
                      {"eps", run.optimizer.eps},
                      {"weight_decay", run.optimizer.weight_decay}};
    j["plateau"] = {{"patience", run.plateau.patience},
                    {"factor", run.plateau.factor},
                    {"floor", run.plateau.floor}};
    j["checkpoint_every"] = run.checkpoint_every;
    j["target_loss"] = run.target_loss;
    j["grad_clip"] = run.grad_clip;
    return j;
}

TrainRunConfig train_run_from_json(const nlohmann::json& j) {
    TrainRunConfig run;
    try {
        run.batch_size = j.at("batch_size").get<std::size_t>();
        run.epochs = j.at("epochs").get<std::size_t>();
        run.seed = j.at("seed").get<std::uint64_t>();
        if (j.contains("optimizer")) {
            const auto& o = j.at("optimizer");
            const std::string kind = o.value("kind", "adam");
            if (kind == "adam") run.optimizer.kind = OptimizerKind::Adam;
            else if (kind == "adamw") run.optimizer.kind = OptimizerKind::AdamW;
            else throw FormatError("train config: unknown optimizer '" + kind + "'");
            run.optimizer.lr = o.value("lr", run.optimizer.lr);
            run.optimizer.beta1 = o.value("beta1", run.optimizer.beta1);
            run.optimizer.beta2 = o.value("beta2", run.optimizer.beta2);
            run.optimizer.eps = o.value("eps", run.optimizer.eps);
            run.optimizer.weight_decay = o.value("weight_decay", run.optimizer.weight_decay);
        }
        if (j.contains("plateau")) {
            const auto& p = j.at("plateau");
            run.plateau.patience = p.value("patience", run.plateau.patience);
            run.plateau.factor = p.value("factor", run.plateau.factor);
            run.plateau.floor = p.value("floor", run.plateau.floor);
        }
        run.checkpoint_every = j.value("checkpoint_every", run.checkpoint_every);
        run.target_loss = j.value("target_loss", run.target_loss);
        run.grad_clip = j.value("grad_clip", run.grad_clip);
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("train config json: ") + e.what());
    }
    return run;
}

TrainResult train(const Model& model, ModelParameters& params, const Dataset& data,
                  const TrainRunConfig& run, const TrainProgress* resume,
                  const Optimizer::State* resume_state, const CheckpointHook& hook,
                  std::ostream* log) {
    if (data.n_train == 0) throw DataError("train: dataset has no training samples");
    if (run.batch_size == 0) throw ConfigError("train: batch_size must be >= 1");
    check_parameters(model, params);

    Optimizer optimizer(run.optimizer);
    TrainProgress progress;
    progress.lr = run.optimizer.lr;
    progress.best_loss = std::numeric_limits<double>::infinity();
    if (resume) {
        progress = *resume;
        optimizer.set_learning_rate(progress.lr);
    }
    if (resume_state) optimizer.restore_state(*resume_state);

    const std::size_t n = data.n_train;
    std::vector<std::size_t> order(n);
    std::map<std::string, Tensor> grad_accum;
    for (const ParamSpec& spec : model.parameter_specs())
        grad_accum.emplace(spec.name, Tensor::zeros(spec.shape));

    TrainResult result;
    Tensor f_tensor({data.n_dofs});
    Tensor u_tensor({data.n_dofs});

    for (std::size_t epoch = progress.epochs_done; epoch < run.epochs; ++epoch) {
        // Per-epoch derived stream so a resumed run shuffles identically.
        Rng rng(mix_seed(run.seed, epoch));
        for (std::size_t i = 0; i < n; ++i) order[i] = i;
        for (std::size_t i = n; i > 1; --i) {
            const std::size_t j = static_cast<std::size_t>(rng.below(i));
            std::swap(order[i - 1], order[j]);
        }

        double epoch_loss = 0.0;
        for (std::size_t start = 0; start < n; start += run.batch_size) {
            const std::size_t end = std::min(n, start + run.batch_size);
            for (auto& [name, g] : grad_accum) g.fill(0.0);
            for (std::size_t k = start; k < end; ++k) {
                const std::size_t idx = order[k];
                f_tensor.vec() = data.forces[idx];
                u_tensor.vec() = data.displacements[idx];
                Tape tape;
                TapeParams tp(tape, params, true);
                Var loss = forward_sample_loss(model, tape, tp, f_tensor, u_tensor);
                tape.backward(loss);
                const double l = loss.value()[0];
                if (!std::isfinite(l)) throw TrainingError("train: non-finite loss at epoch " +
                                                           std::to_string(epoch));
                epoch_loss += l;
                for (const auto& [name, var] : tp.vars()) {
                    const Tensor& g = var.grad();
                    Tensor& acc = grad_accum[name];
                    for (std::size_t i = 0; i < g.size(); ++i) acc[i] += g[i];
                }
            }
            const double inv = 1.0 / static_cast<double>(end - start);
            for (auto& [name, g] : grad_accum)
                for (std::size_t i = 0; i < g.size(); ++i) g[i] *= inv;
            if (run.grad_clip > 0.0) {
                double norm2 = 0.0;
                for (const auto& [name, g] : grad_accum)
                    for (std::size_t i = 0; i < g.size(); ++i) norm2 += g[i] * g[i];
                const double norm = std::sqrt(norm2);
                if (norm > run.grad_clip) {
                    const double s = run.grad_clip / norm;
                    for (auto& [name, g] : grad_accum)
                        for (std::size_t i = 0; i < g.size(); ++i) g[i] *= s;
                }
            }
            optimizer.step(params, grad_accum);
        }
        const double mean_loss = epoch_loss / static_cast<double>(n);
        result.loss_history.push_back(mean_loss);
        progress.epochs_done = epoch + 1;
        result.final_loss = mean_loss;

        if (mean_loss < progress.best_loss) {
            progress.best_loss = mean_loss;
            progress.plateau_counter = 0;
        } else if (++progress.plateau_counter >= run.plateau.patience) {
            progress.plateau_counter = 0;
            const double lr = std::max(run.plateau.floor, optimizer.learning_rate() * run.plateau.factor);
            optimizer.set_learning_rate(lr);
        }
        progress.lr = optimizer.learning_rate();

        if (log && run.log_every > 0 && (epoch + 1) % run.log_every == 0)
            (*log) << "epoch " << (epoch + 1) << " mean_loss " << mean_loss << " lr "
                   << progress.lr << "\n";
        if (hook && run.checkpoint_every > 0 && (epoch + 1) % run.checkpoint_every == 0)
            hook(progress, optimizer.state(), params, result.loss_history);
        if (run.target_loss > 0.0 && mean_loss <= run.target_loss) break;
    }
    result.epochs_done = progress.epochs_done;
    if (hook) hook(progress, optimizer.state(), params, result.loss_history);
    return result;
}

void write_loss_history_csv(const std::vector<double>& history, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot open " + path + " for writing");
    out << "epoch,mean_loss\n";
    out.precision(17);
    for (std::size_t e = 0; e < history.size(); ++e) out << (e + 1) << "," << history[e] << "\n";
}

} // namespace surromesh
