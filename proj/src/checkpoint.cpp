#include "surromesh/checkpoint.hpp"

#include <nlohmann/json.hpp>

#include <bit>
#include <cstring>
#include <fstream>

namespace surromesh {

namespace {

static_assert(std::endian::native == std::endian::little,
              "checkpoints are little-endian; big-endian hosts are unsupported");

std::string optimizer_kind_name(OptimizerKind k) {
    return k == OptimizerKind::Adam ? "adam" : "adamw";
}

OptimizerKind optimizer_kind_from_name(const std::string& s) {
    if (s == "adam") return OptimizerKind::Adam;
    if (s == "adamw") return OptimizerKind::AdamW;
    throw FormatError("unknown optimizer kind '" + s + "'");
}

} // namespace

void save_checkpoint(const Checkpoint& ckpt, const std::string& path) {
    nlohmann::json header;
    header["version"] = 1;
    header["model"] = model_config_to_json(ckpt.model);
    header["optimizer"] = {{"kind", optimizer_kind_name(ckpt.optimizer.kind)},
                           {"lr", ckpt.optimizer.lr},
                           {"beta1", ckpt.optimizer.beta1},
                           {"beta2", ckpt.optimizer.beta2},
                           {"eps", ckpt.optimizer.eps},
                           {"weight_decay", ckpt.optimizer.weight_decay},
                           {"t", ckpt.opt_state.t}};
    header["progress"] = {{"epochs_done", ckpt.progress.epochs_done},
                          {"lr", ckpt.progress.lr},
                          {"best_loss", ckpt.progress.best_loss},
                          {"plateau_counter", ckpt.progress.plateau_counter}};

    auto tensors = nlohmann::json::array();
    std::size_t offset = 0;
    auto describe = [&](const std::string& group, const std::string& name, const Tensor& t) {
        tensors.push_back({{"group", group},
                           {"name", name},
                           {"shape", t.shape()},
                           {"offset_bytes", offset}});
        offset += t.size() * sizeof(double);
    };
    for (const auto& [name, t] : ckpt.params) describe("param", name, t);
    for (const auto& [name, t] : ckpt.opt_state.m) describe("m", name, t);
    for (const auto& [name, t] : ckpt.opt_state.v) describe("v", name, t);
    header["tensors"] = std::move(tensors);
    header["payload_bytes"] = offset;

    const std::string header_str = header.dump();
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot open " + path + " for writing");
    const std::uint64_t header_len = header_str.size();
    out.write(reinterpret_cast<const char*>(&header_len), sizeof(header_len));
    out.write(header_str.data(), static_cast<std::streamsize>(header_str.size()));
    auto write_tensor = [&](const Tensor& t) {
        out.write(reinterpret_cast<const char*>(t.data()),
                  static_cast<std::streamsize>(t.size() * sizeof(double)));
    };
    for (const auto& [name, t] : ckpt.params) write_tensor(t);
    for (const auto& [name, t] : ckpt.opt_state.m) write_tensor(t);
    for (const auto& [name, t] : ckpt.opt_state.v) write_tensor(t);
    if (!out) throw DataError("short write to " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open " + path);
    std::uint64_t header_len = 0;
    in.read(reinterpret_cast<char*>(&header_len), sizeof(header_len));
    if (in.gcount() != sizeof(header_len)) throw FormatError("checkpoint: truncated header length");
    std::string header_str(header_len, '\0');
    in.read(header_str.data(), static_cast<std::streamsize>(header_len));
    if (in.gcount() != static_cast<std::streamsize>(header_len))
        throw FormatError("checkpoint: truncated header");

    nlohmann::json header;
    try {
        header = nlohmann::json::parse(header_str);
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("checkpoint header: ") + e.what());
    }

    Checkpoint ckpt;
    try {
        ckpt.model = model_config_from_json(header.at("model"));
        const auto& opt = header.at("optimizer");
        ckpt.optimizer.kind = optimizer_kind_from_name(opt.at("kind").get<std::string>());
        ckpt.optimizer.lr = opt.at("lr").get<double>();
        ckpt.optimizer.beta1 = opt.at("beta1").get<double>();
        ckpt.optimizer.beta2 = opt.at("beta2").get<double>();
        ckpt.optimizer.eps = opt.at("eps").get<double>();
        ckpt.optimizer.weight_decay = opt.at("weight_decay").get<double>();
        ckpt.opt_state.t = opt.at("t").get<std::size_t>();
        const auto& prog = header.at("progress");
        ckpt.progress.epochs_done = prog.at("epochs_done").get<std::size_t>();
        ckpt.progress.lr = prog.at("lr").get<double>();
        ckpt.progress.best_loss = prog.at("best_loss").get<double>();
        ckpt.progress.plateau_counter = prog.at("plateau_counter").get<std::size_t>();

        const std::size_t payload_bytes = header.at("payload_bytes").get<std::size_t>();
        std::vector<char> payload(payload_bytes);
        in.read(payload.data(), static_cast<std::streamsize>(payload_bytes));
        if (in.gcount() != static_cast<std::streamsize>(payload_bytes))
            throw FormatError("checkpoint: truncated payload");

        for (const auto& tj : header.at("tensors")) {
            const std::string group = tj.at("group").get<std::string>();
            const std::string name = tj.at("name").get<std::string>();
            const auto shape = tj.at("shape").get<std::vector<std::size_t>>();
            const std::size_t offset = tj.at("offset_bytes").get<std::size_t>();
            std::size_t count = 1;
            for (std::size_t e : shape) count *= e;
            if (offset + count * sizeof(double) > payload_bytes)
                throw FormatError("checkpoint: tensor '" + name + "' exceeds payload");
            std::vector<double> data(count);
            std::memcpy(data.data(), payload.data() + offset, count * sizeof(double));
            Tensor t(shape, std::move(data));
            if (group == "param") {
                t.requires_grad = true;
                ckpt.params.emplace(name, std::move(t));
            } else if (group == "m") {
                ckpt.opt_state.m.emplace(name, std::move(t));
            } else if (group == "v") {
                ckpt.opt_state.v.emplace(name, std::move(t));
            } else {
                throw FormatError("checkpoint: unknown tensor group '" + group + "'");
            }
        }
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("checkpoint header: ") + e.what());
    }
    return ckpt;
}

} // namespace surromesh
