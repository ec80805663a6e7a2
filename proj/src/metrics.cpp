#include "surromesh/metrics.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>

namespace surromesh {

double example_error(const std::vector<double>& pred, const std::vector<double>& truth) {
    if (pred.size() != truth.size() || pred.empty())
        throw DimensionError("example_error: vector lengths differ");
    double acc = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) acc += std::fabs(pred[i] - truth[i]);
    return acc / static_cast<double>(pred.size());
}

MetricsReport aggregate(const std::vector<double>& e_m, const std::vector<double>& all_abs_errors) {
    if (e_m.size() < 2) throw DataError("aggregate: sigma(e) undefined for M < 2");
    MetricsReport report;
    report.M = e_m.size();
    report.e_m = e_m;
    double sum = 0.0;
    for (double e : e_m) sum += e;
    report.e_bar = sum / static_cast<double>(e_m.size());
    double var = 0.0;
    for (double e : e_m) var += (e - report.e_bar) * (e - report.e_bar);
    report.sigma_e = std::sqrt(var / static_cast<double>(e_m.size() - 1));
    report.e_max = 0.0;
    for (double a : all_abs_errors) report.e_max = std::max(report.e_max, a);
    return report;
}

MetricsReport evaluate_model(const Model& model, const ModelParameters& params,
                             const Dataset& data) {
    if (data.n_test == 0) throw DataError("evaluate: dataset has no test split");
    std::vector<double> e_m;
    double e_max = 0.0;
    Tensor f({data.n_dofs});
    for (std::size_t s = data.n_train; s < data.size(); ++s) {
        f.vec() = data.forces[s];
        const Tensor pred = model.predict(params, f);
        const auto& truth = data.displacements[s];
        double acc = 0.0;
        for (std::size_t i = 0; i < data.n_dofs; ++i) {
            const double a = std::fabs(pred[i] - truth[i]);
            acc += a;
            e_max = std::max(e_max, a);
        }
        e_m.push_back(acc / static_cast<double>(data.n_dofs));
    }
    if (e_m.size() < 2) {
        MetricsReport report;
        report.M = e_m.size();
        report.e_m = e_m;
        report.e_bar = e_m.empty() ? 0.0 : e_m[0];
        report.sigma_e = 0.0;
        report.e_max = e_max;
        return report;
    }
    std::vector<double> dummy{e_max};
    return aggregate(e_m, dummy);
}

double percent_node_error(const std::vector<double>& pred, const std::vector<double>& truth,
                          std::size_t node, int dim) {
    double dn = 0.0, tn = 0.0;
    for (int a = 0; a < dim; ++a) {
        const double d = pred[node * dim + a] - truth[node * dim + a];
        dn += d * d;
        tn += truth[node * dim + a] * truth[node * dim + a];
    }
    if (tn == 0.0) throw DataError("percent_node_error: zero truth displacement at node " +
                                   std::to_string(node));
    return 100.0 * std::sqrt(dn) / std::sqrt(tn);
}

void export_error_field(const Mesh& mesh, const std::vector<double>& pred,
                        const std::vector<double>& truth, const std::string& path) {
    if (pred.size() != mesh.n_dofs() || truth.size() != mesh.n_dofs())
        throw DimensionError("export_error_field: vector lengths do not match mesh dofs");
    std::ofstream out(path);
    if (!out) throw DataError("cannot open " + path + " for writing");
    out.precision(17);
    out << "node";
    const char* axes = "xyz";
    for (int a = 0; a < mesh.dim; ++a) out << "," << axes[a];
    for (int a = 0; a < mesh.dim; ++a) out << ",u" << axes[a];
    out << ",error\n";
    for (std::size_t n = 0; n < mesh.n_nodes(); ++n) {
        out << n;
        for (int a = 0; a < mesh.dim; ++a) out << "," << mesh.coord(n, a);
        for (int a = 0; a < mesh.dim; ++a) out << "," << pred[n * mesh.dim + a];
        double err2 = 0.0;
        for (int a = 0; a < mesh.dim; ++a) {
            const double d = pred[n * mesh.dim + a] - truth[n * mesh.dim + a];
            err2 += d * d;
        }
        out << "," << std::sqrt(err2) << "\n";
    }
    if (!out) throw DataError("short write to " + path);
}

namespace {
double median(std::vector<double> v) {
    if (v.empty()) return 0.0;
    std::sort(v.begin(), v.end());
    const std::size_t mid = v.size() / 2;
    return v.size() % 2 ? v[mid] : 0.5 * (v[mid - 1] + v[mid]);
}
} // namespace

TimingReport timing_probe(const Model& model, const ModelParameters& params,
                          const std::vector<std::vector<double>>& forces,
                          std::size_t repetitions) {
    if (repetitions < 3) throw ConfigError("timing_probe: repetitions must be >= 3");
    if (forces.empty()) throw DataError("timing_probe: no examples");
    using clock = std::chrono::steady_clock;

    TimingReport report;
    report.repetitions = repetitions;
    std::vector<double> magnitudes;
    Tensor f({forces[0].size()});
    for (const auto& row : forces) {
        f.vec() = row;
        double m2 = 0.0;
        for (double v : row) m2 += v * v;
        magnitudes.push_back(std::sqrt(m2));
        std::vector<double> times;
        for (std::size_t r = 0; r < repetitions; ++r) {
            const auto t0 = clock::now();
            volatile double sink = model.predict(params, f)[0];
            (void)sink;
            const auto t1 = clock::now();
            times.push_back(std::chrono::duration<double>(t1 - t0).count());
        }
        report.per_example_seconds.push_back(median(times));
    }
    report.overall_median = median(report.per_example_seconds);

    // quartiles over ascending |f|
    std::vector<std::size_t> idx(forces.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    std::sort(idx.begin(), idx.end(),
              [&](std::size_t a, std::size_t b) { return magnitudes[a] < magnitudes[b]; });
    for (std::size_t q = 0; q < 4; ++q) {
        const std::size_t lo = q * idx.size() / 4;
        const std::size_t hi = (q + 1) * idx.size() / 4;
        std::vector<double> bucket;
        for (std::size_t k = lo; k < hi; ++k) bucket.push_back(report.per_example_seconds[idx[k]]);
        report.quartile_medians[q] = median(bucket);
    }
    return report;
}

nlohmann::json metrics_to_json(const MetricsReport& report) {
    nlohmann::json j;
    j["M"] = report.M;
    j["e_bar"] = report.e_bar;
    j["sigma_e"] = report.sigma_e;
    j["e_max"] = report.e_max;
    j["e_m"] = report.e_m;
    if (report.timing.repetitions > 0) {
        j["timing"] = {{"per_example_seconds", report.timing.per_example_seconds},
                       {"quartile_medians", report.timing.quartile_medians},
                       {"overall_median", report.timing.overall_median},
                       {"repetitions", report.timing.repetitions}};
    }
    return j;
}

void save_metrics(const MetricsReport& report, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot open " + path + " for writing");
    out << metrics_to_json(report).dump(2) << "\n";
}

} // namespace surromesh
