#pragma once

#include <array>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "surromesh/dataset.hpp"
#include "surromesh/mesh.hpp"
#include "surromesh/models/common.hpp"

namespace surromesh {

// Per-example inference timing, bucketed by load-magnitude quartile.
struct TimingReport {
    std::vector<double> per_example_seconds; // median over repetitions
    std::array<double, 4> quartile_medians{}; // by ascending |f|
    double overall_median = 0.0;
    std::size_t repetitions = 0;
};

struct MetricsReport {
    std::size_t M = 0;
    double e_bar = 0.0;   // mean of per-example mean absolute errors (m)
    double sigma_e = 0.0; // sample standard deviation, M-1 denominator (m)
    double e_max = 0.0;   // max absolute dof error over the test set (m)
    std::vector<double> e_m;
    TimingReport timing;
};

// Mean absolute error over all dofs of one example.
double example_error(const std::vector<double>& pred, const std::vector<double>& truth);

// e_bar, sigma(e) (M-1 denominator, M >= 2), and the global max error.
MetricsReport aggregate(const std::vector<double>& e_m, const std::vector<double>& all_abs_errors);

// Runs the model over the test split and aggregates the error metrics.
MetricsReport evaluate_model(const Model& model, const ModelParameters& params,
                             const Dataset& data);

// 100 * |pred_node - truth_node| / |truth_node| at one node.
double percent_node_error(const std::vector<double>& pred, const std::vector<double>& truth,
                          std::size_t node, int dim);

// CSV per node: index, rest coords, predicted displacement, error magnitude
// (Euclidean norm of the dof-wise absolute differences at the node).
void export_error_field(const Mesh& mesh, const std::vector<double>& pred,
                        const std::vector<double>& truth, const std::string& path);

// Median single-example forward time, repeated `repetitions` times per
// example and bucketed by force-norm quartile.
TimingReport timing_probe(const Model& model, const ModelParameters& params,
                          const std::vector<std::vector<double>>& forces,
                          std::size_t repetitions);

nlohmann::json metrics_to_json(const MetricsReport& report);
void save_metrics(const MetricsReport& report, const std::string& path);

} // namespace surromesh
