#pragma once

#include <functional>
#include <string>
#include <vector>

#include "surromesh/tensor.hpp"

namespace surromesh {

// Scalar objective evaluated at the given parameter values (order fixed).
using ScalarFn = std::function<double(const std::vector<Tensor>&)>;
// Analytic gradients at the given parameter values, same order and shapes.
using GradientFn = std::function<std::vector<Tensor>(const std::vector<Tensor>&)>;

struct GradCheckReport {
    double max_rel_err = 0.0;
    std::size_t worst_param = 0;
    std::size_t worst_coord = 0;
    double worst_analytic = 0.0;
    double worst_numeric = 0.0;
};

// Central-difference gradient oracle. Relative error uses the denominator
// max(|analytic|, |numeric|, 1e-12) per coordinate; the report carries the
// worst coordinate found.
GradCheckReport finite_diff_check(const ScalarFn& f, const GradientFn& grad,
                                  std::vector<Tensor> params, double step = 1e-6);

} // namespace surromesh
