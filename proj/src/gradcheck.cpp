#include "surromesh/gradcheck.hpp"

#include <algorithm>
#include <cmath>

namespace surromesh {

GradCheckReport finite_diff_check(const ScalarFn& f, const GradientFn& grad,
                                  std::vector<Tensor> params, double step) {
    if (step <= 0.0) throw Error("finite_diff_check: step must be > 0");
    const std::vector<Tensor> analytic = grad(params);
    if (analytic.size() != params.size())
        throw DimensionError("finite_diff_check: gradient count does not match parameter count");

    GradCheckReport report;
    for (std::size_t p = 0; p < params.size(); ++p) {
        check_same_shape(params[p], analytic[p], "finite_diff_check");
        for (std::size_t i = 0; i < params[p].size(); ++i) {
            const double saved = params[p][i];
            params[p][i] = saved + step;
            const double fp = f(params);
            params[p][i] = saved - step;
            const double fm = f(params);
            params[p][i] = saved;

            const double numeric = (fp - fm) / (2.0 * step);
            const double a = analytic[p][i];
            const double denom = std::max({std::fabs(a), std::fabs(numeric), 1e-12});
            const double rel = std::fabs(a - numeric) / denom;
            if (rel > report.max_rel_err) {
                report.max_rel_err = rel;
                report.worst_param = p;
                report.worst_coord = i;
                report.worst_analytic = a;
                report.worst_numeric = numeric;
            }
        }
    }
    return report;
}

} // namespace surromesh
