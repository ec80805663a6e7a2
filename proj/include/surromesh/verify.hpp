#pragma once

#include <string>
#include <vector>

namespace surromesh {

struct VerifySuiteResult {
    std::string name;
    double max_rel_err = 0.0;
    double tolerance = 0.0;
    bool pass = false;
};

struct VerifyOptions {
    // Test fixture: corrupts one analytic gradient so the gradient suite must
    // report a failure (negative control for the oracle machinery).
    bool inject_gradient_fault = false;
    std::uint64_t seed = 99;
};

// Runs the independent oracle suites: finite-difference gradient checks per
// layer type, FEM patch tests against closed-form stress, adjacency powers
// against dense boolean products, MAg against the triple-loop reference, and
// metric brute-force loops.
std::vector<VerifySuiteResult> run_verification(const VerifyOptions& options = {});

bool all_passed(const std::vector<VerifySuiteResult>& results);

} // namespace surromesh
