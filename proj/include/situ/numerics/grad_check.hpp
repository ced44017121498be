#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "situ/numerics/tensor.hpp"

namespace situ::num {

struct GradCheckOptions {
    double eps = 1e-5;
    double tol = 1e-4;
    // Coordinates sampled per parameter tensor; 0 checks every coordinate.
    std::size_t coords_per_param = 0;
    std::uint64_t seed = 0;
    // Relative error is |a - n| / max(|a|, |n|, floor * max(1, |f|)).
    double floor = 1e-6;
};

struct GradCheckReport {
    double max_rel_error = 0.0;
    std::size_t coords_checked = 0;
    bool passed = false;
    std::string worst;  // "param[i] coord j: analytic a, numeric n"
};

// `loss` must rebuild the scalar from the current parameter values on every
// call. Analytic gradients come from one taped evaluation; numeric ones from
// central differences (f(p + eps) - f(p - eps)) / (2 eps).
GradCheckReport grad_check(const std::function<Tensor()>& loss, std::vector<Tensor> params,
                           const GradCheckOptions& options = {});

}  // namespace situ::num
