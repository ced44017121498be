#include "situ/numerics/grad_check.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <numeric>
#include <sstream>

#include "situ/common/error.hpp"
#include "situ/common/rng.hpp"
#include "situ/numerics/tape.hpp"

namespace situ::num {

GradCheckReport grad_check(const std::function<Tensor()>& loss, std::vector<Tensor> params,
                           const GradCheckOptions& options) {
    if (!(options.eps > 0.0)) throw ConfigError("grad_check: eps must be positive");

    const double base = loss().item();
    const double again = loss().item();
    if (std::memcmp(&base, &again, sizeof(double)) != 0) {
        throw PreconditionError("grad_check: loss is not deterministic across evaluations");
    }

    std::vector<std::vector<double>> analytic;
    {
        Tape tape;
        Tape::Scope scope(tape);
        const Tensor value = loss();
        const GradientMap grads = tape.backward(value);
        for (const auto& p : params) {
            auto it = grads.find(p.id());
            analytic.push_back(it == grads.end() ? std::vector<double>(p.size(), 0.0) : it->second);
        }
    }

    // Floor on the denominator, scaled with the loss: central differences carry
    // roundoff of about eps_mach * |f| / eps, so components this small relative
    // to the loss are noise on both sides.
    const double floor = std::max(options.floor, options.floor * std::fabs(base));

    Rng rng(options.seed);
    GradCheckReport report;
    for (std::size_t pi = 0; pi < params.size(); ++pi) {
        Tensor& p = params[pi];
        std::vector<std::size_t> coords(p.size());
        std::iota(coords.begin(), coords.end(), 0);
        if (options.coords_per_param != 0 && options.coords_per_param < coords.size()) {
            for (std::size_t i = 0; i < options.coords_per_param; ++i) {
                std::swap(coords[i], coords[i + rng.below(coords.size() - i)]);
            }
            coords.resize(options.coords_per_param);
        }
        auto values = p.mutable_values();
        for (std::size_t j : coords) {
            const double saved = values[j];
            values[j] = saved + options.eps;
            const double up = loss().item();
            values[j] = saved - options.eps;
            const double down = loss().item();
            values[j] = saved;
            const double numeric = (up - down) / (2.0 * options.eps);
            const double a = analytic[pi][j];
            const double denom = std::max({std::fabs(a), std::fabs(numeric), floor});
            const double rel = std::fabs(a - numeric) / denom;
            ++report.coords_checked;
            if (rel > report.max_rel_error || report.worst.empty()) {
                report.max_rel_error = std::max(report.max_rel_error, rel);
                if (rel >= report.max_rel_error) {
                    std::ostringstream os;
                    os << "param[" << pi << "] coord " << j << ": analytic " << a << ", numeric " << numeric;
                    report.worst = os.str();
                }
            }
        }
    }
    report.passed = report.max_rel_error < options.tol;
    return report;
}

}  // namespace situ::num
