#pragma once

#include <functional>
#include <vector>

#include "mvir/param_store.h"
#include "mvir/tape.h"

namespace mvir {

// Compares reverse-mode gradients of a scalar-valued graph against central
// finite differences, parameter by parameter. Report-only: never throws on
// mismatch. The builder must construct the same computation each call so the
// difference quotient probes the function the tape differentiates.
struct GradCheckReport {
    double max_rel_err = 0.0;
    size_t worst_param = 0;
    double worst_ad = 0.0, worst_fd = 0.0;
    size_t checked = 0;

    bool pass(double tol) const { return max_rel_err < tol; }
};

// Relative error floored at `scale` so near-zero gradients compare absolutely.
inline double rel_err(double a, double b, double scale = 1e-3) {
    return std::abs(a - b) / std::max({std::abs(a), std::abs(b), scale});
}

// `indices` limits the check to a subset of store parameters (empty = all).
GradCheckReport grad_check(const std::function<V(Tape&)>& build, ParamStore& store,
                           double h = 1e-5, const std::vector<size_t>& indices = {});

} // namespace mvir
