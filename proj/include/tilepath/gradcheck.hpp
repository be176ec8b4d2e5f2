#pragma once
#include <cmath>
#include <functional>
#include <vector>

#include "tilepath/errors.hpp"
#include "tilepath/rng.hpp"
#include "tilepath/tensor.hpp"

namespace tilepath {

// Central-difference gradient verification. Compares an analytic gradient
// against (f(x+eps*e_i) - f(x-eps*e_i)) / (2*eps) coordinate by coordinate
// and returns the max relative error |a-n| / max(1e-8, |a|+|n|).
//
// max_coords == 0 checks every coordinate; otherwise a seeded random subset
// of that size is checked (needed for layers with millions of parameters).
inline double grad_check(const std::function<double(const Tensor&)>& f,
                         const Tensor& x, const Tensor& analytic_grad,
                         double epsilon = 1e-5, std::size_t max_coords = 0,
                         std::uint64_t subset_seed = 0) {
    if (epsilon <= 0.0) throw ConfigError("grad_check: epsilon must be positive");
    if (x.shape() != analytic_grad.shape()) {
        throw DimensionError("grad_check: gradient shape " +
                             Tensor::shape_str(analytic_grad.shape()) +
                             " does not match input " + Tensor::shape_str(x.shape()));
    }

    std::vector<std::size_t> coords;
    if (max_coords == 0 || max_coords >= x.numel()) {
        coords.resize(x.numel());
        for (std::size_t i = 0; i < coords.size(); ++i) coords[i] = i;
    } else {
        Rng rng(subset_seed);
        // sample without replacement by Fisher-Yates over an index pool
        std::vector<std::size_t> pool(x.numel());
        for (std::size_t i = 0; i < pool.size(); ++i) pool[i] = i;
        for (std::size_t i = 0; i < max_coords; ++i) {
            std::size_t j = i + static_cast<std::size_t>(rng.uniform_int(pool.size() - i));
            std::swap(pool[i], pool[j]);
        }
        coords.assign(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(max_coords));
    }

    Tensor probe = x;
    double max_rel = 0.0;
    for (std::size_t i : coords) {
        const double orig = x[i];
        probe[i] = orig + epsilon;
        const double fp = f(probe);
        probe[i] = orig - epsilon;
        const double fm = f(probe);
        probe[i] = orig;
        if (!std::isfinite(fp) || !std::isfinite(fm)) {
            throw ValidationError("grad_check: non-finite function value at coordinate " +
                                  std::to_string(i));
        }
        const double numeric = (fp - fm) / (2.0 * epsilon);
        const double analytic = analytic_grad[i];
        const double rel = std::fabs(analytic - numeric) /
                           std::max(1e-8, std::fabs(analytic) + std::fabs(numeric));
        max_rel = std::max(max_rel, rel);
    }
    return max_rel;
}

}  // namespace tilepath
