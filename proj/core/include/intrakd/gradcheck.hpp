#pragma once

#include <cstdint>
#include <functional>

#include "intrakd/tensor.hpp"

namespace intrakd {

struct FdOptions {
    double step = 1e-5;
    double tolerance = 1e-4;
    /// Lower bound on the relative-error denominator, so coordinates whose
    /// true gradient is ~0 are judged by absolute error instead.
    double abs_floor = 1e-6;
    std::uint64_t seed = 0;
    /// 0 checks every input coordinate; otherwise a seeded random subset.
    std::size_t max_coords = 0;
};

struct FdReport {
    double max_rel_error = 0.0;
    double max_abs_error = 0.0;
    std::size_t coords_checked = 0;
    double tolerance = 0.0;

    bool passed() const { return max_rel_error < tolerance; }
};

/// Differentiable map x -> y.
using ForwardFn = std::function<Tensor(const Tensor&)>;
/// Vector-Jacobian product: (x, dL/dy) -> dL/dx.
using VjpFn = std::function<Tensor(const Tensor&, const Tensor&)>;
using ScalarFn = std::function<double(const Tensor&)>;

/// Checks `vjp` against central differences of the scalar <r, f(x)>, where r
/// is a seeded random linear functional over the output.
FdReport fd_check(const ForwardFn& f, const VjpFn& vjp, const Tensor& x, const FdOptions& options = {});

/// Same check for an already-scalar function with a precomputed gradient.
FdReport fd_check_scalar(const ScalarFn& f, const Tensor& analytic_grad, const Tensor& x,
                         const FdOptions& options = {});

}  // namespace intrakd
