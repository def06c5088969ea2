#include "intrakd/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "intrakd/errors.hpp"
#include "intrakd/rng.hpp"

namespace intrakd {

namespace {

std::vector<std::size_t> pick_coords(std::size_t n, const FdOptions& options) {
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    if (options.max_coords == 0 || options.max_coords >= n) return idx;
    Rng rng(mix_seed(options.seed, 1));
    for (std::size_t i = 0; i < options.max_coords; ++i) {
        const auto j = static_cast<std::size_t>(rng.integer(static_cast<std::int64_t>(i), static_cast<std::int64_t>(n - 1)));
        std::swap(idx[i], idx[j]);
    }
    idx.resize(options.max_coords);
    return idx;
}

}  // namespace

FdReport fd_check_scalar(const ScalarFn& f, const Tensor& analytic_grad, const Tensor& x, const FdOptions& options) {
    if (!analytic_grad.same_shape(x)) throw ShapeError("fd_check: gradient shape does not match input");
    FdReport report;
    report.tolerance = options.tolerance;
    Tensor probe(x);
    for (std::size_t i : pick_coords(x.size(), options)) {
        const double orig = probe[i];
        probe[i] = orig + options.step;
        const double up = f(probe);
        probe[i] = orig - options.step;
        const double down = f(probe);
        probe[i] = orig;
        const double numeric = (up - down) / (2.0 * options.step);
        const double analytic = analytic_grad[i];
        const double abs_err = std::abs(numeric - analytic);
        const double denom = std::max({std::abs(numeric), std::abs(analytic), options.abs_floor});
        report.max_abs_error = std::max(report.max_abs_error, abs_err);
        report.max_rel_error = std::max(report.max_rel_error, abs_err / denom);
        ++report.coords_checked;
    }
    return report;
}

FdReport fd_check(const ForwardFn& f, const VjpFn& vjp, const Tensor& x, const FdOptions& options) {
    const Tensor y = f(x);
    Tensor functional(y.dims());
    Rng rng(mix_seed(options.seed, 0));
    for (auto& v : functional.data()) v = rng.uniform(-1.0, 1.0);
    const Tensor analytic = vjp(x, functional);
    return fd_check_scalar([&](const Tensor& p) { return dot(functional, f(p)); }, analytic, x, options);
}

}  // namespace intrakd
