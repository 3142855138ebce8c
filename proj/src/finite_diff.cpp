#include "fame/finite_diff.hpp"

#include <algorithm>
#include <cmath>

#include "fame/error.hpp"

namespace fame {

FdReport finite_diff_check(const std::function<double()>& f, const std::vector<Tensor>& params,
                           const FdOptions& opts) {
    if (opts.eps <= 0.0) throw ContractError("finite_diff_check: eps must be positive");
    FdReport report;
    Rng rng(opts.sample_seed);
    for (const Tensor& p_const : params) {
        Tensor p = p_const;
        const std::int64_t n = p.numel();
        std::vector<std::int64_t> coords;
        if (n <= opts.max_coords_per_tensor) {
            coords.resize(static_cast<std::size_t>(n));
            for (std::int64_t i = 0; i < n; ++i) coords[static_cast<std::size_t>(i)] = i;
        } else {
            // deterministic subsample without replacement
            std::vector<std::int64_t> all(static_cast<std::size_t>(n));
            for (std::int64_t i = 0; i < n; ++i) all[static_cast<std::size_t>(i)] = i;
            rng.shuffle(all);
            coords.assign(all.begin(), all.begin() + opts.max_coords_per_tensor);
        }
        for (const std::int64_t i : coords) {
            const double saved = p.value_at(i);
            p.set_value(i, saved + opts.eps);
            const double f_plus = f();
            p.set_value(i, saved - opts.eps);
            const double f_minus = f();
            p.set_value(i, saved);
            if (!std::isfinite(f_plus) || !std::isfinite(f_minus)) {
                throw NumericError("finite_diff_check: objective returned non-finite value");
            }
            const double numeric = (f_plus - f_minus) / (2.0 * opts.eps);
            const double analytic = p.grad_at(i);
            const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-8});
            report.max_rel_err = std::max(report.max_rel_err, std::abs(analytic - numeric) / denom);
            ++report.coords_checked;
        }
    }
    return report;
}

}  // namespace fame
