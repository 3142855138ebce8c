#pragma once

#include <functional>
#include <vector>

#include "fame/rng.hpp"
#include "fame/tensor.hpp"

namespace fame {

struct FdOptions {
    double eps = 1e-5;
    std::int64_t max_coords_per_tensor = 64;  // central differences per coordinate;
                                              // larger tensors are subsampled
    std::uint64_t sample_seed = 17;
};

struct FdReport {
    double max_rel_err = 0.0;
    std::int64_t coords_checked = 0;
};

// Central-difference check of analytic gradients already stored in the
// parameters' grad slots. `f` re-evaluates the scalar objective from the
// current parameter values and must be deterministic. Relative error uses
// max(|analytic|, |numeric|, 1e-8) as denominator. Throws NumericError if f
// ever returns a non-finite value.
FdReport finite_diff_check(const std::function<double()>& f, const std::vector<Tensor>& params,
                           const FdOptions& opts = {});

}  // namespace fame
