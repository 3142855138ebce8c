#pragma once

#include "fame/finite_diff.hpp"
#include "fame/model.hpp"

namespace fame {

// The desk-scale verification config: 16x16 input, stages 8,8/16,16,
// H_cell=4, T=3, K=2.
FameConfig gradcheck_toy_config(TemporalMode mode);

// Full-model finite-difference suite over every parameter tensor of the toy
// config, hybrid loss objective, central differences at eps 1e-5. The probe
// point (build seed, input seed) is fixed per mode; forward runs in eval
// mode because batch-statistic normalization makes conv biases algebraically
// dead, which reduces their probe to roundoff noise against the 1e-8
// denominator floor. Batch-mode BN backward is verified separately.
FdReport gradcheck_full_model(TemporalMode mode);

}  // namespace fame
