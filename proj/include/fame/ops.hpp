#pragma once

#include <vector>

#include "fame/rng.hpp"
#include "fame/tape.hpp"
#include "fame/tensor.hpp"

namespace fame {

// Forward primitives with reverse-mode rules. Every op takes the tape as its
// first argument; pass nullptr for plain inference (nothing is recorded and
// no gradient buffers are touched). Outputs carry requires_grad whenever any
// input does, so interior activations route gradient flow automatically.

enum class Act { relu, tanh, sigmoid };
enum class PoolKind { max, avg };

// ---- elementwise ----
Tensor add(Tape* tape, Tensor a, Tensor b);
Tensor sub(Tape* tape, Tensor a, Tensor b);
Tensor mul(Tape* tape, Tensor a, Tensor b);
Tensor div(Tape* tape, Tensor a, Tensor b);
Tensor add_scalar(Tape* tape, Tensor a, double c);
Tensor mul_scalar(Tape* tape, Tensor a, double c);
Tensor maximum_scalar(Tape* tape, Tensor a, double c);
Tensor activation(Tape* tape, Tensor x, Act kind);
inline Tensor relu(Tape* t, Tensor x) { return activation(t, x, Act::relu); }
inline Tensor tanh_act(Tape* t, Tensor x) { return activation(t, x, Act::tanh); }
inline Tensor sigmoid(Tape* t, Tensor x) { return activation(t, x, Act::sigmoid); }

// ---- shape ----
Tensor reshape(Tape* tape, Tensor x, Shape new_shape);
Tensor concat(Tape* tape, Tensor a, Tensor b, int axis);
Tensor stack_rows(Tape* tape, const std::vector<Tensor>& rows);  // adds leading axis
Tensor select_row(Tape* tape, Tensor x, std::int64_t index);  // drops leading axis
Tensor slice_rows(Tape* tape, Tensor x, std::int64_t begin, std::int64_t end);  // keeps rank
Tensor slice1d(Tape* tape, Tensor x, std::int64_t begin, std::int64_t end);

// ---- reductions (sequential row-major accumulation for reproducibility) ----
Tensor sum_all(Tape* tape, Tensor x);
Tensor mean_all(Tape* tape, Tensor x);
Tensor sum_axis0(Tape* tape, Tensor x);
Tensor mean_axis0(Tape* tape, Tensor x);

// ---- linear algebra ----
Tensor matmul(Tape* tape, Tensor a, Tensor b);
// y = x W^T + b for x of shape [Din] or [N, Din]; b may be undefined.
Tensor linear(Tape* tape, Tensor x, Tensor w, Tensor b);

// ---- neural-net ops ----
Tensor conv2d(Tape* tape, Tensor x, Tensor w, Tensor bias,
              int stride, int pad);
Tensor pool2d(Tape* tape, Tensor x, PoolKind kind, int k, int stride);
Tensor global_avg_pool(Tape* tape, Tensor x);
Tensor softmax(Tape* tape, Tensor x, int axis);
Tensor layer_norm(Tape* tape, Tensor x, Tensor gamma, Tensor beta,
                  double eps);
// Batch statistics over N*H*W per channel in training mode (running stats
// updated in place with the given momentum); running statistics in eval mode.
Tensor batchnorm2d(Tape* tape, Tensor x, Tensor gamma, Tensor beta,
                   Tensor running_mean, Tensor running_var, double eps, double momentum,
                   bool training);
Tensor dropout(Tape* tape, Tensor x, double rate, Rng& rng);

// Weighted cross-entropy with max-subtracted log-softmax. `logits` is [K];
// the rows variant takes [T, K] and returns the mean over rows.
Tensor cross_entropy(Tape* tape, Tensor logits, int label, double weight);
Tensor cross_entropy_rows(Tape* tape, Tensor logits, int label, double weight);

// ---- channel pooling / masking for spatial attention ----
Tensor channel_mean(Tape* tape, Tensor x);  // [N,C,H,W] -> [N,H,W]
Tensor channel_max(Tape* tape, Tensor x);   // [N,C,H,W] -> [N,H,W]
Tensor mul_mask(Tape* tape, Tensor x, Tensor m);  // x[N,C,H,W] * m[N,1,H,W]

}  // namespace fame
