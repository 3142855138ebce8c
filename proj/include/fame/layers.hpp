#pragma once

#include "fame/ops.hpp"
#include "fame/rng.hpp"

namespace fame {

// Parameter bundles with deterministic initialization: conv/linear weights
// uniform in (-b, b) with b = sqrt(6 / fan_in), biases zero, BN affine at
// identity, LSTM forget-gate bias 1.

struct BatchNorm {
    Tensor gamma, beta;
    Tensor running_mean, running_var;  // buffers, never trained
    double eps = 1e-5;
    double momentum = 0.1;
};

struct ConvBlock {
    Tensor weight;  // [Cout, Cin, 3, 3]
    Tensor bias;    // [Cout]
    BatchNorm bn;
};

// Gate order inside the stacked 4H axis: input, forget, cell, output.
struct LstmParams {
    Tensor w_x;   // [4H, Din]
    Tensor w_h;   // [4H, H]
    Tensor bias;  // [4H]
};

struct LstmPair {
    LstmParams fwd, bwd;
};

struct LinearParams {
    Tensor weight;  // [Dout, Din]
    Tensor bias;    // [Dout]
};

struct LstmState {
    Tensor h, c;
};

Tensor uniform_init(Shape shape, std::int64_t fan_in, Rng& rng, Dtype dt);

BatchNorm make_batchnorm(int channels, Dtype dt);
ConvBlock make_conv_block(int cin, int cout, Rng& rng, Dtype dt);
LstmParams make_lstm_params(int din, int h_cell, Rng& rng, Dtype dt);
LinearParams make_linear(int din, int dout, Rng& rng, Dtype dt);

Tensor batchnorm_forward(Tape* tape, const Tensor& x, BatchNorm& bn, bool training);
// conv (stride 1, pad 1) -> BN -> ReLU
Tensor conv_block_forward(Tape* tape, const Tensor& x, ConvBlock& block, bool training);

LstmState lstm_step(Tape* tape, const Tensor& x_t, const LstmState& state, const LstmParams& p);
// Forward and reverse passes concatenated per timestep: [T, 2H]. Initial
// states are zero.
Tensor bilstm_forward(Tape* tape, const Tensor& seq, const LstmPair& p);
Tensor linear_forward(Tape* tape, const Tensor& x, const LinearParams& p);

}  // namespace fame
