#include "fame/layers.hpp"

#include <cmath>

namespace fame {

Tensor uniform_init(Shape shape, std::int64_t fan_in, Rng& rng, Dtype dt) {
    Tensor t = Tensor::zeros(std::move(shape), dt);
    const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
    for (std::int64_t i = 0; i < t.numel(); ++i) t.set_value(i, rng.uniform(-bound, bound));
    t.set_requires_grad(true);
    return t;
}

BatchNorm make_batchnorm(int channels, Dtype dt) {
    BatchNorm bn;
    bn.gamma = Tensor::full(Shape{channels}, 1.0, dt).set_requires_grad(true);
    bn.beta = Tensor::zeros(Shape{channels}, dt).set_requires_grad(true);
    bn.running_mean = Tensor::zeros(Shape{channels}, dt);
    bn.running_var = Tensor::full(Shape{channels}, 1.0, dt);
    return bn;
}

ConvBlock make_conv_block(int cin, int cout, Rng& rng, Dtype dt) {
    ConvBlock b;
    b.weight = uniform_init(Shape{cout, cin, 3, 3}, static_cast<std::int64_t>(cin) * 9, rng, dt);
    b.bias = Tensor::zeros(Shape{cout}, dt).set_requires_grad(true);
    b.bn = make_batchnorm(cout, dt);
    return b;
}

LstmParams make_lstm_params(int din, int h_cell, Rng& rng, Dtype dt) {
    LstmParams p;
    p.w_x = uniform_init(Shape{4 * h_cell, din}, din, rng, dt);
    p.w_h = uniform_init(Shape{4 * h_cell, h_cell}, h_cell, rng, dt);
    p.bias = Tensor::zeros(Shape{4 * h_cell}, dt);
    // forget-gate bias starts at 1 so early training does not flush the cell
    for (int i = h_cell; i < 2 * h_cell; ++i) p.bias.set_value(i, 1.0);
    p.bias.set_requires_grad(true);
    return p;
}

LinearParams make_linear(int din, int dout, Rng& rng, Dtype dt) {
    LinearParams p;
    p.weight = uniform_init(Shape{dout, din}, din, rng, dt);
    p.bias = Tensor::zeros(Shape{dout}, dt).set_requires_grad(true);
    return p;
}

Tensor batchnorm_forward(Tape* tape, const Tensor& x, BatchNorm& bn, bool training) {
    return batchnorm2d(tape, x, bn.gamma, bn.beta, bn.running_mean, bn.running_var, bn.eps,
                       bn.momentum, training);
}

Tensor conv_block_forward(Tape* tape, const Tensor& x, ConvBlock& block, bool training) {
    Tensor y = conv2d(tape, x, block.weight, block.bias, /*stride=*/1, /*pad=*/1);
    y = batchnorm_forward(tape, y, block.bn, training);
    return relu(tape, y);
}

LstmState lstm_step(Tape* tape, const Tensor& x_t, const LstmState& state, const LstmParams& p) {
    const std::int64_t h_cell = p.w_h.dim(1);
    Tensor pre = add(tape, linear(tape, x_t, p.w_x, p.bias), linear(tape, state.h, p.w_h, Tensor{}));
    Tensor i_gate = sigmoid(tape, slice1d(tape, pre, 0, h_cell));
    Tensor f_gate = sigmoid(tape, slice1d(tape, pre, h_cell, 2 * h_cell));
    Tensor g_gate = tanh_act(tape, slice1d(tape, pre, 2 * h_cell, 3 * h_cell));
    Tensor o_gate = sigmoid(tape, slice1d(tape, pre, 3 * h_cell, 4 * h_cell));
    LstmState next;
    next.c = add(tape, mul(tape, f_gate, state.c), mul(tape, i_gate, g_gate));
    next.h = mul(tape, o_gate, tanh_act(tape, next.c));
    return next;
}

Tensor bilstm_forward(Tape* tape, const Tensor& seq, const LstmPair& p) {
    if (seq.rank() != 2) throw DimensionError("bilstm_forward: expects [T, Din]");
    const std::int64_t t_len = seq.dim(0);
    const std::int64_t h_cell = p.fwd.w_h.dim(1);
    const Dtype dt = seq.dtype();

    std::vector<Tensor> h_fwd(static_cast<std::size_t>(t_len));
    LstmState s{Tensor::zeros(Shape{h_cell}, dt), Tensor::zeros(Shape{h_cell}, dt)};
    for (std::int64_t t = 0; t < t_len; ++t) {
        s = lstm_step(tape, select_row(tape, seq, t), s, p.fwd);
        h_fwd[static_cast<std::size_t>(t)] = s.h;
    }
    std::vector<Tensor> h_bwd(static_cast<std::size_t>(t_len));
    s = LstmState{Tensor::zeros(Shape{h_cell}, dt), Tensor::zeros(Shape{h_cell}, dt)};
    for (std::int64_t t = t_len - 1; t >= 0; --t) {
        s = lstm_step(tape, select_row(tape, seq, t), s, p.bwd);
        h_bwd[static_cast<std::size_t>(t)] = s.h;
    }
    std::vector<Tensor> rows(static_cast<std::size_t>(t_len));
    for (std::int64_t t = 0; t < t_len; ++t) {
        rows[static_cast<std::size_t>(t)] =
            concat(tape, h_fwd[static_cast<std::size_t>(t)], h_bwd[static_cast<std::size_t>(t)], 0);
    }
    return stack_rows(tape, rows);
}

Tensor linear_forward(Tape* tape, const Tensor& x, const LinearParams& p) {
    return linear(tape, x, p.weight, p.bias);
}

}  // namespace fame
