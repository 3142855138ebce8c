#include "fame/tape.hpp"

namespace fame {

void backward(const Tensor& loss, Tape& tape) {
    if (!loss.defined() || loss.numel() != 1) {
        throw ContractError("backward requires a scalar loss");
    }
    Tensor l = loss;
    l.ensure_grad();
    if (l.dtype() == Dtype::f64) {
        l.grad<double>()[0] += 1.0;
    } else {
        l.grad<float>()[0] += 1.0f;
    }
    for (auto it = tape.ops_.rbegin(); it != tape.ops_.rend(); ++it) {
        (*it)();
    }
}

}  // namespace fame
