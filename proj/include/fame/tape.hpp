#pragma once

#include <functional>
#include <vector>

#include "fame/tensor.hpp"

namespace fame {

// Reverse-mode tape. Ops append their backward closures during the forward
// pass; recording order is the topological order, and backward() replays the
// closures exactly once, last to first. A tape belongs to one logical
// execution stream.
class Tape {
public:
    void record(std::function<void()> backward_fn) { ops_.push_back(std::move(backward_fn)); }
    std::size_t size() const { return ops_.size(); }
    void clear() { ops_.clear(); }

private:
    std::vector<std::function<void()>> ops_;
    friend void backward(const Tensor& loss, Tape& tape);
};

// Seeds d(loss)/d(loss) = 1 and replays the tape. Populates the grad slot of
// every tensor the loss depends on; parameters not reachable from the loss
// simply keep a zero gradient. Repeated calls with freshly zeroed grads give
// identical results.
void backward(const Tensor& loss, Tape& tape);

}  // namespace fame
