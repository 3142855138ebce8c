#include "fame/ops.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>

#include "fame/parallel.hpp"

namespace fame {

namespace {

void check_same_shape(Tensor a, Tensor b, const char* op) {
    if (a.shape() != b.shape()) {
        throw DimensionError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) +
                             " vs " + shape_str(b.shape()));
    }
    if (a.dtype() != b.dtype()) {
        throw DimensionError(std::string(op) + ": dtype mismatch");
    }
}

bool track(Tape* tape, Tensor out) { return tape != nullptr && out.requires_grad(); }

template <class T>
void axpy(std::span<const T> src, std::span<T> dst) {
    for (std::size_t i = 0; i < src.size(); ++i) dst[i] += src[i];
}

template <class T>
T stable_sigmoid(T x) {
    if (x >= T(0)) {
        return T(1) / (T(1) + std::exp(-x));
    }
    const T e = std::exp(x);
    return e / (T(1) + e);
}

}  // namespace

// ---------------------------------------------------------------- elementwise

template <class T, class FwdFn, class BwdFn>
static Tensor binary_op(Tape* tape, Tensor a, Tensor b, FwdFn fwd, BwdFn bwd) {
    Tensor out = Tensor::zeros(a.shape(), a.dtype());
    auto pa = a.data<T>();
    auto pb = b.data<T>();
    auto po = out.data<T>();
    for (std::size_t i = 0; i < po.size(); ++i) po[i] = fwd(pa[i], pb[i]);
    out.set_requires_grad(a.requires_grad() || b.requires_grad());
    if (track(tape, out)) {
        tape->record([a, b, out, bwd]() mutable {
            auto go = out.grad<T>();
            auto pa = a.data<T>();
            auto pb = b.data<T>();
            for (std::size_t i = 0; i < go.size(); ++i) {
                T da, db;
                bwd(pa[i], pb[i], go[i], da, db);
                if (a.requires_grad()) a.grad<T>()[i] += da;
                if (b.requires_grad()) b.grad<T>()[i] += db;
            }
        });
    }
    return out;
}

#define FAME_DISPATCH_BINARY(name, fwd_expr, bwd_body)                                        \
    Tensor name(Tape* tape, Tensor a, Tensor b) {                               \
        check_same_shape(a, b, #name);                                                        \
        return with_dtype(a.dtype(), [&](auto tag) {                                          \
            using T = decltype(tag);                                                          \
            return binary_op<T>(                                                              \
                tape, a, b, [](T x, T y) { return fwd_expr; },                                \
                [](T x, T y, T g, T& da, T& db) { (void)x; (void)y; bwd_body });              \
        });                                                                                   \
    }

FAME_DISPATCH_BINARY(add, x + y, { da = g; db = g; })
FAME_DISPATCH_BINARY(sub, x - y, { da = g; db = -g; })
FAME_DISPATCH_BINARY(mul, x * y, { da = g * y; db = g * x; })
FAME_DISPATCH_BINARY(div, x / y, { da = g / y; db = -g * x / (y * y); })
#undef FAME_DISPATCH_BINARY

Tensor add_scalar(Tape* tape, Tensor a, double c) {
    return with_dtype(a.dtype(), [&](auto tag) {
        using T = decltype(tag);
        Tensor out = Tensor::zeros(a.shape(), a.dtype());
        auto pa = a.data<T>();
        auto po = out.data<T>();
        for (std::size_t i = 0; i < po.size(); ++i) po[i] = pa[i] + static_cast<T>(c);
        out.set_requires_grad(a.requires_grad());
        if (track(tape, out)) {
            tape->record([a, out]() mutable { axpy<T>(out.grad<T>(), a.grad<T>()); });
        }
        return out;
    });
}

Tensor mul_scalar(Tape* tape, Tensor a, double c) {
    return with_dtype(a.dtype(), [&](auto tag) {
        using T = decltype(tag);
        Tensor out = Tensor::zeros(a.shape(), a.dtype());
        auto pa = a.data<T>();
        auto po = out.data<T>();
        const T cc = static_cast<T>(c);
        for (std::size_t i = 0; i < po.size(); ++i) po[i] = pa[i] * cc;
        out.set_requires_grad(a.requires_grad());
        if (track(tape, out)) {
            tape->record([a, out, cc]() mutable {
                auto go = out.grad<T>();
                auto ga = a.grad<T>();
                for (std::size_t i = 0; i < go.size(); ++i) ga[i] += go[i] * cc;
            });
        }
        return out;
    });
}

Tensor maximum_scalar(Tape* tape, Tensor a, double c) {
    return with_dtype(a.dtype(), [&](auto tag) {
        using T = decltype(tag);
        Tensor out = Tensor::zeros(a.shape(), a.dtype());
        auto pa = a.data<T>();
        auto po = out.data<T>();
        const T cc = static_cast<T>(c);
        for (std::size_t i = 0; i < po.size(); ++i) po[i] = pa[i] > cc ? pa[i] : cc;
        out.set_requires_grad(a.requires_grad());
        if (track(tape, out)) {
            tape->record([a, out, cc]() mutable {
                auto go = out.grad<T>();
                auto ga = a.grad<T>();
                auto pa = a.data<T>();
                for (std::size_t i = 0; i < go.size(); ++i) {
                    if (pa[i] > cc) ga[i] += go[i];
                }
            });
        }
        return out;
    });
}

Tensor activation(Tape* tape, Tensor x, Act kind) {
    return with_dtype(x.dtype(), [&](auto tag) {
        using T = decltype(tag);
        Tensor out = Tensor::zeros(x.shape(), x.dtype());
        auto px = x.data<T>();
        auto po = out.data<T>();
        switch (kind) {
            case Act::relu:
                for (std::size_t i = 0; i < po.size(); ++i) po[i] = px[i] > T(0) ? px[i] : T(0);
                break;
            case Act::tanh:
                for (std::size_t i = 0; i < po.size(); ++i) po[i] = std::tanh(px[i]);
                break;
            case Act::sigmoid:
                for (std::size_t i = 0; i < po.size(); ++i) po[i] = stable_sigmoid(px[i]);
                break;
        }
        out.set_requires_grad(x.requires_grad());
        if (track(tape, out)) {
            tape->record([x, out, kind]() mutable {
                auto go = out.grad<T>();
                auto gx = x.grad<T>();
                auto px = x.data<T>();
                auto po = out.data<T>();
                switch (kind) {
                    case Act::relu:
                        // subgradient 0 at x == 0
                        for (std::size_t i = 0; i < go.size(); ++i) {
                            if (px[i] > T(0)) gx[i] += go[i];
                        }
                        break;
                    case Act::tanh:
                        for (std::size_t i = 0; i < go.size(); ++i) {
                            gx[i] += go[i] * (T(1) - po[i] * po[i]);
                        }
                        break;
                    case Act::sigmoid:
                        for (std::size_t i = 0; i < go.size(); ++i) {
                            gx[i] += go[i] * po[i] * (T(1) - po[i]);
                        }
                        break;
                }
            });
        }
        return out;
    });
}

// --------------------------------------------------------------------- shape

Tensor reshape(Tape* tape, Tensor x, Shape new_shape) {
    if (shape_numel(new_shape) != x.numel()) {
        throw DimensionError("reshape: element count mismatch");
    }
    return with_dtype(x.dtype(), [&](auto tag) {
        using T = decltype(tag);
        Tensor out = Tensor::zeros(new_shape, x.dtype());
        auto px = x.data<T>();
        auto po = out.data<T>();
        std::copy(px.begin(), px.end(), po.begin());
        out.set_requires_grad(x.requires_grad());
        if (track(tape, out)) {
            tape->record([x, out]() mutable { axpy<T>(out.grad<T>(), x.grad<T>()); });
        }
        return out;
    });
}

Tensor concat(Tape* tape, Tensor a, Tensor b, int axis) {
    if (a.rank() != b.rank()) throw DimensionError("concat: rank mismatch");
    if (axis < 0) axis += a.rank();
    if (axis < 0 || axis >= a.rank()) throw DimensionError("concat: bad axis");
    for (int i = 0; i < a.rank(); ++i) {
        if (i != axis && a.shape()[i] != b.shape()[i]) {
            throw DimensionError("concat: incompatible shapes");
        }
    }
    Shape out_shape = a.shape();
    out_shape[axis] += b.shape()[axis];
    std::int64_t outer = 1, inner = 1;
    for (int i = 0; i < axis; ++i) outer *= a.shape()[i];
    for (int i = axis + 1; i < a.rank(); ++i) inner *= a.shape()[i];
    const std::int64_t la = a.shape()[axis] * inner;
    const std::int64_t lb = b.shape()[axis] * inner;
    return with_dtype(a.dtype(), [&](auto tag) {
        using T = decltype(tag);
        Tensor out = Tensor::zeros(out_shape, a.dtype());
        auto pa = a.data<T>();
        auto pb = b.data<T>();
        auto po = out.data<T>();
        for (std::int64_t o = 0; o < outer; ++o) {
            std::copy_n(pa.data() + o * la, la, po.data() + o * (la + lb));
            std::copy_n(pb.data() + o * lb, lb, po.data() + o * (la + lb) + la);
        }
        out.set_requires_grad(a.requires_grad() || b.requires_grad());
        if (track(tape, out)) {
            tape->record([a, b, out, outer, la, lb]() mutable {
                auto go = out.grad<T>();
                for (std::int64_t o = 0; o < outer; ++o) {
                    if (a.requires_grad()) {
                        auto ga = a.grad<T>();
                        for (std::int64_t i = 0; i < la; ++i) {
                            ga[o * la + i] += go[o * (la + lb) + i];
                        }
                    }
                    if (b.requires_grad()) {
                        auto gb = b.grad<T>();
                        for (std::int64_t i = 0; i < lb; ++i) {
                            gb[o * lb + i] += go[o * (la + lb) + la + i];
                        }
                    }
                }
            });
        }
        return out;
    });
}

Tensor stack_rows(Tape* tape, const std::vector<Tensor>& rows) {
    if (rows.empty()) throw ContractError("stack_rows: empty input");
    const Shape row_shape = rows[0].shape();
    const Dtype dt = rows[0].dtype();
    bool rg = false;
    for (const auto& r : rows) {
        if (r.shape() != row_shape || r.dtype() != dt) {
            throw DimensionError("stack_rows: inconsistent rows");
        }
        rg = rg || r.requires_grad();
    }
    Shape out_shape;
    out_shape.push_back(static_cast<std::int64_t>(rows.size()));
    out_shape.insert(out_shape.end(), row_shape.begin(), row_shape.end());
    return with_dtype(dt, [&](auto tag) {
        using T = decltype(tag);
        Tensor out = Tensor::zeros(out_shape, dt);
        auto po = out.data<T>();
        const std::int64_t len = shape_numel(row_shape);
        for (std::size_t t = 0; t < rows.size(); ++t) {
            auto pr = rows[t].data<T>();
            std::copy(pr.begin(), pr.end(), po.begin() + static_cast<std::int64_t>(t) * len);
        }
        out.set_requires_grad(rg);
        if (track(tape, out)) {
            auto captured = rows;
            tape->record([captured, out, len]() mutable {
                auto go = out.grad<T>();
                for (std::size_t t = 0; t < captured.size(); ++t) {
                    if (!captured[t].requires_grad()) continue;
                    auto gr = captured[t].grad<T>();
                    for (std::int64_t i = 0; i < len; ++i) {
                        gr[i] += go[static_cast<std::int64_t>(t) * len + i];
                    }
                }
            });
        }
        return out;
    });
}

Tensor select_row(Tape* tape, Tensor x, std::int64_t index) {
    if (x.rank() < 1 || index < 0 || index >= x.shape()[0]) {
        throw DimensionError("select_row: index out of range");
    }
    Shape out_shape(x.shape().begin() + 1, x.shape().end());
    if (out_shape.empty()) out_shape.push_back(1);
    const std::int64_t len = shape_numel(out_shape);
    return with_dtype(x.dtype(), [&](auto tag) {
        using T = decltype(tag);
        Tensor out = Tensor::zeros(out_shape, x.dtype());
        auto px = x.data<T>();
        auto po = out.data<T>();
        std::copy_n(px.data() + index * len, len, po.data());
        out.set_requires_grad(x.requires_grad());
        if (track(tape, out)) {
            tape->record([x, out, index, len]() mutable {
                auto go = out.grad<T>();
                auto gx = x.grad<T>();
                for (std::int64_t i = 0; i < len; ++i) gx[index * len + i] += go[i];
            });
        }
        return out;
    });
}

Tensor slice_rows(Tape* tape, Tensor x, std::int64_t begin, std::int64_t end) {
    if (x.rank() < 1 || begin < 0 || end > x.shape()[0] || begin >= end) {
        throw DimensionError("slice_rows: bad range");
    }
    Shape out_shape = x.shape();
    out_shape[0] = end - begin;
    std::int64_t len = 1;
    for (int i = 1; i < x.rank(); ++i) len *= x.shape()[i];
    return with_dtype(x.dtype(), [&](auto tag) {
        using T = decltype(tag);
        Tensor out = Tensor::zeros(out_shape, x.dtype());
        auto px = x.data<T>();
        auto po = out.data<T>();
        std::copy_n(px.data() + begin * len, (end - begin) * len, po.data());
        out.set_requires_grad(x.requires_grad());
        if (track(tape, out)) {
            tape->record([x, out, begin, len]() mutable {
                auto go = out.grad<T>();
                auto gx = x.grad<T>();
                for (std::size_t i = 0; i < go.size(); ++i) {
                    gx[static_cast<std::size_t>(begin * len) + i] += go[i];
                }
            });
        }
        return out;
    });
}

Tensor slice1d(Tape* tape, Tensor x, std::int64_t begin, std::int64_t end) {
    if (x.rank() != 1) throw DimensionError("slice1d: expects rank 1");
    if (begin < 0 || end > x.shape()[0] || begin >= end) throw DimensionError("slice1d: bad range");
    return with_dtype(x.dtype(), [&](auto tag) {
        using T = decltype(tag);
        Tensor out = Tensor::zeros(Shape{end - begin}, x.dtype());
        auto px = x.data<T>();
        auto po = out.data<T>();
        std::copy_n(px.data() + begin, end - begin, po.data());
        out.set_requires_grad(x.requires_grad());
        if (track(tape, out)) {
            tape->record([x, out, begin]() mutable {
                auto go = out.grad<T>();
                auto gx = x.grad<T>();
                for (std::size_t i = 0; i < go.size(); ++i) gx[static_cast<std::size_t>(begin) + i] += go[i];
            });
        }
        return out;
    });
}

// ---------------------------------------------------------------- reductions

Tensor sum_all(Tape* tape, Tensor x) {
    return with_dtype(x.dtype(), [&](auto tag) {
        using T = decltype(tag);
        auto px = x.data<T>();
        T acc = T(0);
        for (std::size_t i = 0; i < px.size(); ++i) acc += px[i];
        Tensor out = Tensor::scalar_tensor(static_cast<double>(acc), x.dtype());
        out.set_requires_grad(x.requires_grad());
        if (track(tape, out)) {
            tape->record([x, out]() mutable {
                const T g = out.grad<T>()[0];
                auto gx = x.grad<T>();
                for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += g;
            });
        }
        return out;
    });
}

Tensor mean_all(Tape* tape, Tensor x) {
    return mul_scalar(tape, sum_all(tape, x), 1.0 / static_cast<double>(x.numel()));
}

Tensor sum_axis0(Tape* tape, Tensor x) {
    if (x.rank() < 2) throw DimensionError("sum_axis0: needs rank >= 2");
    const std::int64_t rows = x.shape()[0];
    Shape out_shape(x.shape().begin() + 1, x.shape().end());
    const std::int64_t len = shape_numel(out_shape);
    return with_dtype(x.dtype(), [&](auto tag) {
        using T = decltype(tag);
        Tensor out = Tensor::zeros(out_shape, x.dtype());
        auto px = x.data<T>();
        auto po = out.data<T>();
        for (std::int64_t t = 0; t < rows; ++t) {
            for (std::int64_t i = 0; i < len; ++i) po[i] += px[t * len + i];
        }
        out.set_requires_grad(x.requires_grad());
        if (track(tape, out)) {
            tape->record([x, out, rows, len]() mutable {
                auto go = out.grad<T>();
                auto gx = x.grad<T>();
                for (std::int64_t t = 0; t < rows; ++t) {
                    for (std::int64_t i = 0; i < len; ++i) gx[t * len + i] += go[i];
                }
            });
        }
        return out;
    });
}

Tensor mean_axis0(Tape* tape, Tensor x) {
    return mul_scalar(tape, sum_axis0(tape, x), 1.0 / static_cast<double>(x.shape()[0]));
}

// ------------------------------------------------------------- linear algebra

namespace {

// c[M,N] += a[M,K] * b[K,N]; ascending-k accumulation per output element.
template <class T>
void matmul_acc(const T* a, const T* b, T* c, std::int64_t M, std::int64_t K, std::int64_t N) {
    parallel_blocks(0, M, [&](std::int64_t i0, std::int64_t i1) {
        for (std::int64_t i = i0; i < i1; ++i) {
            const T* arow = a + i * K;
            T* crow = c + i * N;
            for (std::int64_t k = 0; k < K; ++k) {
                const T av = arow[k];
                const T* brow = b + k * N;
                for (std::int64_t j = 0; j < N; ++j) crow[j] += av * brow[j];
            }
        }
    });
}

// c[M,N] += a[M,K] * b[N,K]^T (dot-product form).
template <class T>
void matmul_acc_bt(const T* a, const T* b, T* c, std::int64_t M, std::int64_t K, std::int64_t N) {
    parallel_blocks(0, M, [&](std::int64_t i0, std::int64_t i1) {
        for (std::int64_t i = i0; i < i1; ++i) {
            const T* arow = a + i * K;
            for (std::int64_t j = 0; j < N; ++j) {
                const T* brow = b + j * K;
                T acc = T(0);
                for (std::int64_t k = 0; k < K; ++k) acc += arow[k] * brow[k];
                c[i * N + j] += acc;
            }
        }
    });
}

// c[M,N] += a[K,M]^T * b[K,N]
template <class T>
void matmul_acc_at(const T* a, const T* b, T* c, std::int64_t M, std::int64_t K, std::int64_t N) {
    parallel_blocks(0, M, [&](std::int64_t i0, std::int64_t i1) {
        for (std::int64_t i = i0; i < i1; ++i) {
            T* crow = c + i * N;
            for (std::int64_t k = 0; k < K; ++k) {
                const T av = a[k * M + i];
                const T* brow = b + k * N;
                for (std::int64_t j = 0; j < N; ++j) crow[j] += av * brow[j];
            }
        }
    });
}

}  // namespace

Tensor matmul(Tape* tape, Tensor a, Tensor b) {
    if (a.rank() != 2 || b.rank() != 2) throw DimensionError("matmul: expects rank-2 tensors");
    if (a.dim(1) != b.dim(0)) {
        throw DimensionError("matmul: inner dimensions disagree " + shape_str(a.shape()) +
                             " vs " + shape_str(b.shape()));
    }
    if (a.dtype() != b.dtype()) throw DimensionError("matmul: dtype mismatch");
    const std::int64_t M = a.dim(0), K = a.dim(1), N = b.dim(1);
    return with_dtype(a.dtype(), [&](auto tag) {
        using T = decltype(tag);
        Tensor out = Tensor::zeros(Shape{M, N}, a.dtype());
        matmul_acc<T>(a.data<T>().data(), b.data<T>().data(), out.data<T>().data(), M, K, N);
        out.set_requires_grad(a.requires_grad() || b.requires_grad());
        if (track(tape, out)) {
            tape->record([a, b, out, M, K, N]() mutable {
                auto go = out.grad<T>();
                if (a.requires_grad()) {  // dA = dC * B^T
                    matmul_acc_bt<T>(go.data(), b.data<T>().data(), a.grad<T>().data(), M, N, K);
                }
                if (b.requires_grad()) {  // dB = A^T * dC
                    matmul_acc_at<T>(a.data<T>().data(), go.data(), b.grad<T>().data(), K, M, N);
                }
            });
        }
        return out;
    });
}

Tensor linear(Tape* tape, Tensor x, Tensor w, Tensor b) {
    if (w.rank() != 2) throw DimensionError("linear: weight must be rank 2");
    const bool vector_input = x.rank() == 1;
    if (x.rank() != 1 && x.rank() != 2) throw DimensionError("linear: input must be rank 1 or 2");
    const std::int64_t din = x.dim(-1);
    const std::int64_t dout = w.dim(0);
    if (w.dim(1) != din) {
        throw DimensionError("linear: weight " + shape_str(w.shape()) + " does not accept input " +
                             shape_str(x.shape()));
    }
    if (b.defined() && (b.rank() != 1 || b.dim(0) != dout)) {
        throw DimensionError("linear: bad bias shape");
    }
    const std::int64_t n = vector_input ? 1 : x.dim(0);
    return with_dtype(x.dtype(), [&](auto tag) {
        using T = decltype(tag);
        Tensor out = Tensor::zeros(vector_input ? Shape{dout} : Shape{n, dout}, x.dtype());
        auto px = x.data<T>();
        auto pw = w.data<T>();
        auto po = out.data<T>();
        parallel_blocks(0, n, [&](std::int64_t r0, std::int64_t r1) {
            for (std::int64_t r = r0; r < r1; ++r) {
                for (std::int64_t o = 0; o < dout; ++o) {
                    T acc = T(0);
                    const T* xr = px.data() + r * din;
                    const T* wr = pw.data() + o * din;
                    for (std::int64_t d = 0; d < din; ++d) acc += xr[d] * wr[d];
                    po[r * dout + o] = acc;
                }
            }
        });
        if (b.defined()) {
            auto pb = b.data<T>();
            for (std::int64_t r = 0; r < n; ++r) {
                for (std::int64_t o = 0; o < dout; ++o) po[r * dout + o] += pb[o];
            }
        }
        out.set_requires_grad(x.requires_grad() || w.requires_grad() ||
                              (b.defined() && b.requires_grad()));
        if (track(tape, out)) {
            tape->record([x, w, b, out, n, din, dout]() mutable {
                auto go = out.grad<T>();
                auto px = x.data<T>();
                auto pw = w.data<T>();
                if (x.requires_grad()) {  // dX = dY * W
                    matmul_acc<T>(go.data(), pw.data(), x.grad<T>().data(), n, dout, din);
                }
                if (w.requires_grad()) {  // dW = dY^T * X
                    matmul_acc_at<T>(go.data(), px.data(), w.grad<T>().data(), dout, n, din);
                }
                if (b.defined() && b.requires_grad()) {
                    auto gb = b.grad<T>();
                    for (std::int64_t r = 0; r < n; ++r) {
                        for (std::int64_t o = 0; o < dout; ++o) gb[o] += go[r * dout + o];
                    }
                }
            });
        }
        return out;
    });
}

// ------------------------------------------------------------------- conv2d

namespace {

struct ConvDims {
    std::int64_t n, cin, h, w, cout, k, ho, wo;
    int stride, pad;
};

ConvDims conv_dims(Tensor x, Tensor w, Tensor bias, int stride, int pad) {
    if (x.rank() != 4 || w.rank() != 4) throw DimensionError("conv2d: x and w must be rank 4");
    if (w.dim(2) != w.dim(3)) throw DimensionError("conv2d: kernel must be square");
    if (x.dim(1) != w.dim(1)) {
        throw DimensionError("conv2d: channel mismatch " + shape_str(x.shape()) + " vs " +
                             shape_str(w.shape()));
    }
    if (bias.defined() && (bias.rank() != 1 || bias.dim(0) != w.dim(0))) {
        throw DimensionError("conv2d: bad bias shape");
    }
    if (stride < 1) throw ContractError("conv2d: stride must be >= 1");
    if (pad < 0) throw ContractError("conv2d: pad must be >= 0");
    ConvDims d;
    d.n = x.dim(0);
    d.cin = x.dim(1);
    d.h = x.dim(2);
    d.w = x.dim(3);
    d.cout = w.dim(0);
    d.k = w.dim(2);
    d.stride = stride;
    d.pad = pad;
    d.ho = (d.h + 2 * pad - d.k) / stride + 1;
    d.wo = (d.w + 2 * pad - d.k) / stride + 1;
    if (d.k > d.h + 2 * pad || d.k > d.w + 2 * pad || d.ho <= 0 || d.wo <= 0) {
        throw DimensionError("conv2d: non-positive output size");
    }
    return d;
}

// Column layout: rows indexed by (cin, ky, kx), columns by (oy, ox). This
// matches the (cin, ky, kx) summation order of the naive reference loop.
template <class T>
void im2col(const T* img, const ConvDims& d, T* cols) {
    const std::int64_t hw = d.ho * d.wo;
    for (std::int64_t c = 0; c < d.cin; ++c) {
        for (std::int64_t ky = 0; ky < d.k; ++ky) {
            for (std::int64_t kx = 0; kx < d.k; ++kx) {
                T* row = cols + ((c * d.k + ky) * d.k + kx) * hw;
                for (std::int64_t oy = 0; oy < d.ho; ++oy) {
                    const std::int64_t iy = oy * d.stride - d.pad + ky;
                    if (iy < 0 || iy >= d.h) {
                        std::fill_n(row + oy * d.wo, d.wo, T(0));
                        continue;
                    }
                    for (std::int64_t ox = 0; ox < d.wo; ++ox) {
                        const std::int64_t ix = ox * d.stride - d.pad + kx;
                        row[oy * d.wo + ox] =
                            (ix < 0 || ix >= d.w) ? T(0) : img[(c * d.h + iy) * d.w + ix];
                    }
                }
            }
        }
    }
}

template <class T>
void col2im_add(const T* cols, const ConvDims& d, T* img) {
    const std::int64_t hw = d.ho * d.wo;
    for (std::int64_t c = 0; c < d.cin; ++c) {
        for (std::int64_t ky = 0; ky < d.k; ++ky) {
            for (std::int64_t kx = 0; kx < d.k; ++kx) {
                const T* row = cols + ((c * d.k + ky) * d.k + kx) * hw;
                for (std::int64_t oy = 0; oy < d.ho; ++oy) {
                    const std::int64_t iy = oy * d.stride - d.pad + ky;
                    if (iy < 0 || iy >= d.h) continue;
                    for (std::int64_t ox = 0; ox < d.wo; ++ox) {
                        const std::int64_t ix = ox * d.stride - d.pad + kx;
                        if (ix < 0 || ix >= d.w) continue;
                        img[(c * d.h + iy) * d.w + ix] += row[oy * d.wo + ox];
                    }
                }
            }
        }
    }
}

}  // namespace

Tensor conv2d(Tape* tape, Tensor x, Tensor w, Tensor bias, int stride,
              int pad) {
    const ConvDims d = conv_dims(x, w, bias, stride, pad);
    return with_dtype(x.dtype(), [&](auto tag) {
        using T = decltype(tag);
        Tensor out = Tensor::zeros(Shape{d.n, d.cout, d.ho, d.wo}, x.dtype());
        const std::int64_t ckk = d.cin * d.k * d.k;
        const std::int64_t hw = d.ho * d.wo;
        auto px = x.data<T>();
        auto pw = w.data<T>();
        auto po = out.data<T>();
        // One sample per task keeps writes disjoint; the matmul inside runs
        // inline when nested under this loop.
        parallel_blocks(0, d.n, [&](std::int64_t n0, std::int64_t n1) {
            std::vector<T> cols(static_cast<std::size_t>(ckk * hw));
            for (std::int64_t n = n0; n < n1; ++n) {
                im2col<T>(px.data() + n * d.cin * d.h * d.w, d, cols.data());
                matmul_acc<T>(pw.data(), cols.data(), po.data() + n * d.cout * hw, d.cout, ckk, hw);
            }
        });
        if (bias.defined()) {
            auto pb = bias.data<T>();
            for (std::int64_t n = 0; n < d.n; ++n) {
                for (std::int64_t c = 0; c < d.cout; ++c) {
                    T* dst = po.data() + (n * d.cout + c) * hw;
                    const T bv = pb[c];
                    for (std::int64_t i = 0; i < hw; ++i) dst[i] += bv;
                }
            }
        }
        out.set_requires_grad(x.requires_grad() || w.requires_grad() ||
                              (bias.defined() && bias.requires_grad()));
        if (track(tape, out)) {
            tape->record([x, w, bias, out, d, ckk, hw]() mutable {
                auto go = out.grad<T>();
                auto px = x.data<T>();
                auto pw = w.data<T>();
                if (w.requires_grad()) {
                    auto gw = w.grad<T>();
                    std::vector<T> cols(static_cast<std::size_t>(ckk * hw));
                    for (std::int64_t n = 0; n < d.n; ++n) {  // fixed sample order
                        im2col<T>(px.data() + n * d.cin * d.h * d.w, d, cols.data());
                        matmul_acc_bt<T>(go.data() + n * d.cout * hw, cols.data(), gw.data(),
                                         d.cout, hw, ckk);
                    }
                }
                if (bias.defined() && bias.requires_grad()) {
                    auto gb = bias.grad<T>();
                    for (std::int64_t n = 0; n < d.n; ++n) {
                        for (std::int64_t c = 0; c < d.cout; ++c) {
                            const T* src = go.data() + (n * d.cout + c) * hw;
                            T acc = T(0);
                            for (std::int64_t i = 0; i < hw; ++i) acc += src[i];
                            gb[c] += acc;
                        }
                    }
                }
                if (x.requires_grad()) {
                    auto gx = x.grad<T>();
                    parallel_blocks(0, d.n, [&](std::int64_t n0, std::int64_t n1) {
                        std::vector<T> dcols(static_cast<std::size_t>(ckk * hw));
                        for (std::int64_t n = n0; n < n1; ++n) {
                            std::fill(dcols.begin(), dcols.end(), T(0));
                            // dcols = W^T * dY_n
                            matmul_acc_at<T>(pw.data(), go.data() + n * d.cout * hw, dcols.data(),
                                             ckk, d.cout, hw);
                            col2im_add<T>(dcols.data(), d, gx.data() + n * d.cin * d.h * d.w);
                        }
                    });
                }
            });
        }
        return out;
    });
}

// -------------------------------------------------------------------- pooling

Tensor pool2d(Tape* tape, Tensor x, PoolKind kind, int k, int stride) {
    if (x.rank() != 4) throw DimensionError("pool2d: expects rank 4");
    if (k < 1 || stride < 1) throw ContractError("pool2d: k and stride must be >= 1");
    const std::int64_t n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
    if (k > h || k > w) throw DimensionError("pool2d: window larger than input");
    const std::int64_t ho = (h - k) / stride + 1;
    const std::int64_t wo = (w - k) / stride + 1;
    return with_dtype(x.dtype(), [&](auto tag) {
        using T = decltype(tag);
        Tensor out = Tensor::zeros(Shape{n, c, ho, wo}, x.dtype());
        auto px = x.data<T>();
        auto po = out.data<T>();
        std::vector<std::int64_t> argmax;
        if (kind == PoolKind::max) argmax.resize(static_cast<std::size_t>(n * c * ho * wo));
        const T inv_kk = T(1) / static_cast<T>(k * k);
        for (std::int64_t nc = 0; nc < n * c; ++nc) {
            const T* plane = px.data() + nc * h * w;
            for (std::int64_t oy = 0; oy < ho; ++oy) {
                for (std::int64_t ox = 0; ox < wo; ++ox) {
                    const std::int64_t base = oy * stride * w + ox * stride;
                    if (kind == PoolKind::max) {
                        T best = plane[base];
                        std::int64_t best_idx = base;
                        for (std::int64_t ky = 0; ky < k; ++ky) {
                            for (std::int64_t kx = 0; kx < k; ++kx) {
                                const std::int64_t idx = base + ky * w + kx;
                                if (plane[idx] > best) {  // strict: first max wins
                                    best = plane[idx];
                                    best_idx = idx;
                                }
                            }
                        }
                        po[(nc * ho + oy) * wo + ox] = best;
                        argmax[static_cast<std::size_t>((nc * ho + oy) * wo + ox)] =
                            nc * h * w + best_idx;
                    } else {
                        T acc = T(0);
                        for (std::int64_t ky = 0; ky < k; ++ky) {
                            for (std::int64_t kx = 0; kx < k; ++kx) acc += plane[base + ky * w + kx];
                        }
                        po[(nc * ho + oy) * wo + ox] = acc * inv_kk;
                    }
                }
            }
        }
        out.set_requires_grad(x.requires_grad());
        if (track(tape, out)) {
            tape->record([x, out, kind, k, stride, n, c, h, w, ho, wo,
                          argmax = std::move(argmax)]() mutable {
                auto go = out.grad<T>();
                auto gx = x.grad<T>();
                if (kind == PoolKind::max) {
                    for (std::size_t i = 0; i < go.size(); ++i) gx[static_cast<std::size_t>(argmax[i])] += go[i];
                } else {
                    const T inv_kk = T(1) / static_cast<T>(k * k);
                    for (std::int64_t nc = 0; nc < n * c; ++nc) {
                        for (std::int64_t oy = 0; oy < ho; ++oy) {
                            for (std::int64_t ox = 0; ox < wo; ++ox) {
                                const T g = go[(nc * ho + oy) * wo + ox] * inv_kk;
                                const std::int64_t base =
                                    nc * h * w + oy * stride * w + ox * stride;
                                for (std::int64_t ky = 0; ky < k; ++ky) {
                                    for (std::int64_t kx = 0; kx < k; ++kx) {
                                        gx[base + ky * w + kx] += g;
                                    }
                                }
                            }
                        }
                    }
                }
            });
        }
        return out;
    });
}

Tensor global_avg_pool(Tape* tape, Tensor x) {
    if (x.rank() != 4) throw DimensionError("global_avg_pool: expects rank 4");
    const std::int64_t n = x.dim(0), c = x.dim(1), hw = x.dim(2) * x.dim(3);
    return with_dtype(x.dtype(), [&](auto tag) {
        using T = decltype(tag);
        Tensor out = Tensor::zeros(Shape{n, c}, x.dtype());
        auto px = x.data<T>();
        auto po = out.data<T>();
        const T inv = T(1) / static_cast<T>(hw);
        for (std::int64_t nc = 0; nc < n * c; ++nc) {
            T acc = T(0);
            const T* plane = px.data() + nc * hw;
            for (std::int64_t i = 0; i < hw; ++i) acc += plane[i];
            po[nc] = acc * inv;
        }
        out.set_requires_grad(x.requires_grad());
        if (track(tape, out)) {
            tape->record([x, out, n, c, hw]() mutable {
                auto go = out.grad<T>();
                auto gx = x.grad<T>();
                const T inv = T(1) / static_cast<T>(hw);
                for (std::int64_t nc = 0; nc < n * c; ++nc) {
                    const T g = go[nc] * inv;
                    for (std::int64_t i = 0; i < hw; ++i) gx[nc * hw + i] += g;
                }
            });
        }
        return out;
    });
}

// ------------------------------------------------------------------ softmax

Tensor softmax(Tape* tape, Tensor x, int axis) {
    if (axis < 0) axis += x.rank();
    if (axis < 0 || axis >= x.rank()) throw DimensionError("softmax: bad axis");
    std::int64_t outer = 1, inner = 1;
    for (int i = 0; i < axis; ++i) outer *= x.shape()[i];
    for (int i = axis + 1; i < x.rank(); ++i) inner *= x.shape()[i];
    const std::int64_t kk = x.shape()[axis];
    return with_dtype(x.dtype(), [&](auto tag) {
        using T = decltype(tag);
        Tensor out = Tensor::zeros(x.shape(), x.dtype());
        auto px = x.data<T>();
        auto po = out.data<T>();
        for (std::int64_t o = 0; o < outer; ++o) {
            for (std::int64_t in = 0; in < inner; ++in) {
                const std::int64_t base = o * kk * inner + in;
                T m = px[base];
                for (std::int64_t j = 1; j < kk; ++j) m = std::max(m, px[base + j * inner]);
                T denom = T(0);
                for (std::int64_t j = 0; j < kk; ++j) {
                    const T e = std::exp(px[base + j * inner] - m);
                    po[base + j * inner] = e;
                    denom += e;
                }
                for (std::int64_t j = 0; j < kk; ++j) po[base + j * inner] /= denom;
            }
        }
        out.set_requires_grad(x.requires_grad());
        if (track(tape, out)) {
            tape->record([x, out, outer, inner, kk]() mutable {
                auto go = out.grad<T>();
                auto gx = x.grad<T>();
                auto po = out.data<T>();
                for (std::int64_t o = 0; o < outer; ++o) {
                    for (std::int64_t in = 0; in < inner; ++in) {
                        const std::int64_t base = o * kk * inner + in;
                        T dot = T(0);
                        for (std::int64_t j = 0; j < kk; ++j) {
                            dot += go[base + j * inner] * po[base + j * inner];
                        }
                        for (std::int64_t j = 0; j < kk; ++j) {
                            gx[base + j * inner] +=
                                po[base + j * inner] * (go[base + j * inner] - dot);
                        }
                    }
                }
            });
        }
        return out;
    });
}

// ---------------------------------------------------------------- layer norm

Tensor layer_norm(Tape* tape, Tensor x, Tensor gamma, Tensor beta,
                  double eps) {
    const std::int64_t dd = x.dim(-1);
    if (gamma.rank() != 1 || gamma.dim(0) != dd || beta.rank() != 1 || beta.dim(0) != dd) {
        throw DimensionError("layer_norm: gamma/beta must match last axis");
    }
    const std::int64_t slices = x.numel() / dd;
    return with_dtype(x.dtype(), [&](auto tag) {
        using T = decltype(tag);
        Tensor out = Tensor::zeros(x.shape(), x.dtype());
        auto px = x.data<T>();
        auto pg = gamma.data<T>();
        auto pb = beta.data<T>();
        auto po = out.data<T>();
        std::vector<T> xhat(static_cast<std::size_t>(x.numel()));
        std::vector<T> inv_std(static_cast<std::size_t>(slices));
        for (std::int64_t s = 0; s < slices; ++s) {
            const T* row = px.data() + s * dd;
            T mean = T(0);
            for (std::int64_t i = 0; i < dd; ++i) mean += row[i];
            mean /= static_cast<T>(dd);
            T var = T(0);
            for (std::int64_t i = 0; i < dd; ++i) var += (row[i] - mean) * (row[i] - mean);
            var /= static_cast<T>(dd);
            const T istd = T(1) / std::sqrt(var + static_cast<T>(eps));
            inv_std[static_cast<std::size_t>(s)] = istd;
            for (std::int64_t i = 0; i < dd; ++i) {
                const T xh = (row[i] - mean) * istd;
                xhat[static_cast<std::size_t>(s * dd + i)] = xh;
                po[s * dd + i] = pg[i] * xh + pb[i];
            }
        }
        out.set_requires_grad(x.requires_grad() || gamma.requires_grad() || beta.requires_grad());
        if (track(tape, out)) {
            tape->record([x, gamma, beta, out, slices, dd, xhat = std::move(xhat),
                          inv_std = std::move(inv_std)]() mutable {
                auto go = out.grad<T>();
                auto pg = gamma.data<T>();
                for (std::int64_t s = 0; s < slices; ++s) {
                    const T* g = go.data() + s * dd;
                    const T* xh = xhat.data() + s * dd;
                    if (gamma.requires_grad()) {
                        auto gg = gamma.grad<T>();
                        for (std::int64_t i = 0; i < dd; ++i) gg[i] += g[i] * xh[i];
                    }
                    if (beta.requires_grad()) {
                        auto gb = beta.grad<T>();
                        for (std::int64_t i = 0; i < dd; ++i) gb[i] += g[i];
                    }
                    if (x.requires_grad()) {
                        auto gx = x.grad<T>();
                        T mean_dxhat = T(0), mean_dxhat_xhat = T(0);
                        for (std::int64_t i = 0; i < dd; ++i) {
                            const T dxh = g[i] * pg[i];
                            mean_dxhat += dxh;
                            mean_dxhat_xhat += dxh * xh[i];
                        }
                        mean_dxhat /= static_cast<T>(dd);
                        mean_dxhat_xhat /= static_cast<T>(dd);
                        const T istd = inv_std[static_cast<std::size_t>(s)];
                        for (std::int64_t i = 0; i < dd; ++i) {
                            const T dxh = g[i] * pg[i];
                            gx[s * dd + i] += istd * (dxh - mean_dxhat - xh[i] * mean_dxhat_xhat);
                        }
                    }
                }
            });
        }
        return out;
    });
}

// ---------------------------------------------------------------- batch norm

Tensor batchnorm2d(Tape* tape, Tensor x, Tensor gamma, Tensor beta,
                   Tensor running_mean, Tensor running_var, double eps, double momentum,
                   bool training) {
    if (x.rank() != 4) throw DimensionError("batchnorm2d: expects rank 4");
    const std::int64_t n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
    if (gamma.dim(0) != c || beta.dim(0) != c || running_mean.dim(0) != c ||
        running_var.dim(0) != c) {
        throw DimensionError("batchnorm2d: channel mismatch");
    }
    const std::int64_t m = n * h * w;  // elements per channel
    if (training && m == 1) {
        throw ContractError("batchnorm2d: degenerate batch of one element per channel");
    }
    return with_dtype(x.dtype(), [&](auto tag) {
        using T = decltype(tag);
        Tensor out = Tensor::zeros(x.shape(), x.dtype());
        auto px = x.data<T>();
        auto pg = gamma.data<T>();
        auto pb = beta.data<T>();
        auto po = out.data<T>();
        auto prm = running_mean.data<T>();
        auto prv = running_var.data<T>();
        const std::int64_t hw = h * w;
        std::vector<T> mean_c(static_cast<std::size_t>(c)), inv_std_c(static_cast<std::size_t>(c));
        for (std::int64_t ch = 0; ch < c; ++ch) {
            T mean, var;
            if (training) {
                T acc = T(0);
                for (std::int64_t s = 0; s < n; ++s) {
                    const T* plane = px.data() + (s * c + ch) * hw;
                    for (std::int64_t i = 0; i < hw; ++i) acc += plane[i];
                }
                mean = acc / static_cast<T>(m);
                T vacc = T(0);
                for (std::int64_t s = 0; s < n; ++s) {
                    const T* plane = px.data() + (s * c + ch) * hw;
                    for (std::int64_t i = 0; i < hw; ++i) {
                        vacc += (plane[i] - mean) * (plane[i] - mean);
                    }
                }
                var = vacc / static_cast<T>(m);  // biased; the same statistic feeds running_var
                prm[ch] = static_cast<T>((1.0 - momentum)) * prm[ch] + static_cast<T>(momentum) * mean;
                prv[ch] = static_cast<T>((1.0 - momentum)) * prv[ch] + static_cast<T>(momentum) * var;
            } else {
                mean = prm[ch];
                var = prv[ch];
            }
            const T istd = T(1) / std::sqrt(var + static_cast<T>(eps));
            mean_c[static_cast<std::size_t>(ch)] = mean;
            inv_std_c[static_cast<std::size_t>(ch)] = istd;
            for (std::int64_t s = 0; s < n; ++s) {
                const T* plane = px.data() + (s * c + ch) * hw;
                T* dst = po.data() + (s * c + ch) * hw;
                for (std::int64_t i = 0; i < hw; ++i) {
                    dst[i] = pg[ch] * (plane[i] - mean) * istd + pb[ch];
                }
            }
        }
        out.set_requires_grad(x.requires_grad() || gamma.requires_grad() || beta.requires_grad());
        if (track(tape, out)) {
            tape->record([x, gamma, beta, out, n, c, hw, m, training, mean_c = std::move(mean_c),
                          inv_std_c = std::move(inv_std_c)]() mutable {
                auto go = out.grad<T>();
                auto px = x.data<T>();
                auto pg = gamma.data<T>();
                for (std::int64_t ch = 0; ch < c; ++ch) {
                    const T mean = mean_c[static_cast<std::size_t>(ch)];
                    const T istd = inv_std_c[static_cast<std::size_t>(ch)];
                    T sum_g = T(0), sum_g_xhat = T(0);
                    for (std::int64_t s = 0; s < n; ++s) {
                        const T* g = go.data() + (s * c + ch) * hw;
                        const T* xr = px.data() + (s * c + ch) * hw;
                        for (std::int64_t i = 0; i < hw; ++i) {
                            sum_g += g[i];
                            sum_g_xhat += g[i] * (xr[i] - mean) * istd;
                        }
                    }
                    if (gamma.requires_grad()) gamma.grad<T>()[ch] += sum_g_xhat;
                    if (beta.requires_grad()) beta.grad<T>()[ch] += sum_g;
                    if (x.requires_grad()) {
                        auto gx = x.grad<T>();
                        const T gscale = pg[ch] * istd;
                        if (training) {
                            const T mg = sum_g / static_cast<T>(m);
                            const T mgx = sum_g_xhat / static_cast<T>(m);
                            for (std::int64_t s = 0; s < n; ++s) {
                                const T* g = go.data() + (s * c + ch) * hw;
                                const T* xr = px.data() + (s * c + ch) * hw;
                                T* dst = gx.data() + (s * c + ch) * hw;
                                for (std::int64_t i = 0; i < hw; ++i) {
                                    const T xh = (xr[i] - mean) * istd;
                                    dst[i] += gscale * (g[i] - mg - xh * mgx);
                                }
                            }
                        } else {  // running stats are constants
                            for (std::int64_t s = 0; s < n; ++s) {
                                const T* g = go.data() + (s * c + ch) * hw;
                                T* dst = gx.data() + (s * c + ch) * hw;
                                for (std::int64_t i = 0; i < hw; ++i) dst[i] += gscale * g[i];
                            }
                        }
                    }
                }
            });
        }
        return out;
    });
}

// ------------------------------------------------------------------- dropout

Tensor dropout(Tape* tape, Tensor x, double rate, Rng& rng) {
    if (rate < 0.0 || rate >= 1.0) throw ContractError("dropout: rate must be in [0, 1)");
    if (rate == 0.0) return x;
    return with_dtype(x.dtype(), [&](auto tag) {
        using T = decltype(tag);
        Tensor out = Tensor::zeros(x.shape(), x.dtype());
        auto px = x.data<T>();
        auto po = out.data<T>();
        std::vector<unsigned char> keep(static_cast<std::size_t>(x.numel()));
        const T scale = T(1) / static_cast<T>(1.0 - rate);
        for (std::size_t i = 0; i < keep.size(); ++i) {
            keep[i] = rng.uniform01() >= rate ? 1 : 0;
            po[i] = keep[i] ? px[i] * scale : T(0);
        }
        out.set_requires_grad(x.requires_grad());
        if (track(tape, out)) {
            tape->record([x, out, scale, keep = std::move(keep)]() mutable {
                auto go = out.grad<T>();
                auto gx = x.grad<T>();
                for (std::size_t i = 0; i < go.size(); ++i) {
                    if (keep[i]) gx[i] += go[i] * scale;
                }
            });
        }
        return out;
    });
}

// ------------------------------------------------------------- cross entropy

Tensor cross_entropy_rows(Tape* tape, Tensor logits, int label, double weight) {
    if (logits.rank() != 2) throw DimensionError("cross_entropy_rows: expects [T, K]");
    const std::int64_t t = logits.dim(0), kk = logits.dim(1);
    if (label < 0 || label >= kk) throw ContractError("cross_entropy: label out of range");
    if (weight <= 0.0) throw ContractError("cross_entropy: weight must be positive");
    return with_dtype(logits.dtype(), [&](auto tag) {
        using T = decltype(tag);
        auto pl = logits.data<T>();
        std::vector<T> probs(static_cast<std::size_t>(t * kk));
        T total = T(0);
        for (std::int64_t r = 0; r < t; ++r) {
            const T* row = pl.data() + r * kk;
            T m = row[0];
            for (std::int64_t j = 1; j < kk; ++j) m = std::max(m, row[j]);
            T denom = T(0);
            for (std::int64_t j = 0; j < kk; ++j) {
                const T e = std::exp(row[j] - m);
                probs[static_cast<std::size_t>(r * kk + j)] = e;
                denom += e;
            }
            for (std::int64_t j = 0; j < kk; ++j) probs[static_cast<std::size_t>(r * kk + j)] /= denom;
            const T lse = m + std::log(denom);
            total += static_cast<T>(weight) * (lse - row[label]);
        }
        Tensor out = Tensor::scalar_tensor(static_cast<double>(total / static_cast<T>(t)),
                                           logits.dtype());
        out.set_requires_grad(logits.requires_grad());
        if (track(tape, out)) {
            tape->record([logits, out, t, kk, label, weight, probs = std::move(probs)]() mutable {
                const T up = out.grad<T>()[0];
                auto gl = logits.grad<T>();
                const T scale = up * static_cast<T>(weight) / static_cast<T>(t);
                for (std::int64_t r = 0; r < t; ++r) {
                    for (std::int64_t j = 0; j < kk; ++j) {
                        const T p = probs[static_cast<std::size_t>(r * kk + j)];
                        gl[r * kk + j] += scale * (p - (j == label ? T(1) : T(0)));
                    }
                }
            });
        }
        return out;
    });
}

Tensor cross_entropy(Tape* tape, Tensor logits, int label, double weight) {
    if (logits.rank() != 1) throw DimensionError("cross_entropy: expects [K]");
    return cross_entropy_rows(tape, reshape(tape, logits, Shape{1, logits.dim(0)}), label, weight);
}

// ---------------------------------------------------- channel pooling / mask

Tensor channel_mean(Tape* tape, Tensor x) {
    if (x.rank() != 4) throw DimensionError("channel_mean: expects rank 4");
    const std::int64_t n = x.dim(0), c = x.dim(1), hw = x.dim(2) * x.dim(3);
    return with_dtype(x.dtype(), [&](auto tag) {
        using T = decltype(tag);
        Tensor out = Tensor::zeros(Shape{n, x.dim(2), x.dim(3)}, x.dtype());
        auto px = x.data<T>();
        auto po = out.data<T>();
        const T inv = T(1) / static_cast<T>(c);
        for (std::int64_t s = 0; s < n; ++s) {
            for (std::int64_t ch = 0; ch < c; ++ch) {
                const T* plane = px.data() + (s * c + ch) * hw;
                T* dst = po.data() + s * hw;
                for (std::int64_t i = 0; i < hw; ++i) dst[i] += plane[i];
            }
            T* dst = po.data() + s * hw;
            for (std::int64_t i = 0; i < hw; ++i) dst[i] *= inv;
        }
        out.set_requires_grad(x.requires_grad());
        if (track(tape, out)) {
            tape->record([x, out, n, c, hw]() mutable {
                auto go = out.grad<T>();
                auto gx = x.grad<T>();
                const T inv = T(1) / static_cast<T>(c);
                for (std::int64_t s = 0; s < n; ++s) {
                    for (std::int64_t ch = 0; ch < c; ++ch) {
                        T* dst = gx.data() + (s * c + ch) * hw;
                        const T* g = go.data() + s * hw;
                        for (std::int64_t i = 0; i < hw; ++i) dst[i] += g[i] * inv;
                    }
                }
            });
        }
        return out;
    });
}

Tensor channel_max(Tape* tape, Tensor x) {
    if (x.rank() != 4) throw DimensionError("channel_max: expects rank 4");
    const std::int64_t n = x.dim(0), c = x.dim(1), hw = x.dim(2) * x.dim(3);
    return with_dtype(x.dtype(), [&](auto tag) {
        using T = decltype(tag);
        Tensor out = Tensor::zeros(Shape{n, x.dim(2), x.dim(3)}, x.dtype());
        auto px = x.data<T>();
        auto po = out.data<T>();
        std::vector<std::int64_t> arg(static_cast<std::size_t>(n * hw));
        for (std::int64_t s = 0; s < n; ++s) {
            for (std::int64_t i = 0; i < hw; ++i) {
                T best = px[(s * c) * hw + i];
                std::int64_t best_ch = 0;
                for (std::int64_t ch = 1; ch < c; ++ch) {
                    const T v = px[(s * c + ch) * hw + i];
                    if (v > best) {
                        best = v;
                        best_ch = ch;
                    }
                }
                po[s * hw + i] = best;
                arg[static_cast<std::size_t>(s * hw + i)] = best_ch;
            }
        }
        out.set_requires_grad(x.requires_grad());
        if (track(tape, out)) {
            tape->record([x, out, n, c, hw, arg = std::move(arg)]() mutable {
                auto go = out.grad<T>();
                auto gx = x.grad<T>();
                for (std::int64_t s = 0; s < n; ++s) {
                    for (std::int64_t i = 0; i < hw; ++i) {
                        const std::int64_t ch = arg[static_cast<std::size_t>(s * hw + i)];
                        gx[(s * c + ch) * hw + i] += go[s * hw + i];
                    }
                }
            });
        }
        return out;
    });
}

Tensor mul_mask(Tape* tape, Tensor x, Tensor m) {
    if (x.rank() != 4 || m.rank() != 4 || m.dim(1) != 1 || m.dim(0) != x.dim(0) ||
        m.dim(2) != x.dim(2) || m.dim(3) != x.dim(3)) {
        throw DimensionError("mul_mask: expects x[N,C,H,W] and m[N,1,H,W]");
    }
    const std::int64_t n = x.dim(0), c = x.dim(1), hw = x.dim(2) * x.dim(3);
    return with_dtype(x.dtype(), [&](auto tag) {
        using T = decltype(tag);
        Tensor out = Tensor::zeros(x.shape(), x.dtype());
        auto px = x.data<T>();
        auto pm = m.data<T>();
        auto po = out.data<T>();
        for (std::int64_t s = 0; s < n; ++s) {
            const T* mk = pm.data() + s * hw;
            for (std::int64_t ch = 0; ch < c; ++ch) {
                const T* src = px.data() + (s * c + ch) * hw;
                T* dst = po.data() + (s * c + ch) * hw;
                for (std::int64_t i = 0; i < hw; ++i) dst[i] = src[i] * mk[i];
            }
        }
        out.set_requires_grad(x.requires_grad() || m.requires_grad());
        if (track(tape, out)) {
            tape->record([x, m, out, n, c, hw]() mutable {
                auto go = out.grad<T>();
                auto px = x.data<T>();
                auto pm = m.data<T>();
                for (std::int64_t s = 0; s < n; ++s) {
                    const T* mk = pm.data() + s * hw;
                    for (std::int64_t ch = 0; ch < c; ++ch) {
                        const T* g = go.data() + (s * c + ch) * hw;
                        const T* src = px.data() + (s * c + ch) * hw;
                        if (x.requires_grad()) {
                            auto gx = x.grad<T>();
                            T* dst = gx.data() + (s * c + ch) * hw;
                            for (std::int64_t i = 0; i < hw; ++i) dst[i] += g[i] * mk[i];
                        }
                        if (m.requires_grad()) {
                            auto gm = m.grad<T>();
                            T* dst = gm.data() + s * hw;
                            for (std::int64_t i = 0; i < hw; ++i) dst[i] += g[i] * src[i];
                        }
                    }
                }
            });
        }
        return out;
    });
}

}  // namespace fame
