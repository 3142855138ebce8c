#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "fame/error.hpp"

namespace fame {

enum class Dtype { f32, f64 };

inline const char* dtype_name(Dtype d) { return d == Dtype::f32 ? "f32" : "f64"; }

using Shape = std::vector<std::int64_t>;

std::int64_t shape_numel(const Shape& s);
std::string shape_str(const Shape& s);

struct TensorImpl {
    Shape shape;
    Dtype dtype = Dtype::f64;
    bool requires_grad = false;
    std::vector<double> data64, grad64;
    std::vector<float> data32, grad32;
    bool grad_present = false;
};

// Dense row-major tensor. Copies share storage (shallow handle), which gives
// tape backward rules stable identities; use clone() for a deep copy.
class Tensor {
public:
    Tensor() = default;

    static Tensor zeros(Shape shape, Dtype dt = Dtype::f64);
    static Tensor full(Shape shape, double value, Dtype dt = Dtype::f64);
    static Tensor from_values(const std::vector<double>& values, Shape shape,
                              Dtype dt = Dtype::f64);
    static Tensor scalar_tensor(double value, Dtype dt = Dtype::f64);

    bool defined() const { return impl_ != nullptr; }
    const Shape& shape() const { return impl_->shape; }
    int rank() const { return static_cast<int>(impl_->shape.size()); }
    std::int64_t dim(int i) const;  // negative i counts from the back
    std::int64_t numel() const;
    Dtype dtype() const { return impl_->dtype; }

    bool requires_grad() const { return impl_ && impl_->requires_grad; }
    Tensor& set_requires_grad(bool v) {
        impl_->requires_grad = v;
        return *this;
    }

    template <class T> std::span<T> data();
    template <class T> std::span<const T> data() const;
    template <class T> std::span<T> grad();
    template <class T> std::span<const T> grad() const;

    bool has_grad() const { return impl_ && impl_->grad_present; }
    void ensure_grad();  // allocate zero-filled gradient if absent
    void zero_grad();

    // Convenience element access through double; fine for tests and glue,
    // kernels use the typed spans.
    double value_at(std::int64_t flat) const;
    void set_value(std::int64_t flat, double v);
    double grad_at(std::int64_t flat) const;
    double scalar_value() const;

    std::vector<double> to_vector() const;
    Tensor clone() const;             // deep copy of data (not grad)
    Tensor to_dtype(Dtype dt) const;  // converting deep copy

    void check_finite(const std::string& what) const;  // throws NumericError

    bool same_storage(const Tensor& o) const { return impl_ == o.impl_; }
    TensorImpl* impl() const { return impl_.get(); }

private:
    explicit Tensor(std::shared_ptr<TensorImpl> impl) : impl_(std::move(impl)) {}
    std::shared_ptr<TensorImpl> impl_;
};

template <class F>
decltype(auto) with_dtype(Dtype dt, F&& f) {
    if (dt == Dtype::f64) {
        return f(double{});
    }
    return f(float{});
}

template <> inline std::span<double> Tensor::data<double>() {
    if (impl_->dtype != Dtype::f64) throw ContractError("tensor is not f64");
    return {impl_->data64.data(), impl_->data64.size()};
}
template <> inline std::span<float> Tensor::data<float>() {
    if (impl_->dtype != Dtype::f32) throw ContractError("tensor is not f32");
    return {impl_->data32.data(), impl_->data32.size()};
}
template <> inline std::span<const double> Tensor::data<double>() const {
    if (impl_->dtype != Dtype::f64) throw ContractError("tensor is not f64");
    return {impl_->data64.data(), impl_->data64.size()};
}
template <> inline std::span<const float> Tensor::data<float>() const {
    if (impl_->dtype != Dtype::f32) throw ContractError("tensor is not f32");
    return {impl_->data32.data(), impl_->data32.size()};
}
template <> inline std::span<double> Tensor::grad<double>() {
    if (impl_->dtype != Dtype::f64) throw ContractError("tensor is not f64");
    ensure_grad();
    return {impl_->grad64.data(), impl_->grad64.size()};
}
template <> inline std::span<float> Tensor::grad<float>() {
    if (impl_->dtype != Dtype::f32) throw ContractError("tensor is not f32");
    ensure_grad();
    return {impl_->grad32.data(), impl_->grad32.size()};
}
template <> inline std::span<const double> Tensor::grad<double>() const {
    if (impl_->dtype != Dtype::f64) throw ContractError("tensor is not f64");
    return {impl_->grad64.data(), impl_->grad64.size()};
}
template <> inline std::span<const float> Tensor::grad<float>() const {
    if (impl_->dtype != Dtype::f32) throw ContractError("tensor is not f32");
    return {impl_->grad32.data(), impl_->grad32.size()};
}

}  // namespace fame
