#include "fame/tensor.hpp"

#include <cmath>
#include <sstream>

namespace fame {

std::int64_t shape_numel(const Shape& s) {
    std::int64_t n = 1;
    for (auto d : s) n *= d;
    return n;
}

std::string shape_str(const Shape& s) {
    std::ostringstream os;
    os << "[";
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (i) os << "x";
        os << s[i];
    }
    os << "]";
    return os.str();
}

static std::shared_ptr<TensorImpl> make_impl(Shape shape, Dtype dt) {
    for (auto d : shape) {
        if (d <= 0) throw DimensionError("non-positive dimension in shape " + shape_str(shape));
    }
    auto impl = std::make_shared<TensorImpl>();
    impl->shape = std::move(shape);
    impl->dtype = dt;
    const auto n = static_cast<std::size_t>(shape_numel(impl->shape));
    if (dt == Dtype::f64) {
        impl->data64.assign(n, 0.0);
    } else {
        impl->data32.assign(n, 0.0f);
    }
    return impl;
}

Tensor Tensor::zeros(Shape shape, Dtype dt) { return Tensor(make_impl(std::move(shape), dt)); }

Tensor Tensor::full(Shape shape, double value, Dtype dt) {
    Tensor t = zeros(std::move(shape), dt);
    if (dt == Dtype::f64) {
        for (auto& v : t.impl_->data64) v = value;
    } else {
        for (auto& v : t.impl_->data32) v = static_cast<float>(value);
    }
    return t;
}

Tensor Tensor::from_values(const std::vector<double>& values, Shape shape, Dtype dt) {
    Tensor t = zeros(std::move(shape), dt);
    if (static_cast<std::int64_t>(values.size()) != t.numel()) {
        throw DimensionError("value count " + std::to_string(values.size()) +
                             " does not match shape " + shape_str(t.shape()));
    }
    for (std::int64_t i = 0; i < t.numel(); ++i) t.set_value(i, values[static_cast<std::size_t>(i)]);
    return t;
}

Tensor Tensor::scalar_tensor(double value, Dtype dt) { return full(Shape{1}, value, dt); }

std::int64_t Tensor::dim(int i) const {
    const int r = rank();
    if (i < 0) i += r;
    if (i < 0 || i >= r) throw DimensionError("axis out of range");
    return impl_->shape[static_cast<std::size_t>(i)];
}

std::int64_t Tensor::numel() const { return shape_numel(impl_->shape); }

void Tensor::ensure_grad() {
    if (impl_->grad_present) return;
    const auto n = static_cast<std::size_t>(numel());
    if (impl_->dtype == Dtype::f64) {
        impl_->grad64.assign(n, 0.0);
    } else {
        impl_->grad32.assign(n, 0.0f);
    }
    impl_->grad_present = true;
}

void Tensor::zero_grad() {
    if (!impl_->grad_present) return;
    for (auto& v : impl_->grad64) v = 0.0;
    for (auto& v : impl_->grad32) v = 0.0f;
}

double Tensor::value_at(std::int64_t flat) const {
    return impl_->dtype == Dtype::f64 ? impl_->data64[static_cast<std::size_t>(flat)]
                                      : static_cast<double>(impl_->data32[static_cast<std::size_t>(flat)]);
}

void Tensor::set_value(std::int64_t flat, double v) {
    if (impl_->dtype == Dtype::f64) {
        impl_->data64[static_cast<std::size_t>(flat)] = v;
    } else {
        impl_->data32[static_cast<std::size_t>(flat)] = static_cast<float>(v);
    }
}

double Tensor::grad_at(std::int64_t flat) const {
    if (!impl_->grad_present) return 0.0;
    return impl_->dtype == Dtype::f64 ? impl_->grad64[static_cast<std::size_t>(flat)]
                                      : static_cast<double>(impl_->grad32[static_cast<std::size_t>(flat)]);
}

double Tensor::scalar_value() const {
    if (numel() != 1) throw ContractError("scalar_value on tensor of shape " + shape_str(shape()));
    return value_at(0);
}

std::vector<double> Tensor::to_vector() const {
    std::vector<double> out(static_cast<std::size_t>(numel()));
    for (std::int64_t i = 0; i < numel(); ++i) out[static_cast<std::size_t>(i)] = value_at(i);
    return out;
}

Tensor Tensor::clone() const {
    Tensor t = zeros(shape(), dtype());
    t.impl_->requires_grad = impl_->requires_grad;
    t.impl_->data64 = impl_->data64;
    t.impl_->data32 = impl_->data32;
    return t;
}

Tensor Tensor::to_dtype(Dtype dt) const {
    if (dt == dtype()) return clone();
    Tensor t = zeros(shape(), dt);
    t.impl_->requires_grad = impl_->requires_grad;
    for (std::int64_t i = 0; i < numel(); ++i) t.set_value(i, value_at(i));
    return t;
}

void Tensor::check_finite(const std::string& what) const {
    for (std::int64_t i = 0; i < numel(); ++i) {
        if (!std::isfinite(value_at(i))) {
            throw NumericError("non-finite value in " + what);
        }
    }
}

}  // namespace fame
