#include "core/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace bsldm {

std::size_t shape_numel(const std::vector<int>& shape) {
    std::size_t n = 1;
    for (int d : shape) {
        require(d >= 0, Status::InvalidArgument, "negative tensor dimension");
        n *= static_cast<std::size_t>(d);
    }
    return n;
}

Tensor::Tensor(std::vector<int> shape)
    : shape_(std::move(shape)), data_(shape_numel(shape_), 0.0) {}

Tensor::Tensor(std::vector<int> shape, real fill)
    : shape_(std::move(shape)), data_(shape_numel(shape_), fill) {}

std::string Tensor::shape_str() const {
    std::ostringstream os;
    os << "(";
    for (std::size_t i = 0; i < shape_.size(); ++i) {
        if (i) os << "x";
        os << shape_[i];
    }
    os << ")";
    return os.str();
}

Tensor Tensor::reshaped(std::vector<int> new_shape) const {
    require(shape_numel(new_shape) == size(), Status::InvalidArgument,
            "reshape element count mismatch");
    Tensor out;
    out.shape_ = std::move(new_shape);
    out.data_ = data_;
    return out;
}

void Tensor::fill(real v) {
    for (auto& x : data_) x = v;
}

void Tensor::add_(const Tensor& other) {
    require(same_shape(other), Status::InvalidArgument, "tensor shape mismatch in add");
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += other.data_[i];
}

void Tensor::add_scaled_(const Tensor& other, real s) {
    require(same_shape(other), Status::InvalidArgument, "tensor shape mismatch in add_scaled");
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += s * other.data_[i];
}

void Tensor::scale_(real s) {
    for (auto& x : data_) x *= s;
}

bool Tensor::all_finite() const {
    for (real x : data_) {
        if (!std::isfinite(x)) return false;
    }
    return true;
}

Tensor concat_channels(const Tensor& a, const Tensor& b) {
    require(a.ndim() == 4 && b.ndim() == 4, Status::InvalidArgument, "concat expects 4-d tensors");
    require(a.dim(0) == b.dim(0) && a.dim(2) == b.dim(2) && a.dim(3) == b.dim(3),
            Status::InvalidArgument, "concat batch/spatial dims differ");
    const int n = a.dim(0), ca = a.dim(1), cb = b.dim(1);
    const std::size_t plane = static_cast<std::size_t>(a.dim(2)) * a.dim(3);
    Tensor out({n, ca + cb, a.dim(2), a.dim(3)});
    for (int i = 0; i < n; ++i) {
        real* dst = out.data() + out.idx(i, 0, 0, 0);
        const real* pa = a.data() + a.idx(i, 0, 0, 0);
        const real* pb = b.data() + b.idx(i, 0, 0, 0);
        std::copy(pa, pa + ca * plane, dst);
        std::copy(pb, pb + cb * plane, dst + ca * plane);
    }
    return out;
}

void split_channels(const Tensor& x, int ca, Tensor& a, Tensor& b) {
    require(x.ndim() == 4, Status::InvalidArgument, "split expects a 4-d tensor");
    require(ca > 0 && ca < x.dim(1), Status::InvalidArgument, "split channel count out of range");
    const int n = x.dim(0), cb = x.dim(1) - ca;
    const std::size_t plane = static_cast<std::size_t>(x.dim(2)) * x.dim(3);
    a = Tensor({n, ca, x.dim(2), x.dim(3)});
    b = Tensor({n, cb, x.dim(2), x.dim(3)});
    for (int i = 0; i < n; ++i) {
        const real* src = x.data() + x.idx(i, 0, 0, 0);
        std::copy(src, src + ca * plane, a.data() + a.idx(i, 0, 0, 0));
        std::copy(src + ca * plane, src + (ca + cb) * plane, b.data() + b.idx(i, 0, 0, 0));
    }
}

Tensor stack_batch(const std::vector<const Tensor*>& items) {
    require(!items.empty(), Status::InvalidArgument, "stack_batch needs at least one item");
    const Tensor& first = *items.front();
    require(first.ndim() == 4, Status::InvalidArgument, "stack_batch expects 4-d items");
    int n = 0;
    for (const Tensor* t : items) {
        require(t->ndim() == 4 && t->dim(1) == first.dim(1) && t->dim(2) == first.dim(2) &&
                    t->dim(3) == first.dim(3),
                Status::InvalidArgument, "stack_batch item shape mismatch");
        n += t->dim(0);
    }
    Tensor out({n, first.dim(1), first.dim(2), first.dim(3)});
    real* dst = out.data();
    for (const Tensor* t : items) {
        std::copy(t->data(), t->data() + t->size(), dst);
        dst += t->size();
    }
    return out;
}

Tensor slice_batch(const Tensor& x, int i) {
    require(x.ndim() == 4 && i >= 0 && i < x.dim(0), Status::InvalidArgument,
            "slice_batch index out of range");
    Tensor out({1, x.dim(1), x.dim(2), x.dim(3)});
    const std::size_t stride = out.size();
    std::copy(x.data() + stride * static_cast<std::size_t>(i),
              x.data() + stride * static_cast<std::size_t>(i + 1), out.data());
    return out;
}

}  // namespace bsldm
