#pragma once

#include <cstddef>
#include <cstdlib>
#include <new>
#include <string>
#include <vector>

#include "core/error.hpp"

namespace bsldm {

using real = double;

// 64-byte aligned storage for every numeric buffer. Keeping alignment fixed
// keeps the vectorized kernel paths identical regardless of heap history,
// which is what makes reruns bit-identical.
template <class T>
struct AlignedAlloc {
    using value_type = T;
    static constexpr std::size_t alignment = 64;

    AlignedAlloc() = default;
    template <class U>
    AlignedAlloc(const AlignedAlloc<U>&) noexcept {}

    T* allocate(std::size_t n) {
        if (n == 0) return nullptr;
        const std::size_t bytes = (n * sizeof(T) + alignment - 1) / alignment * alignment;
        void* p = std::aligned_alloc(alignment, bytes);
        if (p == nullptr) throw std::bad_alloc();
        return static_cast<T*>(p);
    }
    void deallocate(T* p, std::size_t) noexcept { std::free(p); }

    template <class U>
    bool operator==(const AlignedAlloc<U>&) const noexcept {
        return true;
    }
};

template <class T>
using aligned_vector = std::vector<T, AlignedAlloc<T>>;

// Dense row-major tensor with value semantics. Image/latent batches use the
// NCHW convention throughout.
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(std::vector<int> shape);
    Tensor(std::vector<int> shape, real fill);

    static Tensor zeros_like(const Tensor& other) { return Tensor(other.shape_); }

    const std::vector<int>& shape() const { return shape_; }
    int ndim() const { return static_cast<int>(shape_.size()); }
    int dim(int i) const { return shape_[static_cast<std::size_t>(i)]; }
    std::size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    real* data() { return data_.data(); }
    const real* data() const { return data_.data(); }

    real& operator[](std::size_t i) { return data_[i]; }
    real operator[](std::size_t i) const { return data_[i]; }

    // NCHW accessors.
    real& at(int n, int c, int h, int w) {
        return data_[idx(n, c, h, w)];
    }
    real at(int n, int c, int h, int w) const {
        return data_[idx(n, c, h, w)];
    }
    std::size_t idx(int n, int c, int h, int w) const {
        return ((static_cast<std::size_t>(n) * shape_[1] + c) * shape_[2] + h) * shape_[3] + w;
    }

    bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }
    std::string shape_str() const;

    Tensor reshaped(std::vector<int> new_shape) const;

    void fill(real v);
    void add_(const Tensor& other);                 // this += other
    void add_scaled_(const Tensor& other, real s);  // this += s * other
    void scale_(real s);
    bool all_finite() const;

private:
    std::vector<int> shape_;
    aligned_vector<real> data_;
};

std::size_t shape_numel(const std::vector<int>& shape);

// Channel-axis concat/split for NCHW batches (used for skip connections and
// conditioning by concatenation).
Tensor concat_channels(const Tensor& a, const Tensor& b);
void split_channels(const Tensor& x, int ca, Tensor& a, Tensor& b);

// Batch-axis helpers. stack_batch concatenates (1,C,H,W) items along N;
// slice_batch copies sample i back out as (1,C,H,W).
Tensor stack_batch(const std::vector<const Tensor*>& items);
Tensor slice_batch(const Tensor& x, int i);

}  // namespace bsldm
