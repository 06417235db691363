#pragma once

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "symconv/error.hpp"

namespace symconv {

using Shape = std::vector<std::size_t>;

std::string shape_to_string(const Shape& s);

// Dense row-major n-d array. The scalar type is float for everything that
// trains and double for the gradient-checking utilities.
//
// Reductions over tensors are always accumulated left-to-right over the
// contiguous buffer so repeated runs are bit-identical.
template <typename T>
class TensorT {
public:
    TensorT() = default;

    explicit TensorT(Shape shape, T fill = T(0)) : shape_(std::move(shape)) {
        data_.assign(count(shape_), fill);
    }

    static TensorT zeros(Shape shape) { return TensorT(std::move(shape), T(0)); }
    static TensorT ones(Shape shape) { return TensorT(std::move(shape), T(1)); }

    static TensorT from_values(Shape shape, std::vector<T> values) {
        if (values.size() != count(shape)) {
            std::ostringstream os;
            os << "from_values: shape " << shape_to_string(shape) << " wants "
               << count(shape) << " values, got " << values.size();
            throw ShapeError(os.str());
        }
        TensorT t;
        t.shape_ = std::move(shape);
        t.data_ = std::move(values);
        return t;
    }

    const Shape& shape() const { return shape_; }
    std::size_t rank() const { return shape_.size(); }
    std::size_t size() const { return data_.size(); }
    std::size_t dim(std::size_t axis) const { return shape_.at(axis); }

    T* data() { return data_.data(); }
    const T* data() const { return data_.data(); }
    std::vector<T>& buffer() { return data_; }
    const std::vector<T>& buffer() const { return data_; }

    // Unchecked flat access; hot loops index the raw buffer directly.
    T& operator[](std::size_t i) { return data_[i]; }
    const T& operator[](std::size_t i) const { return data_[i]; }

    // Checked multi-index access. Out-of-range indices are an error, never
    // wraparound.
    template <typename... Ix>
    T& at(Ix... ix) {
        return data_[checked_offset({static_cast<std::size_t>(ix)...})];
    }
    template <typename... Ix>
    const T& at(Ix... ix) const {
        return data_[checked_offset({static_cast<std::size_t>(ix)...})];
    }

    bool same_shape(const TensorT& other) const { return shape_ == other.shape_; }

    static std::size_t count(const Shape& s) {
        std::size_t n = 1;
        for (std::size_t d : s) n *= d;
        return n;
    }

private:
    std::size_t checked_offset(std::initializer_list<std::size_t> ix) const {
        if (ix.size() != shape_.size()) {
            std::ostringstream os;
            os << "index rank " << ix.size() << " does not match tensor rank "
               << shape_.size();
            throw ShapeError(os.str());
        }
        std::size_t off = 0;
        std::size_t axis = 0;
        for (std::size_t i : ix) {
            if (i >= shape_[axis]) {
                std::ostringstream os;
                os << "index " << i << " out of range for axis " << axis
                   << " of shape " << shape_to_string(shape_);
                throw ShapeError(os.str());
            }
            off = off * shape_[axis] + i;
            ++axis;
        }
        return off;
    }

    Shape shape_;
    std::vector<T> data_;
};

using Tensor = TensorT<float>;
using Tensor64 = TensorT<double>;

template <typename T>
TensorT<T> add(const TensorT<T>& a, const TensorT<T>& b);
template <typename T>
TensorT<T> sub(const TensorT<T>& a, const TensorT<T>& b);
template <typename T>
TensorT<T> mul(const TensorT<T>& a, const TensorT<T>& b);
template <typename T>
TensorT<T> scale(const TensorT<T>& a, T s);

// 2-d matrix product, inner sum accumulated left-to-right.
template <typename T>
TensorT<T> matmul(const TensorT<T>& a, const TensorT<T>& b);

template <typename T>
TensorT<T> transpose2d(const TensorT<T>& a);

// Reverses index order along one axis.
template <typename T>
TensorT<T> flip(const TensorT<T>& a, std::size_t axis);

// Adds `amount` rows/cols of `value` on each side of the last two axes.
template <typename T>
TensorT<T> pad2d(const TensorT<T>& a, std::size_t amount, T value = T(0));

// Inverse of pad2d for the same amount.
template <typename T>
TensorT<T> crop2d(const TensorT<T>& a, std::size_t amount);

}  // namespace symconv
