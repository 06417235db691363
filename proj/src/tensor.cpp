#include "symconv/tensor.hpp"

namespace symconv {

std::string shape_to_string(const Shape& s) {
    std::ostringstream os;
    os << "[";
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (i) os << ",";
        os << s[i];
    }
    os << "]";
    return os.str();
}

namespace {

template <typename T>
void require_same_shape(const TensorT<T>& a, const TensorT<T>& b, const char* op) {
    if (!a.same_shape(b)) {
        std::ostringstream os;
        os << op << ": shape mismatch " << shape_to_string(a.shape()) << " vs "
           << shape_to_string(b.shape());
        throw ShapeError(os.str());
    }
}

}  // namespace

template <typename T>
TensorT<T> add(const TensorT<T>& a, const TensorT<T>& b) {
    require_same_shape(a, b, "add");
    TensorT<T> out(a.shape());
    for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] + b[i];
    return out;
}

template <typename T>
TensorT<T> sub(const TensorT<T>& a, const TensorT<T>& b) {
    require_same_shape(a, b, "sub");
    TensorT<T> out(a.shape());
    for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] - b[i];
    return out;
}

template <typename T>
TensorT<T> mul(const TensorT<T>& a, const TensorT<T>& b) {
    require_same_shape(a, b, "mul");
    TensorT<T> out(a.shape());
    for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] * b[i];
    return out;
}

template <typename T>
TensorT<T> scale(const TensorT<T>& a, T s) {
    TensorT<T> out(a.shape());
    for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] * s;
    return out;
}

template <typename T>
TensorT<T> matmul(const TensorT<T>& a, const TensorT<T>& b) {
    if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(0)) {
        std::ostringstream os;
        os << "matmul: incompatible shapes " << shape_to_string(a.shape())
           << " vs " << shape_to_string(b.shape());
        throw ShapeError(os.str());
    }
    const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
    TensorT<T> out({m, n});
    const T* ap = a.data();
    const T* bp = b.data();
    T* op = out.data();
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            T acc = T(0);
            for (std::size_t t = 0; t < k; ++t) acc += ap[i * k + t] * bp[t * n + j];
            op[i * n + j] = acc;
        }
    }
    return out;
}

template <typename T>
TensorT<T> transpose2d(const TensorT<T>& a) {
    if (a.rank() != 2) {
        throw ShapeError("transpose2d: expected rank 2, got shape " +
                         shape_to_string(a.shape()));
    }
    const std::size_t m = a.dim(0), n = a.dim(1);
    TensorT<T> out({n, m});
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) out[j * m + i] = a[i * n + j];
    return out;
}

template <typename T>
TensorT<T> flip(const TensorT<T>& a, std::size_t axis) {
    if (axis >= a.rank()) {
        std::ostringstream os;
        os << "flip: axis " << axis << " out of range for shape "
           << shape_to_string(a.shape());
        throw ShapeError(os.str());
    }
    TensorT<T> out(a.shape());
    const std::size_t d = a.dim(axis);
    // inner = product of dims after axis, outer = product before
    std::size_t inner = 1;
    for (std::size_t ax = axis + 1; ax < a.rank(); ++ax) inner *= a.dim(ax);
    std::size_t outer = a.size() / (inner * (d == 0 ? 1 : d));
    for (std::size_t o = 0; o < outer; ++o) {
        for (std::size_t i = 0; i < d; ++i) {
            const T* src = a.data() + (o * d + i) * inner;
            T* dst = out.data() + (o * d + (d - 1 - i)) * inner;
            for (std::size_t t = 0; t < inner; ++t) dst[t] = src[t];
        }
    }
    return out;
}

template <typename T>
TensorT<T> pad2d(const TensorT<T>& a, std::size_t amount, T value) {
    if (a.rank() < 2) {
        throw ShapeError("pad2d: need rank >= 2, got shape " +
                         shape_to_string(a.shape()));
    }
    const std::size_t h = a.dim(a.rank() - 2), w = a.dim(a.rank() - 1);
    Shape os = a.shape();
    os[os.size() - 2] = h + 2 * amount;
    os[os.size() - 1] = w + 2 * amount;
    TensorT<T> out(os, value);
    const std::size_t planes = a.size() / (h * w);
    const std::size_t oh = h + 2 * amount, ow = w + 2 * amount;
    for (std::size_t p = 0; p < planes; ++p) {
        const T* src = a.data() + p * h * w;
        T* dst = out.data() + p * oh * ow;
        for (std::size_t y = 0; y < h; ++y) {
            T* row = dst + (y + amount) * ow + amount;
            for (std::size_t x = 0; x < w; ++x) row[x] = src[y * w + x];
        }
    }
    return out;
}

template <typename T>
TensorT<T> crop2d(const TensorT<T>& a, std::size_t amount) {
    if (a.rank() < 2) {
        throw ShapeError("crop2d: need rank >= 2, got shape " +
                         shape_to_string(a.shape()));
    }
    const std::size_t h = a.dim(a.rank() - 2), w = a.dim(a.rank() - 1);
    if (h < 2 * amount || w < 2 * amount) {
        throw ShapeError("crop2d: amount too large for shape " +
                         shape_to_string(a.shape()));
    }
    Shape os = a.shape();
    os[os.size() - 2] = h - 2 * amount;
    os[os.size() - 1] = w - 2 * amount;
    TensorT<T> out(os);
    const std::size_t nh = h - 2 * amount, nw = w - 2 * amount;
    const std::size_t planes = a.size() / (h * w);
    for (std::size_t p = 0; p < planes; ++p) {
        const T* src = a.data() + p * h * w;
        T* dst = out.data() + p * nh * nw;
        for (std::size_t y = 0; y < nh; ++y)
            for (std::size_t x = 0; x < nw; ++x)
                dst[y * nw + x] = src[(y + amount) * w + (x + amount)];
    }
    return out;
}

#define SYMCONV_INSTANTIATE(T)                                   \
    template TensorT<T> add(const TensorT<T>&, const TensorT<T>&); \
    template TensorT<T> sub(const TensorT<T>&, const TensorT<T>&); \
    template TensorT<T> mul(const TensorT<T>&, const TensorT<T>&); \
    template TensorT<T> scale(const TensorT<T>&, T);               \
    template TensorT<T> matmul(const TensorT<T>&, const TensorT<T>&); \
    template TensorT<T> transpose2d(const TensorT<T>&);            \
    template TensorT<T> flip(const TensorT<T>&, std::size_t);      \
    template TensorT<T> pad2d(const TensorT<T>&, std::size_t, T);  \
    template TensorT<T> crop2d(const TensorT<T>&, std::size_t);

SYMCONV_INSTANTIATE(float)
SYMCONV_INSTANTIATE(double)

#undef SYMCONV_INSTANTIATE

}  // namespace symconv
