#include "symconv/conv.hpp"

#include <sstream>

#include "symconv/error.hpp"

namespace symconv {

void Conv2dGeometry::validate() const {
    if (in_channels < 1 || out_channels < 1)
        throw ConfigError("conv geometry: channel counts must be positive");
    if (kernel_size < 1 || kernel_size % 2 == 0)
        throw ConfigError("conv geometry: kernel size must be odd and positive, got " +
                          std::to_string(kernel_size));
    if (stride < 1) throw ConfigError("conv geometry: stride must be >= 1");
    if (padding < 0) throw ConfigError("conv geometry: padding must be >= 0");
    if (depthwise && in_channels != out_channels)
        throw ConfigError("conv geometry: depthwise requires out_channels == in_channels");
}

namespace {

template <typename T>
void check_forward_shapes(const TensorT<T>& x, const TensorT<T>& kernels,
                          const std::vector<T>* bias, const Conv2dGeometry& g) {
    g.validate();
    const std::size_t C = static_cast<std::size_t>(g.in_channels);
    const std::size_t O = static_cast<std::size_t>(g.out_channels);
    const std::size_t S = static_cast<std::size_t>(g.in_slices());
    const std::size_t K = static_cast<std::size_t>(g.kernel_size);
    if (x.rank() != 4 || x.dim(1) != C) {
        std::ostringstream os;
        os << "conv2d: expected input [N," << C << ",H,W], got "
           << shape_to_string(x.shape());
        throw ShapeError(os.str());
    }
    if (kernels.rank() != 4 || kernels.dim(0) != O || kernels.dim(1) != S ||
        kernels.dim(2) != K || kernels.dim(3) != K) {
        std::ostringstream os;
        os << "conv2d: expected kernels [" << O << "," << S << "," << K << "," << K
           << "], got " << shape_to_string(kernels.shape());
        throw ShapeError(os.str());
    }
    if (bias && bias->size() != O) {
        std::ostringstream os;
        os << "conv2d: bias length " << bias->size() << " != out_channels " << O;
        throw ShapeError(os.str());
    }
    const int H = static_cast<int>(x.dim(2)), W = static_cast<int>(x.dim(3));
    if (g.out_size(H) < 1 || g.out_size(W) < 1) {
        std::ostringstream os;
        os << "conv2d: input " << shape_to_string(x.shape())
           << " too small for kernel " << g.kernel_size << " stride " << g.stride
           << " padding " << g.padding;
        throw ShapeError(os.str());
    }
}

// Copies one sample into a zero-padded C x Hp x Wp scratch buffer.
template <typename T>
void fill_padded(const T* x, int C, int H, int W, int pad, T* xp) {
    const int Hp = H + 2 * pad, Wp = W + 2 * pad;
    std::fill(xp, xp + static_cast<std::size_t>(C) * Hp * Wp, T(0));
    for (int c = 0; c < C; ++c) {
        const T* src = x + static_cast<std::size_t>(c) * H * W;
        T* dst = xp + static_cast<std::size_t>(c) * Hp * Wp;
        for (int y = 0; y < H; ++y) {
            T* row = dst + static_cast<std::size_t>(y + pad) * Wp + pad;
            const T* srow = src + static_cast<std::size_t>(y) * W;
            for (int xcol = 0; xcol < W; ++xcol) row[xcol] = srow[xcol];
        }
    }
}

}  // namespace

template <typename T>
TensorT<T> conv2d_forward(const TensorT<T>& x, const TensorT<T>& kernels,
                          const std::vector<T>* bias, const Conv2dGeometry& g) {
    check_forward_shapes(x, kernels, bias, g);
    const int N = static_cast<int>(x.dim(0));
    const int C = g.in_channels, O = g.out_channels, K = g.kernel_size;
    const int H = static_cast<int>(x.dim(2)), W = static_cast<int>(x.dim(3));
    const int Ho = g.out_size(H), Wo = g.out_size(W);
    const int Hp = H + 2 * g.padding, Wp = W + 2 * g.padding;
    const int s = g.stride;
    const int slices = g.in_slices();

    TensorT<T> out({static_cast<std::size_t>(N), static_cast<std::size_t>(O),
                    static_cast<std::size_t>(Ho), static_cast<std::size_t>(Wo)});

    if (K == 1 && g.padding == 0 && s == 1 && !g.depthwise) {
        // pointwise conv: planes are contiguous, so skip the padded scratch
        // and run plane-length accumulations instead of Wo-length segments.
        // Per output element this is the same c-ascending add sequence as the
        // general path, so results match it bit for bit.
        const std::size_t plane = static_cast<std::size_t>(H) * W;
        for (int n = 0; n < N; ++n) {
            const T* xs = x.data() + static_cast<std::size_t>(n) * C * plane;
            for (int o = 0; o < O; ++o) {
                const T* kern = kernels.data() + static_cast<std::size_t>(o) * C;
                const T b = bias ? (*bias)[o] : T(0);
                T* oplane = out.data() + (static_cast<std::size_t>(n) * O + o) * plane;
                for (std::size_t t = 0; t < plane; ++t) oplane[t] = b;
                for (int c = 0; c < C; ++c) {
                    const T w = kern[c];
                    const T* xplane = xs + static_cast<std::size_t>(c) * plane;
                    for (std::size_t t = 0; t < plane; ++t) oplane[t] += w * xplane[t];
                }
            }
        }
        return out;
    }

    std::vector<T> padded(static_cast<std::size_t>(C) * Hp * Wp);

    for (int n = 0; n < N; ++n) {
        fill_padded(x.data() + static_cast<std::size_t>(n) * C * H * W, C, H, W,
                    g.padding, padded.data());
        for (int o = 0; o < O; ++o) {
            const T* kern = kernels.data() + static_cast<std::size_t>(o) * slices * K * K;
            const T b = bias ? (*bias)[o] : T(0);
            T* oplane = out.data() +
                        (static_cast<std::size_t>(n) * O + o) * Ho * Wo;
            for (int y = 0; y < Ho; ++y) {
                T* orow = oplane + static_cast<std::size_t>(y) * Wo;
                for (int xo = 0; xo < Wo; ++xo) orow[xo] = b;
                const int c_begin = g.depthwise ? o : 0;
                const int c_end = g.depthwise ? o + 1 : C;
                for (int c = c_begin; c < c_end; ++c) {
                    const T* kslice = kern + static_cast<std::size_t>(g.depthwise ? 0 : c) * K * K;
                    const T* cplane = padded.data() + static_cast<std::size_t>(c) * Hp * Wp;
                    for (int i = 0; i < K; ++i) {
                        const T* xrow = cplane + static_cast<std::size_t>(y * s + i) * Wp;
                        for (int j = 0; j < K; ++j) {
                            const T w = kslice[i * K + j];
                            if (s == 1) {
                                const T* xr = xrow + j;
                                for (int xo = 0; xo < Wo; ++xo) orow[xo] += w * xr[xo];
                            } else {
                                for (int xo = 0; xo < Wo; ++xo)
                                    orow[xo] += w * xrow[xo * s + j];
                            }
                        }
                    }
                }
            }
        }
    }
    return out;
}

template <typename T>
Conv2dGrads<T> conv2d_backward(const TensorT<T>& x, const TensorT<T>& kernels,
                               const TensorT<T>& grad_out,
                               const Conv2dGeometry& g, bool has_bias) {
    check_forward_shapes<T>(x, kernels, nullptr, g);
    const int N = static_cast<int>(x.dim(0));
    const int C = g.in_channels, O = g.out_channels, K = g.kernel_size;
    const int H = static_cast<int>(x.dim(2)), W = static_cast<int>(x.dim(3));
    const int Ho = g.out_size(H), Wo = g.out_size(W);
    if (grad_out.rank() != 4 || grad_out.dim(0) != static_cast<std::size_t>(N) ||
        grad_out.dim(1) != static_cast<std::size_t>(O) ||
        grad_out.dim(2) != static_cast<std::size_t>(Ho) ||
        grad_out.dim(3) != static_cast<std::size_t>(Wo)) {
        std::ostringstream os;
        os << "conv2d_backward: expected grad_out [" << N << "," << O << "," << Ho
           << "," << Wo << "], got " << shape_to_string(grad_out.shape());
        throw ShapeError(os.str());
    }
    const int Hp = H + 2 * g.padding, Wp = W + 2 * g.padding;
    const int s = g.stride;
    const int slices = g.in_slices();

    Conv2dGrads<T> grads;
    grads.grad_x = TensorT<T>(x.shape());
    grads.grad_kernels = TensorT<T>(kernels.shape());
    if (has_bias) grads.grad_bias.assign(static_cast<std::size_t>(O), T(0));

    if (K == 1 && g.padding == 0 && s == 1 && !g.depthwise) {
        // pointwise fast path, mirroring the forward one. The weight gradient
        // keeps the per-row partial sums of the general path below so the two
        // agree bit for bit.
        const std::size_t plane = static_cast<std::size_t>(H) * W;
        for (int n = 0; n < N; ++n) {
            const T* xs = x.data() + static_cast<std::size_t>(n) * C * plane;
            T* gxs = grads.grad_x.data() + static_cast<std::size_t>(n) * C * plane;
            for (int o = 0; o < O; ++o) {
                const T* gplane = grad_out.data() +
                                  (static_cast<std::size_t>(n) * O + o) * plane;
                const T* kern = kernels.data() + static_cast<std::size_t>(o) * C;
                T* gkern = grads.grad_kernels.data() + static_cast<std::size_t>(o) * C;
                for (int c = 0; c < C; ++c) {
                    const T* xplane = xs + static_cast<std::size_t>(c) * plane;
                    T accw = T(0);
                    for (int y = 0; y < H; ++y) {
                        const T* grow = gplane + static_cast<std::size_t>(y) * W;
                        const T* xrow = xplane + static_cast<std::size_t>(y) * W;
                        T a = T(0);
                        for (int xo = 0; xo < W; ++xo) a += grow[xo] * xrow[xo];
                        accw += a;
                    }
                    gkern[c] += accw;
                    const T w = kern[c];
                    T* gxplane = gxs + static_cast<std::size_t>(c) * plane;
                    for (std::size_t t = 0; t < plane; ++t) gxplane[t] += w * gplane[t];
                }
            }
        }
        if (has_bias) {
            for (int o = 0; o < O; ++o) {
                T acc_b = T(0);
                for (int n = 0; n < N; ++n) {
                    const T* gplane = grad_out.data() +
                                      (static_cast<std::size_t>(n) * O + o) * plane;
                    for (std::size_t t = 0; t < plane; ++t) acc_b += gplane[t];
                }
                grads.grad_bias[o] = acc_b;
            }
        }
        return grads;
    }

    std::vector<T> padded(static_cast<std::size_t>(C) * Hp * Wp);
    std::vector<T> gpadded(static_cast<std::size_t>(C) * Hp * Wp);
    std::vector<T> acc(static_cast<std::size_t>(K));

    for (int n = 0; n < N; ++n) {
        fill_padded(x.data() + static_cast<std::size_t>(n) * C * H * W, C, H, W,
                    g.padding, padded.data());
        std::fill(gpadded.begin(), gpadded.end(), T(0));
        for (int o = 0; o < O; ++o) {
            const T* gplane = grad_out.data() +
                              (static_cast<std::size_t>(n) * O + o) * Ho * Wo;
            const int c_begin = g.depthwise ? o : 0;
            const int c_end = g.depthwise ? o + 1 : C;
            for (int c = c_begin; c < c_end; ++c) {
                const std::size_t kbase =
                    (static_cast<std::size_t>(o) * slices + (g.depthwise ? 0 : c)) * K * K;
                const T* kslice = kernels.data() + kbase;
                T* gkslice = grads.grad_kernels.data() + kbase;
                const T* cplane = padded.data() + static_cast<std::size_t>(c) * Hp * Wp;
                T* gcplane = gpadded.data() + static_cast<std::size_t>(c) * Hp * Wp;
                for (int i = 0; i < K; ++i) {
                    // weight gradient: per (i,j) accumulator, contributions
                    // summed over y then x within the sample
                    for (int j = 0; j < K; ++j) acc[j] = T(0);
                    for (int y = 0; y < Ho; ++y) {
                        const T* grow = gplane + static_cast<std::size_t>(y) * Wo;
                        const T* xrow = cplane + static_cast<std::size_t>(y * s + i) * Wp;
                        for (int j = 0; j < K; ++j) {
                            T a = T(0);
                            if (s == 1) {
                                const T* xr = xrow + j;
                                for (int xo = 0; xo < Wo; ++xo) a += grow[xo] * xr[xo];
                            } else {
                                for (int xo = 0; xo < Wo; ++xo)
                                    a += grow[xo] * xrow[xo * s + j];
                            }
                            acc[j] += a;
                        }
                    }
                    for (int j = 0; j < K; ++j) gkslice[i * K + j] += acc[j];
                    // input gradient: scatter into the padded buffer
                    for (int y = 0; y < Ho; ++y) {
                        const T* grow = gplane + static_cast<std::size_t>(y) * Wo;
                        T* gxrow = gcplane + static_cast<std::size_t>(y * s + i) * Wp;
                        for (int j = 0; j < K; ++j) {
                            const T w = kslice[i * K + j];
                            if (s == 1) {
                                T* gxr = gxrow + j;
                                for (int xo = 0; xo < Wo; ++xo) gxr[xo] += w * grow[xo];
                            } else {
                                for (int xo = 0; xo < Wo; ++xo)
                                    gxrow[xo * s + j] += w * grow[xo];
                            }
                        }
                    }
                }
            }
        }
        // crop padding off the scattered input gradient
        T* gx = grads.grad_x.data() + static_cast<std::size_t>(n) * C * H * W;
        for (int c = 0; c < C; ++c) {
            const T* src = gpadded.data() + static_cast<std::size_t>(c) * Hp * Wp;
            T* dst = gx + static_cast<std::size_t>(c) * H * W;
            for (int y = 0; y < H; ++y) {
                const T* srow = src + static_cast<std::size_t>(y + g.padding) * Wp + g.padding;
                T* drow = dst + static_cast<std::size_t>(y) * W;
                for (int xcol = 0; xcol < W; ++xcol) drow[xcol] = srow[xcol];
            }
        }
    }

    if (has_bias) {
        for (int o = 0; o < O; ++o) {
            T acc_b = T(0);
            for (int n = 0; n < N; ++n) {
                const T* gplane = grad_out.data() +
                                  (static_cast<std::size_t>(n) * O + o) * Ho * Wo;
                for (int t = 0; t < Ho * Wo; ++t) acc_b += gplane[t];
            }
            grads.grad_bias[o] = acc_b;
        }
    }
    return grads;
}

template <typename T>
ConstrainedConv2d<T>::ConstrainedConv2d(Conv2dGeometry geom,
                                        std::vector<SymmetryClass> assignments,
                                        bool with_bias)
    : geom_(geom), assignments_(std::move(assignments)) {
    geom_.validate();
    if (assignments_.size() != static_cast<std::size_t>(geom_.out_channels)) {
        std::ostringstream os;
        os << "constrained conv: " << assignments_.size() << " class assignments for "
           << geom_.out_channels << " filters";
        throw ConfigError(os.str());
    }
    map_index_.reserve(assignments_.size());
    for (SymmetryClass c : assignments_) {
        int idx = -1;
        for (std::size_t m = 0; m < maps_.size(); ++m)
            if (maps_[m].symmetry_class() == c) { idx = static_cast<int>(m); break; }
        if (idx < 0) {
            maps_.emplace_back(c, geom_.kernel_size);
            idx = static_cast<int>(maps_.size()) - 1;
        }
        map_index_.push_back(idx);
    }
    filter_offset_.assign(assignments_.size() + 1, 0);
    for (std::size_t f = 0; f < assignments_.size(); ++f) {
        filter_offset_[f + 1] =
            filter_offset_[f] +
            static_cast<std::size_t>(maps_[map_index_[f]].free_count()) * geom_.in_slices();
    }
    free_.assign(filter_offset_.back(), T(0));
    if (with_bias) bias_.emplace(static_cast<std::size_t>(geom_.out_channels), T(0));
}

template <typename T>
TensorT<T> ConstrainedConv2d<T>::expand_kernels() const {
    const std::size_t O = static_cast<std::size_t>(geom_.out_channels);
    const std::size_t S = static_cast<std::size_t>(geom_.in_slices());
    const std::size_t K = static_cast<std::size_t>(geom_.kernel_size);
    TensorT<T> kernels({O, S, K, K});
    for (std::size_t f = 0; f < O; ++f) {
        const TyingMap& map = maps_[map_index_[f]];
        const int fc = map.free_count();
        for (std::size_t sl = 0; sl < S; ++sl) {
            map.expand_into(free_.data() + filter_offset_[f] + sl * fc,
                            kernels.data() + (f * S + sl) * K * K);
        }
    }
    return kernels;
}

template <typename T>
TensorT<T> ConstrainedConv2d<T>::forward(const TensorT<T>& x) const {
    const TensorT<T> kernels = expand_kernels();
    return conv2d_forward(x, kernels, bias_ ? &*bias_ : nullptr, geom_);
}

template <typename T>
typename ConstrainedConv2d<T>::Grads ConstrainedConv2d<T>::backward(
    const TensorT<T>& x, const TensorT<T>& grad_out) const {
    const TensorT<T> kernels = expand_kernels();
    Conv2dGrads<T> kg = conv2d_backward(x, kernels, grad_out, geom_, has_bias());
    Grads out;
    out.grad_x = std::move(kg.grad_x);
    out.grad_bias = std::move(kg.grad_bias);
    out.grad_free.assign(free_.size(), T(0));
    const std::size_t S = static_cast<std::size_t>(geom_.in_slices());
    const std::size_t K = static_cast<std::size_t>(geom_.kernel_size);
    for (std::size_t f = 0; f < assignments_.size(); ++f) {
        const TyingMap& map = maps_[map_index_[f]];
        const int fc = map.free_count();
        for (std::size_t sl = 0; sl < S; ++sl) {
            map.fold_gradient_into(kg.grad_kernels.data() + (f * S + sl) * K * K,
                                   out.grad_free.data() + filter_offset_[f] + sl * fc);
        }
    }
    return out;
}

template <typename T>
LayerParamCount ConstrainedConv2d<T>::count_params() const {
    LayerParamCount c;
    const long long S = geom_.in_slices();
    const long long K = geom_.kernel_size;
    for (std::size_t f = 0; f < assignments_.size(); ++f)
        c.free_weights += static_cast<long long>(maps_[map_index_[f]].free_count()) * S;
    c.standard_weights = static_cast<long long>(geom_.out_channels) * S * K * K;
    c.bias_params = has_bias() ? geom_.out_channels : 0;
    return c;
}

#define SYMCONV_INSTANTIATE_CONV(T)                                              \
    template TensorT<T> conv2d_forward(const TensorT<T>&, const TensorT<T>&,     \
                                       const std::vector<T>*, const Conv2dGeometry&); \
    template Conv2dGrads<T> conv2d_backward(const TensorT<T>&, const TensorT<T>&, \
                                            const TensorT<T>&, const Conv2dGeometry&, \
                                            bool);                               \
    template class ConstrainedConv2d<T>;

SYMCONV_INSTANTIATE_CONV(float)
SYMCONV_INSTANTIATE_CONV(double)

#undef SYMCONV_INSTANTIATE_CONV

}  // namespace symconv
