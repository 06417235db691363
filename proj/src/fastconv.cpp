#include "symconv/fastconv.hpp"

#include <vector>

#include "symconv/error.hpp"

namespace symconv {

template <typename T>
TensorT<T> fast_forward(const ConstrainedConv2d<T>& layer, const TensorT<T>& x,
                        OpCounter& counter) {
    const Conv2dGeometry& g = layer.geometry();
    g.validate();
    if (x.rank() != 4 || x.dim(1) != static_cast<std::size_t>(g.in_channels))
        throw ShapeError("fast_forward: expected input [N," +
                         std::to_string(g.in_channels) + ",H,W], got " +
                         shape_to_string(x.shape()));
    const int N = static_cast<int>(x.dim(0));
    const int C = g.in_channels, O = g.out_channels, K = g.kernel_size;
    const int H = static_cast<int>(x.dim(2)), W = static_cast<int>(x.dim(3));
    const int Ho = g.out_size(H), Wo = g.out_size(W);
    if (Ho < 1 || Wo < 1)
        throw ShapeError("fast_forward: input " + shape_to_string(x.shape()) +
                         " too small for the layer geometry");
    const int Hp = H + 2 * g.padding, Wp = W + 2 * g.padding;
    const int s = g.stride;

    TensorT<T> out({static_cast<std::size_t>(N), static_cast<std::size_t>(O),
                    static_cast<std::size_t>(Ho), static_cast<std::size_t>(Wo)});
    TensorT<T> padded = pad2d(x, static_cast<std::size_t>(g.padding));

    for (int n = 0; n < N; ++n) {
        const T* sample = padded.data() + static_cast<std::size_t>(n) * C * Hp * Wp;
        for (int o = 0; o < O; ++o) {
            const TyingMap& map = layer.map_for_filter(o);
            const auto& orbits = map.orbits();
            const int fc = map.free_count();
            const T* free = layer.free_weights().data() + layer.filter_offset(o);
            const T b = layer.has_bias() ? layer.bias()[o] : T(0);
            T* oplane = out.data() + (static_cast<std::size_t>(n) * O + o) * Ho * Wo;
            const int c_begin = g.depthwise ? o : 0;
            const int c_end = g.depthwise ? o + 1 : C;
            for (int y = 0; y < Ho; ++y) {
                for (int xo = 0; xo < Wo; ++xo) {
                    T accum = b;
                    int slice = 0;
                    for (int c = c_begin; c < c_end; ++c, ++slice) {
                        const T* window = sample + static_cast<std::size_t>(c) * Hp * Wp +
                                          static_cast<std::size_t>(y * s) * Wp + xo * s;
                        const T* fslice = free + static_cast<std::size_t>(slice) * fc;
                        for (int oi = 0; oi < fc; ++oi) {
                            const Orbit& orbit = orbits[oi];
                            // pre-add the tied inputs, signs folded into the sum
                            T pre = T(0);
                            for (auto [p, sg] : orbit.members) {
                                const T v = window[(p / K) * Wp + (p % K)];
                                pre += sg > 0 ? v : -v;
                            }
                            counter.adds += static_cast<std::uint64_t>(orbit.size() - 1);
                            accum += fslice[oi] * pre;
                            counter.multiplies += 1;
                            counter.adds += 1;
                        }
                    }
                    oplane[static_cast<std::size_t>(y) * Wo + xo] = accum;
                }
            }
        }
    }
    return out;
}

template TensorT<float> fast_forward(const ConstrainedConv2d<float>&,
                                     const TensorT<float>&, OpCounter&);
template TensorT<double> fast_forward(const ConstrainedConv2d<double>&,
                                      const TensorT<double>&, OpCounter&);

namespace {
template <typename T>
std::uint64_t multiply_count_impl(const ConstrainedConv2d<T>& layer, int batch,
                                  int out_h, int out_w) {
    std::uint64_t per_position = 0;
    for (int f = 0; f < layer.geometry().out_channels; ++f)
        per_position += static_cast<std::uint64_t>(layer.map_for_filter(f).free_count()) *
                        layer.geometry().in_slices();
    return per_position * static_cast<std::uint64_t>(out_h) * out_w * batch;
}
}  // namespace

std::uint64_t multiply_count(const ConstrainedConv2d<float>& layer, int batch,
                             int out_h, int out_w) {
    return multiply_count_impl(layer, batch, out_h, out_w);
}

std::uint64_t multiply_count(const ConstrainedConv2d<double>& layer, int batch,
                             int out_h, int out_w) {
    return multiply_count_impl(layer, batch, out_h, out_w);
}

std::uint64_t naive_multiply_count(const Conv2dGeometry& geom, int batch,
                                   int out_h, int out_w) {
    return static_cast<std::uint64_t>(geom.out_channels) * geom.in_slices() *
           geom.kernel_size * geom.kernel_size * out_h * out_w * batch;
}

}  // namespace symconv
