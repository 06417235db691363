#pragma once

#include <optional>
#include <vector>

#include "symconv/symmetry.hpp"
#include "symconv/tensor.hpp"

namespace symconv {

struct Conv2dGeometry {
    int in_channels = 1;
    int out_channels = 1;
    int kernel_size = 3;  // odd
    int stride = 1;
    int padding = 0;
    bool depthwise = false;

    // Kernel slices per filter: depthwise filters see one input channel.
    int in_slices() const { return depthwise ? 1 : in_channels; }

    int out_size(int in_size) const {
        return (in_size + 2 * padding - kernel_size) / stride + 1;
    }

    void validate() const;
};

// Convolution as cross-correlation (no kernel flip), zero padding:
//   out[n,o,y,x] = bias[o] + sum_{c,i,j} kernels[o,c,i,j]
//                                        * padded_x[n,c,y*stride+i,x*stride+j]
// Accumulation order per output element is c outer, then i, then j.
template <typename T>
TensorT<T> conv2d_forward(const TensorT<T>& x, const TensorT<T>& kernels,
                          const std::vector<T>* bias, const Conv2dGeometry& geom);

template <typename T>
struct Conv2dGrads {
    TensorT<T> grad_x;
    TensorT<T> grad_kernels;
    std::vector<T> grad_bias;  // empty when the layer has no bias
};

template <typename T>
Conv2dGrads<T> conv2d_backward(const TensorT<T>& x, const TensorT<T>& kernels,
                               const TensorT<T>& grad_out,
                               const Conv2dGeometry& geom, bool has_bias);

// Per-layer parameter accounting. Ratios are weight-only; bias is reported
// separately and only enters whole-model totals.
struct LayerParamCount {
    long long free_weights = 0;
    long long standard_weights = 0;
    long long bias_params = 0;
    double weight_ratio() const {
        return static_cast<double>(free_weights) / static_cast<double>(standard_weights);
    }
};

// A convolution layer that stores only free coefficients. Every k x k slice
// of a filter obeys the filter's symmetry class independently; gradients are
// folded back through the tying map, so tied positions are never trained.
template <typename T>
class ConstrainedConv2d {
public:
    ConstrainedConv2d(Conv2dGeometry geom, std::vector<SymmetryClass> assignments,
                      bool with_bias);

    const Conv2dGeometry& geometry() const { return geom_; }
    const std::vector<SymmetryClass>& assignments() const { return assignments_; }
    const TyingMap& map_for_filter(int f) const { return maps_[map_index_[f]]; }

    bool has_bias() const { return bias_.has_value(); }
    std::vector<T>& bias() { return *bias_; }
    const std::vector<T>& bias() const { return *bias_; }

    // Flat free-coefficient storage: filters in order, each filter holding
    // in_slices() consecutive blocks of free_count coefficients in orbit
    // order.
    std::vector<T>& free_weights() { return free_; }
    const std::vector<T>& free_weights() const { return free_; }
    std::size_t filter_offset(int f) const { return filter_offset_[f]; }
    int filter_free_count(int f) const { return map_for_filter(f).free_count(); }

    TensorT<T> expand_kernels() const;

    TensorT<T> forward(const TensorT<T>& x) const;

    struct Grads {
        TensorT<T> grad_x;
        std::vector<T> grad_free;  // aligned with free_weights()
        std::vector<T> grad_bias;
    };
    Grads backward(const TensorT<T>& x, const TensorT<T>& grad_out) const;

    LayerParamCount count_params() const;

private:
    Conv2dGeometry geom_;
    std::vector<SymmetryClass> assignments_;
    std::vector<TyingMap> maps_;       // one per distinct class in the layer
    std::vector<int> map_index_;       // filter -> index into maps_
    std::vector<std::size_t> filter_offset_;  // size out_channels+1
    std::vector<T> free_;
    std::optional<std::vector<T>> bias_;
};

template <typename T>
LayerParamCount count_layer_params(const ConstrainedConv2d<T>& layer) {
    return layer.count_params();
}

using ConstrainedConv2dF = ConstrainedConv2d<float>;
using ConstrainedConv2dD = ConstrainedConv2d<double>;

}  // namespace symconv
