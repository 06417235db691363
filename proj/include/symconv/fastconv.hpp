#pragma once

#include <cstdint>

#include "symconv/conv.hpp"

namespace symconv {

// Arithmetic-operation counters for the symmetry-aware convolution path.
// Counters only increase during a run; reset explicitly. Confine a counter
// to one evaluation context; merge per-context counters afterwards if runs
// are ever parallelized.
struct OpCounter {
    std::uint64_t multiplies = 0;
    std::uint64_t adds = 0;
    void reset() { multiplies = 0; adds = 0; }
};

// Multiply-reduced forward pass. Tied input positions are pre-added per
// orbit (sign-aware), then each orbit costs exactly one multiply:
//   for each output position, slice, orbit:
//       s = sum over orbit of sign * window[p]      (orbit_size-1 adds)
//       out += free[orbit] * s                      (1 multiply, 1 add)
// Numerically equivalent to ConstrainedConv2d::forward up to reassociation.
template <typename T>
TensorT<T> fast_forward(const ConstrainedConv2d<T>& layer, const TensorT<T>& x,
                        OpCounter& counter);

// Closed-form multiply count of the fast path for a given output extent:
// sum over filters of free_count * in_slices * out_h * out_w * batch.
std::uint64_t multiply_count(const ConstrainedConv2d<float>& layer, int batch,
                             int out_h, int out_w);
std::uint64_t multiply_count(const ConstrainedConv2d<double>& layer, int batch,
                             int out_h, int out_w);

// Multiplies the naive path spends on the same geometry.
std::uint64_t naive_multiply_count(const Conv2dGeometry& geom, int batch,
                                   int out_h, int out_w);

}  // namespace symconv
