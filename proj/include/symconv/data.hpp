#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "symconv/rng.hpp"
#include "symconv/tensor.hpp"

namespace symconv {

struct LabeledImage {
    Tensor pixels;  // C x H x W, floats
    int label = 0;
};

struct Dataset {
    std::string name;   // "cifar10" or "mnist"
    std::string split;  // "train" or "test"
    int classes = 10;
    std::vector<LabeledImage> items;
    std::size_t size() const { return items.size(); }
};

// Training-split statistics used to normalize decoded pixels. They are
// recomputed from the data by the test suite; a drift beyond 0.001 fails it.
extern const std::array<double, 3> kCifar10Means;
extern const std::array<double, 3> kCifar10Stds;

// Canonical binary batches (data_batch_1..5.bin / test_batch.bin): 3073-byte
// records of one label byte + red, green, blue planes in row-major order.
// Pixels are scaled by 1/255; with normalize, the per-channel constants above
// are then applied.
Dataset load_cifar10(const std::string& dir, const std::string& split,
                     bool normalize = true);

// IDX pairs (train-images-idx3-ubyte & friends), big-endian headers, images
// magic 0x00000803 and labels magic 0x00000801. Grayscale scaled to [0,1].
Dataset load_mnist(const std::string& dir, const std::string& split);

struct ChannelStats {
    std::vector<double> mean;
    std::vector<double> stddev;
};

ChannelStats compute_channel_stats(const Dataset& data);

// Zero-pad 4 on every side, crop back to the original size at an offset drawn
// uniformly from {0..8}^2 (row offset first, then column), then mirror
// horizontally with probability 1/2. Input must be 3x32x32.
LabeledImage augment(const LabeledImage& img, Rng& rng);

// Deterministic sample of n items. Stratified mode keeps class proportions to
// within one item per class (largest remainder, ties to lower class ids).
Dataset subset(const Dataset& data, std::size_t n, std::uint64_t seed,
               bool stratified);

}  // namespace symconv
