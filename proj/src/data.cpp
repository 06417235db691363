#include "symconv/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>

#include "symconv/error.hpp"

namespace symconv {

const std::array<double, 3> kCifar10Means = {0.4914, 0.4822, 0.4465};
const std::array<double, 3> kCifar10Stds = {0.2470, 0.2435, 0.2616};

namespace {

std::vector<unsigned char> read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("cannot open data file: " + path);
    std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                     std::istreambuf_iterator<char>());
    return bytes;
}

constexpr std::size_t kCifarRecord = 3073;  // label byte + 3*1024 pixels
constexpr std::size_t kCifarRecordsPerFile = 10000;

void decode_cifar_file(const std::string& path, bool normalize, Dataset& out) {
    auto bytes = read_file(path);
    const std::size_t expected = kCifarRecord * kCifarRecordsPerFile;
    if (bytes.size() != expected) {
        std::ostringstream os;
        os << path << " has " << bytes.size() << " bytes, expected " << expected;
        throw FormatError(os.str());
    }
    for (std::size_t r = 0; r < kCifarRecordsPerFile; ++r) {
        const unsigned char* rec = bytes.data() + r * kCifarRecord;
        if (rec[0] > 9) {
            std::ostringstream os;
            os << "corrupt record " << r << " in " << path << ": label byte "
               << static_cast<int>(rec[0]);
            throw FormatError(os.str());
        }
        LabeledImage img;
        img.label = rec[0];
        img.pixels = Tensor::zeros({3, 32, 32});
        for (int c = 0; c < 3; ++c) {
            const float mean = normalize ? static_cast<float>(kCifar10Means[c]) : 0.0f;
            const float inv_std =
                normalize ? 1.0f / static_cast<float>(kCifar10Stds[c]) : 1.0f;
            const unsigned char* plane = rec + 1 + c * 1024;
            float* dst = img.pixels.data() + c * 1024;
            for (int i = 0; i < 1024; ++i)
                dst[i] = (static_cast<float>(plane[i]) / 255.0f - mean) * inv_std;
        }
        out.items.push_back(std::move(img));
    }
}

std::uint32_t read_be32(const unsigned char* p) {
    return (static_cast<std::uint32_t>(p[0]) << 24) |
           (static_cast<std::uint32_t>(p[1]) << 16) |
           (static_cast<std::uint32_t>(p[2]) << 8) | static_cast<std::uint32_t>(p[3]);
}

constexpr std::uint32_t kIdxImagesMagic = 0x00000803;
constexpr std::uint32_t kIdxLabelsMagic = 0x00000801;

void check_magic(std::uint32_t got, std::uint32_t want, const std::string& path) {
    if (got != want) {
        char buf[160];
        std::snprintf(buf, sizeof buf, "%s: magic 0x%08x, expected 0x%08x",
                      path.c_str(), got, want);
        throw FormatError(buf);
    }
}

}  // namespace

Dataset load_cifar10(const std::string& dir, const std::string& split,
                     bool normalize) {
    Dataset out;
    out.name = "cifar10";
    out.split = split;
    out.classes = 10;
    if (split == "train") {
        for (int i = 1; i <= 5; ++i)
            decode_cifar_file(dir + "/data_batch_" + std::to_string(i) + ".bin",
                              normalize, out);
    } else if (split == "test") {
        decode_cifar_file(dir + "/test_batch.bin", normalize, out);
    } else {
        throw ConfigError("unknown split: " + split + " (choices: train, test)");
    }
    return out;
}

Dataset load_mnist(const std::string& dir, const std::string& split) {
    std::string images_path, labels_path;
    if (split == "train") {
        images_path = dir + "/train-images-idx3-ubyte";
        labels_path = dir + "/train-labels-idx1-ubyte";
    } else if (split == "test") {
        images_path = dir + "/t10k-images-idx3-ubyte";
        labels_path = dir + "/t10k-labels-idx1-ubyte";
    } else {
        throw ConfigError("unknown split: " + split + " (choices: train, test)");
    }
    auto ibytes = read_file(images_path);
    auto lbytes = read_file(labels_path);
    if (ibytes.size() < 16)
        throw FormatError(images_path + " is too short for an image header");
    if (lbytes.size() < 8)
        throw FormatError(labels_path + " is too short for a label header");
    check_magic(read_be32(ibytes.data()), kIdxImagesMagic, images_path);
    check_magic(read_be32(lbytes.data()), kIdxLabelsMagic, labels_path);
    const std::uint32_t n_images = read_be32(ibytes.data() + 4);
    const std::uint32_t rows = read_be32(ibytes.data() + 8);
    const std::uint32_t cols = read_be32(ibytes.data() + 12);
    const std::uint32_t n_labels = read_be32(lbytes.data() + 4);
    if (n_images != n_labels) {
        std::ostringstream os;
        os << "image/label count mismatch: " << n_images << " vs " << n_labels;
        throw FormatError(os.str());
    }
    const std::size_t pixels = static_cast<std::size_t>(rows) * cols;
    if (ibytes.size() != 16 + static_cast<std::size_t>(n_images) * pixels) {
        std::ostringstream os;
        os << images_path << " has " << ibytes.size() << " bytes, expected "
           << 16 + static_cast<std::size_t>(n_images) * pixels;
        throw FormatError(os.str());
    }
    if (lbytes.size() != 8 + static_cast<std::size_t>(n_labels)) {
        std::ostringstream os;
        os << labels_path << " has " << lbytes.size() << " bytes, expected "
           << 8 + static_cast<std::size_t>(n_labels);
        throw FormatError(os.str());
    }

    Dataset out;
    out.name = "mnist";
    out.split = split;
    out.classes = 10;
    out.items.reserve(n_images);
    for (std::uint32_t i = 0; i < n_images; ++i) {
        if (lbytes[8 + i] > 9) {
            std::ostringstream os;
            os << "corrupt record " << i << " in " << labels_path << ": label byte "
               << static_cast<int>(lbytes[8 + i]);
            throw FormatError(os.str());
        }
        LabeledImage img;
        img.label = lbytes[8 + i];
        img.pixels = Tensor::zeros({1, rows, cols});
        const unsigned char* src = ibytes.data() + 16 + i * pixels;
        for (std::size_t p = 0; p < pixels; ++p)
            img.pixels[p] = static_cast<float>(src[p]) / 255.0f;
        out.items.push_back(std::move(img));
    }
    return out;
}

ChannelStats compute_channel_stats(const Dataset& data) {
    if (data.items.empty()) throw ConfigError("cannot take stats of an empty dataset");
    const auto& shape = data.items.front().pixels.shape();
    const std::size_t C = shape[0], plane = shape[1] * shape[2];
    ChannelStats stats;
    stats.mean.assign(C, 0.0);
    stats.stddev.assign(C, 0.0);
    const double count = static_cast<double>(data.items.size() * plane);
    for (const auto& img : data.items)
        for (std::size_t c = 0; c < C; ++c) {
            const float* p = img.pixels.data() + c * plane;
            double sum = 0.0;
            for (std::size_t i = 0; i < plane; ++i) sum += p[i];
            stats.mean[c] += sum;
        }
    for (std::size_t c = 0; c < C; ++c) stats.mean[c] /= count;
    for (const auto& img : data.items)
        for (std::size_t c = 0; c < C; ++c) {
            const float* p = img.pixels.data() + c * plane;
            double sq = 0.0;
            for (std::size_t i = 0; i < plane; ++i) {
                double d = p[i] - stats.mean[c];
                sq += d * d;
            }
            stats.stddev[c] += sq;
        }
    for (std::size_t c = 0; c < C; ++c) stats.stddev[c] = std::sqrt(stats.stddev[c] / count);
    return stats;
}

LabeledImage augment(const LabeledImage& img, Rng& rng) {
    const auto& s = img.pixels.shape();
    if (s.size() != 3 || s[0] != 3 || s[1] != 32 || s[2] != 32)
        throw ShapeError("augment expects 3x32x32 input");
    constexpr std::size_t kPad = 4;
    Tensor padded = pad2d(img.pixels, kPad);
    const std::size_t offy = rng.uniform_int(2 * kPad + 1);
    const std::size_t offx = rng.uniform_int(2 * kPad + 1);
    const bool do_flip = rng.bernoulli(0.5);

    LabeledImage out;
    out.label = img.label;
    out.pixels = Tensor::zeros(s);
    const std::size_t pw = s[2] + 2 * kPad;
    for (std::size_t c = 0; c < s[0]; ++c)
        for (std::size_t y = 0; y < s[1]; ++y) {
            const float* src = padded.data() + (c * (s[1] + 2 * kPad) + y + offy) * pw + offx;
            float* dst = out.pixels.data() + (c * s[1] + y) * s[2];
            std::copy(src, src + s[2], dst);
        }
    if (do_flip) out.pixels = flip(out.pixels, 2);
    return out;
}

Dataset subset(const Dataset& data, std::size_t n, std::uint64_t seed,
               bool stratified) {
    if (n > data.size())
        throw ConfigError("subset of " + std::to_string(n) + " from " +
                          std::to_string(data.size()) + " items");
    Rng rng(seed);
    auto shuffle_indices = [&rng](std::vector<std::size_t>& ix) {
        for (std::size_t i = ix.size(); i > 1; --i)
            std::swap(ix[i - 1], ix[rng.uniform_int(i)]);
    };

    std::vector<std::size_t> picked;
    if (!stratified) {
        std::vector<std::size_t> ix(data.size());
        std::iota(ix.begin(), ix.end(), 0);
        shuffle_indices(ix);
        picked.assign(ix.begin(), ix.begin() + n);
    } else {
        std::vector<std::vector<std::size_t>> by_class(data.classes);
        for (std::size_t i = 0; i < data.size(); ++i)
            by_class[data.items[i].label].push_back(i);
        // Largest-remainder split of n across classes, ties to lower ids.
        std::vector<std::size_t> take(data.classes, 0);
        std::vector<double> rem(data.classes, 0.0);
        std::size_t assigned = 0;
        for (int c = 0; c < data.classes; ++c) {
            double exact = static_cast<double>(n) * by_class[c].size() / data.size();
            take[c] = static_cast<std::size_t>(exact);
            rem[c] = exact - static_cast<double>(take[c]);
            assigned += take[c];
        }
        std::vector<int> order(data.classes);
        std::iota(order.begin(), order.end(), 0);
        std::stable_sort(order.begin(), order.end(),
                         [&](int a, int b) { return rem[a] > rem[b]; });
        for (std::size_t i = 0; i < n - assigned; ++i) take[order[i]] += 1;
        for (int c = 0; c < data.classes; ++c) {
            if (take[c] > by_class[c].size())
                throw ConfigError("class " + std::to_string(c) +
                                  " has too few items for a stratified subset");
            shuffle_indices(by_class[c]);
            picked.insert(picked.end(), by_class[c].begin(),
                          by_class[c].begin() + take[c]);
        }
        shuffle_indices(picked);
    }

    Dataset out;
    out.name = data.name;
    out.split = data.split;
    out.classes = data.classes;
    out.items.reserve(n);
    for (std::size_t i : picked) out.items.push_back(data.items[i]);
    return out;
}

}  // namespace symconv
