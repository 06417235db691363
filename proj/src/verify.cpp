#include "symconv/verify.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "symconv/data.hpp"
#include "symconv/error.hpp"
#include "symconv/fastconv.hpp"
#include "symconv/rng.hpp"

namespace symconv {

namespace {

namespace fs = std::filesystem;

double dot_all(const Tensor64& a, const Tensor64& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

Tensor64 random_tensor(const Shape& shape, Rng& rng, double scale) {
    Tensor64 t = Tensor64::zeros(shape);
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = rng.normal() * scale;
    return t;
}

// Transpose the two trailing axes of a rank-4 tensor.
Tensor64 transpose_hw(const Tensor64& a) {
    const std::size_t N = a.shape()[0], C = a.shape()[1], H = a.shape()[2],
                      W = a.shape()[3];
    Tensor64 out = Tensor64::zeros({N, C, W, H});
    for (std::size_t n = 0; n < N; ++n)
        for (std::size_t c = 0; c < C; ++c) {
            const double* src = a.data() + (n * C + c) * H * W;
            double* dst = out.data() + (n * C + c) * H * W;
            for (std::size_t y = 0; y < H; ++y)
                for (std::size_t x = 0; x < W; ++x) dst[x * H + y] = src[y * W + x];
        }
    return out;
}

double max_abs_diff(const Tensor64& a, const Tensor64& b) {
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i)
        m = std::max(m, std::abs(a[i] - b[i]));
    return m;
}

ConstrainedConv2dD random_layer(SymmetryClass cls, int k, int idx, Rng& rng) {
    Conv2dGeometry geom;
    geom.kernel_size = k;
    geom.stride = 1 + idx % 2;
    geom.padding = (idx % 3 != 0) ? k / 2 : 0;
    geom.depthwise = (idx % 4 == 0);
    if (geom.depthwise) {
        geom.in_channels = 3;
        geom.out_channels = 3;
    } else {
        geom.in_channels = 2 + idx % 2;
        geom.out_channels = 3 + idx % 2;
    }
    const bool bias = (idx % 2 == 0);
    ConstrainedConv2dD layer(geom, std::vector<SymmetryClass>(geom.out_channels, cls),
                             bias);
    for (auto& w : layer.free_weights()) w = rng.normal() * 0.5;
    if (bias)
        for (auto& b : layer.bias()) b = rng.normal() * 0.1;
    return layer;
}

}  // namespace

std::vector<CheckResult> verify_gradcheck(int layer_count, std::uint64_t seed) {
    Rng rng = Rng(seed).derive("gradcheck");
    std::vector<CheckResult> results;
    const double h = 1e-6;
    int idx = 0;
    for (int k : {1, 3, 5}) {
        for (SymmetryClass cls : kAllSymmetryClasses) {
            if (idx >= std::max(layer_count, 21)) break;
            ConstrainedConv2dD layer = random_layer(cls, k, idx, rng);
            const auto& geom = layer.geometry();
            Tensor64 x = random_tensor(
                {2, static_cast<std::size_t>(geom.in_channels), 7, 8}, rng, 1.0);
            Tensor64 y0 = layer.forward(x);
            Tensor64 cotangent = random_tensor(y0.shape(), rng, 1.0);
            auto grads = layer.backward(x, cotangent);

            double max_rel = 0.0;
            auto& free = layer.free_weights();
            for (std::size_t i = 0; i < free.size(); ++i) {
                const double keep = free[i];
                free[i] = keep + h;
                const double up = dot_all(layer.forward(x), cotangent);
                free[i] = keep - h;
                const double dn = dot_all(layer.forward(x), cotangent);
                free[i] = keep;
                const double fd = (up - dn) / (2.0 * h);
                const double an = grads.grad_free[i];
                const double rel =
                    std::abs(an - fd) / std::max({std::abs(an), std::abs(fd), 1e-10});
                max_rel = std::max(max_rel, rel);
            }
            if (layer.has_bias()) {
                auto& bias = layer.bias();
                for (std::size_t i = 0; i < bias.size(); ++i) {
                    const double keep = bias[i];
                    bias[i] = keep + h;
                    const double up = dot_all(layer.forward(x), cotangent);
                    bias[i] = keep - h;
                    const double dn = dot_all(layer.forward(x), cotangent);
                    bias[i] = keep;
                    const double fd = (up - dn) / (2.0 * h);
                    const double an = grads.grad_bias[i];
                    const double rel = std::abs(an - fd) /
                                       std::max({std::abs(an), std::abs(fd), 1e-10});
                    max_rel = std::max(max_rel, rel);
                }
            }

            CheckResult r;
            std::ostringstream name;
            name << "gradcheck/" << to_token(cls) << "-k" << k
                 << (geom.depthwise ? "-dw" : "") << "-s" << geom.stride;
            r.name = name.str();
            r.max_error = max_rel;
            r.pass = max_rel < 1e-4;
            results.push_back(std::move(r));
            ++idx;
        }
    }
    return results;
}

std::vector<CheckResult> verify_equivariance(std::uint64_t seed) {
    Rng rng = Rng(seed).derive("equivariance");
    std::vector<CheckResult> results;

    struct Case {
        SymmetryClass cls;
        int k;
    };
    const Case cases[] = {{SymmetryClass::V, 3},    {SymmetryClass::H, 3},
                          {SymmetryClass::D, 3},    {SymmetryClass::HV, 3},
                          {SymmetryClass::HVD, 3},  {SymmetryClass::HVD, 5},
                          {SymmetryClass::AntiHVD, 3}};
    for (const auto& c : cases) {
        Conv2dGeometry geom;
        geom.in_channels = 3;
        geom.out_channels = 4;
        geom.kernel_size = c.k;
        geom.stride = 1;
        geom.padding = c.k / 2;
        ConstrainedConv2dD layer(
            geom, std::vector<SymmetryClass>(geom.out_channels, c.cls), true);
        for (auto& w : layer.free_weights()) w = rng.normal() * 0.5;
        for (auto& b : layer.bias()) b = rng.normal() * 0.1;
        Tensor64 x = random_tensor({2, 3, 9, 9}, rng, 1.0);
        Tensor64 y = layer.forward(x);

        double err = 0.0;
        std::string ops;
        const bool mirror_w = c.cls == SymmetryClass::V || c.cls == SymmetryClass::HV ||
                              c.cls == SymmetryClass::HVD ||
                              c.cls == SymmetryClass::AntiHVD;
        const bool mirror_h = c.cls == SymmetryClass::H || c.cls == SymmetryClass::HV ||
                              c.cls == SymmetryClass::HVD ||
                              c.cls == SymmetryClass::AntiHVD;
        const bool transpose = c.cls == SymmetryClass::D ||
                               c.cls == SymmetryClass::HVD ||
                               c.cls == SymmetryClass::AntiHVD;
        if (mirror_w) {
            err = std::max(err, max_abs_diff(layer.forward(flip(x, 3)), flip(y, 3)));
            ops += "flip_w ";
        }
        if (mirror_h) {
            err = std::max(err, max_abs_diff(layer.forward(flip(x, 2)), flip(y, 2)));
            ops += "flip_h ";
        }
        if (transpose) {
            err = std::max(err,
                           max_abs_diff(layer.forward(transpose_hw(x)), transpose_hw(y)));
            ops += "transpose ";
        }

        CheckResult r;
        r.name = "equivariance/" + std::string(to_token(c.cls)) + "-k" +
                 std::to_string(c.k);
        r.max_error = err;
        r.pass = err < 1e-6;
        r.detail = ops;
        results.push_back(std::move(r));
    }
    return results;
}

std::vector<CheckResult> verify_fastconv(int cases, std::uint64_t seed) {
    Rng rng = Rng(seed).derive("fastconv");
    std::vector<CheckResult> results;
    double worst_dev = 0.0;
    std::string worst_case = "-";
    bool counts_ok = true;
    std::string count_detail;

    for (int i = 0; i < cases; ++i) {
        Conv2dGeometry geom;
        const int ks[] = {1, 3, 5};
        geom.kernel_size = ks[rng.uniform_int(3)];
        geom.stride = 1 + static_cast<int>(rng.uniform_int(2));
        geom.padding = static_cast<int>(rng.uniform_int(geom.kernel_size / 2 + 1));
        geom.depthwise = rng.bernoulli(0.25);
        if (geom.depthwise) {
            geom.in_channels = 1 + static_cast<int>(rng.uniform_int(4));
            geom.out_channels = geom.in_channels;
        } else {
            geom.in_channels = 1 + static_cast<int>(rng.uniform_int(4));
            geom.out_channels = 1 + static_cast<int>(rng.uniform_int(6));
        }
        std::vector<SymmetryClass> mix(geom.out_channels);
        for (auto& m : mix)
            m = kAllSymmetryClasses[rng.uniform_int(std::size(kAllSymmetryClasses))];
        ConstrainedConv2dF layer(geom, mix, rng.bernoulli(0.5));
        for (auto& w : layer.free_weights())
            w = static_cast<float>(rng.normal() * 0.5);
        if (layer.has_bias())
            for (auto& b : layer.bias()) b = static_cast<float>(rng.normal() * 0.1);

        const std::size_t batch = 1 + rng.uniform_int(3);
        const std::size_t hw_min = static_cast<std::size_t>(geom.kernel_size);
        const std::size_t H = hw_min + 4 + rng.uniform_int(3);
        const std::size_t W = hw_min + 4 + rng.uniform_int(3);
        Tensor x = Tensor::zeros({batch, static_cast<std::size_t>(geom.in_channels),
                                  H, W});
        for (std::size_t p = 0; p < x.size(); ++p)
            x[p] = static_cast<float>(rng.normal());

        Tensor naive = layer.forward(x);
        OpCounter counter;
        Tensor fast = fast_forward(layer, x, counter);

        double scale = 0.0, dev = 0.0;
        for (std::size_t p = 0; p < naive.size(); ++p) {
            scale = std::max(scale, static_cast<double>(std::abs(naive[p])));
            dev = std::max(dev,
                           static_cast<double>(std::abs(naive[p] - fast[p])));
        }
        const double rel = dev / std::max(scale, 1e-12);
        if (rel > worst_dev) {
            worst_dev = rel;
            std::ostringstream os;
            os << "case " << i << " k" << geom.kernel_size << " s" << geom.stride
               << (geom.depthwise ? " dw" : "");
            worst_case = os.str();
        }

        const auto out_shape = naive.shape();
        const std::uint64_t predicted =
            multiply_count(layer, static_cast<int>(batch),
                           static_cast<int>(out_shape[2]),
                           static_cast<int>(out_shape[3]));
        if (counter.multiplies != predicted) {
            counts_ok = false;
            std::ostringstream os;
            os << "case " << i << ": counted " << counter.multiplies
               << " multiplies, closed form says " << predicted;
            count_detail = os.str();
        }
    }

    CheckResult equiv;
    equiv.name = "fastconv/forward-equivalence";
    equiv.max_error = worst_dev;
    equiv.pass = worst_dev < 1e-5;
    equiv.detail = "worst: " + worst_case;
    results.push_back(std::move(equiv));

    CheckResult counts;
    counts.name = "fastconv/multiply-counts";
    counts.max_error = counts_ok ? 0.0 : 1.0;
    counts.pass = counts_ok;
    counts.detail = counts_ok ? "counter == closed form on every case" : count_detail;
    results.push_back(std::move(counts));
    return results;
}

namespace {

CheckResult mnist_fixture_check() {
    CheckResult r;
    r.name = "data/mnist-fixture-roundtrip";
    const fs::path dir = fs::temp_directory_path() / "symconv-mnist-fixture";
    fs::create_directories(dir);

    std::vector<unsigned char> pix(28 * 28);
    for (std::size_t i = 0; i < pix.size(); ++i)
        pix[i] = static_cast<unsigned char>(i * 7 % 256);
    {
        std::ofstream im(dir / "train-images-idx3-ubyte", std::ios::binary);
        const unsigned char header[16] = {0, 0, 8, 3, 0, 0, 0, 1,
                                          0, 0, 0, 28, 0, 0, 0, 28};
        im.write(reinterpret_cast<const char*>(header), 16);
        im.write(reinterpret_cast<const char*>(pix.data()),
                 static_cast<std::streamsize>(pix.size()));
        std::ofstream lb(dir / "train-labels-idx1-ubyte", std::ios::binary);
        const unsigned char lheader[8] = {0, 0, 8, 1, 0, 0, 0, 1};
        lb.write(reinterpret_cast<const char*>(lheader), 8);
        const unsigned char label = 5;
        lb.write(reinterpret_cast<const char*>(&label), 1);
    }
    Dataset d = load_mnist(dir.string(), "train");
    double err = 0.0;
    bool ok = d.size() == 1 && d.items[0].label == 5;
    if (ok)
        for (std::size_t i = 0; i < pix.size(); ++i) {
            const float expect = static_cast<float>(pix[i]) / 255.0f;
            err = std::max(err,
                           static_cast<double>(std::abs(d.items[0].pixels[i] - expect)));
            const int rebuilt = static_cast<int>(
                std::lround(d.items[0].pixels[i] * 255.0f));
            if (rebuilt != static_cast<int>(pix[i])) ok = false;
        }
    r.pass = ok && err == 0.0;
    r.max_error = err;
    r.detail = "1-image IDX pair, byte-exact reconstruction";
    fs::remove_all(dir);
    return r;
}

CheckResult cifar_fixture_check() {
    CheckResult r;
    r.name = "data/cifar-fixture-decode";
    const fs::path dir = fs::temp_directory_path() / "symconv-cifar-fixture";
    fs::create_directories(dir);

    constexpr std::size_t kRecord = 3073;
    std::vector<unsigned char> bytes(kRecord * 10000);
    for (std::size_t rec = 0; rec < 10000; ++rec) {
        unsigned char* p = bytes.data() + rec * kRecord;
        p[0] = static_cast<unsigned char>(rec % 10);
        for (std::size_t i = 1; i < kRecord; ++i)
            p[i] = static_cast<unsigned char>((rec + i) % 256);
    }
    // Pin the documented example: record 0 = label 7, every pixel byte 255.
    bytes[0] = 7;
    std::fill(bytes.begin() + 1, bytes.begin() + kRecord,
              static_cast<unsigned char>(255));
    {
        std::ofstream out(dir / "test_batch.bin", std::ios::binary);
        out.write(reinterpret_cast<const char*>(bytes.data()),
                  static_cast<std::streamsize>(bytes.size()));
    }
    Dataset d = load_cifar10(dir.string(), "test", /*normalize=*/false);
    bool ok = d.size() == 10000 && d.items[0].label == 7;
    double err = 0.0;
    for (std::size_t i = 0; i < 3072 && ok; ++i)
        if (d.items[0].pixels[i] != 1.0f) ok = false;
    // Spot-check byte reconstruction on a few records.
    for (std::size_t rec : {1ul, 137ul, 9999ul}) {
        const unsigned char* p = bytes.data() + rec * kRecord;
        for (std::size_t i = 0; i < 3072; ++i) {
            const float v = d.items[rec].pixels[i];
            const int rebuilt = static_cast<int>(std::lround(v * 255.0f));
            if (rebuilt != static_cast<int>(p[1 + i])) {
                ok = false;
                break;
            }
        }
        if (static_cast<int>(p[0]) != d.items[rec].label) ok = false;
    }
    r.pass = ok;
    r.max_error = err;
    r.detail = "synthetic test_batch.bin, label/pixel decode + reconstruction";
    fs::remove_all(dir);
    return r;
}

}  // namespace

std::vector<CheckResult> verify_data(const std::string& data_dir) {
    std::vector<CheckResult> results;
    results.push_back(mnist_fixture_check());
    results.push_back(cifar_fixture_check());

    const fs::path root = data_dir.empty() ? fs::path(".") : fs::path(data_dir);

    CheckResult stats;
    stats.name = "data/cifar-normalization-constants";
    const fs::path cifar_probe = root / "cifar10" / "data_batch_1.bin";
    if (fs::exists(cifar_probe)) {
        Dataset train =
            load_cifar10((root / "cifar10").string(), "train", /*normalize=*/false);
        ChannelStats s = compute_channel_stats(train);
        double err = 0.0;
        for (int c = 0; c < 3; ++c) {
            err = std::max(err, std::abs(s.mean[c] - kCifar10Means[c]));
            err = std::max(err, std::abs(s.stddev[c] - kCifar10Stds[c]));
        }
        stats.max_error = err;
        stats.pass = err <= 0.001;
        std::ostringstream os;
        os << "means " << s.mean[0] << "/" << s.mean[1] << "/" << s.mean[2]
           << " stds " << s.stddev[0] << "/" << s.stddev[1] << "/" << s.stddev[2];
        stats.detail = os.str();
    } else {
        stats.pass = true;
        stats.skipped = true;
        stats.detail = "skipped: " + cifar_probe.string() + " not present";
    }
    results.push_back(std::move(stats));

    CheckResult counts;
    counts.name = "data/mnist-split-sizes";
    const fs::path mnist_probe = root / "mnist" / "train-images-idx3-ubyte";
    if (fs::exists(mnist_probe)) {
        Dataset train = load_mnist((root / "mnist").string(), "train");
        Dataset test = load_mnist((root / "mnist").string(), "test");
        counts.pass = train.size() == 60000 && test.size() == 10000;
        std::ostringstream os;
        os << "train " << train.size() << ", test " << test.size();
        counts.detail = os.str();
    } else {
        counts.pass = true;
        counts.skipped = true;
        counts.detail = "skipped: " + mnist_probe.string() + " not present";
    }
    results.push_back(std::move(counts));
    return results;
}

std::vector<CheckResult> run_verify_suite(const std::string& suite,
                                          const std::string& data_dir,
                                          std::uint64_t seed) {
    std::vector<CheckResult> results;
    const bool all = suite == "all";
    if (all || suite == "gradcheck") {
        auto r = verify_gradcheck(21, seed);
        results.insert(results.end(), r.begin(), r.end());
    }
    if (all || suite == "equivariance") {
        auto r = verify_equivariance(seed);
        results.insert(results.end(), r.begin(), r.end());
    }
    if (all || suite == "fastconv") {
        auto r = verify_fastconv(100, seed);
        results.insert(results.end(), r.begin(), r.end());
    }
    if (all || suite == "data") {
        auto r = verify_data(data_dir);
        results.insert(results.end(), r.begin(), r.end());
    }
    if (results.empty())
        throw ConfigError("unknown verify suite: " + suite +
                          " (choices: gradcheck, equivariance, fastconv, data, all)");
    return results;
}

}  // namespace symconv
