#include "doctest.h"

#include <array>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "symconv/data.hpp"
#include "symconv/error.hpp"

using namespace symconv;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    TempDir(const std::string& tag) {
        path = fs::temp_directory_path() / ("symconv_" + tag);
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

void write_bytes(const fs::path& p, const std::vector<unsigned char>& bytes) {
    std::ofstream os(p, std::ios::binary);
    os.write(reinterpret_cast<const char*>(bytes.data()),
             static_cast<std::streamsize>(bytes.size()));
}

void be32(std::vector<unsigned char>& out, std::uint32_t v) {
    out.push_back(static_cast<unsigned char>(v >> 24));
    out.push_back(static_cast<unsigned char>(v >> 16));
    out.push_back(static_cast<unsigned char>(v >> 8));
    out.push_back(static_cast<unsigned char>(v));
}

// a 2-image, 3x4 IDX pair in the canonical layout
void write_idx_pair(const fs::path& dir, const std::string& images,
                    const std::string& labels) {
    std::vector<unsigned char> img;
    be32(img, 0x803);
    be32(img, 2);
    be32(img, 3);
    be32(img, 4);
    for (int i = 0; i < 24; ++i) img.push_back(static_cast<unsigned char>(i * 10 % 256));
    write_bytes(dir / images, img);

    std::vector<unsigned char> lab;
    be32(lab, 0x801);
    be32(lab, 2);
    lab.push_back(9);
    lab.push_back(0);
    write_bytes(dir / labels, lab);
}

// one full-size 10000-record batch file; record r has label r % 10 and
// constant pixel value (r * 7 + plane) % 256 per colour plane
std::vector<unsigned char> synth_cifar_batch() {
    std::vector<unsigned char> bytes;
    bytes.reserve(30730000);
    for (int r = 0; r < 10000; ++r) {
        bytes.push_back(static_cast<unsigned char>(r % 10));
        for (int plane = 0; plane < 3; ++plane)
            for (int i = 0; i < 1024; ++i)
                bytes.push_back(static_cast<unsigned char>((r * 7 + plane) % 256));
    }
    return bytes;
}

Dataset tiny_dataset(const std::vector<int>& labels) {
    Dataset d;
    d.name = "synthetic";
    d.split = "train";
    for (std::size_t i = 0; i < labels.size(); ++i) {
        LabeledImage img;
        img.pixels = Tensor({1, 2, 2}, static_cast<float>(i));
        img.label = labels[i];
        d.items.push_back(std::move(img));
    }
    return d;
}

}  // namespace

TEST_SUITE("data") {

TEST_CASE("IDX pair decodes grayscale to [0,1]") {
    TempDir dir("mnist");
    write_idx_pair(dir.path, "train-images-idx3-ubyte", "train-labels-idx1-ubyte");
    // loaders expect both splits present? no - split chooses the file pair
    auto data = load_mnist(dir.path.string(), "train");
    REQUIRE(data.size() == 2);
    CHECK(data.name == "mnist");
    CHECK(data.items[0].label == 9);
    CHECK(data.items[1].label == 0);
    REQUIRE(data.items[0].pixels.shape() == Shape{1, 3, 4});
    CHECK(data.items[0].pixels[0] == 0.0f);
    CHECK(data.items[0].pixels[1] == doctest::Approx(10.0f / 255.0f));
    CHECK(data.items[1].pixels[0] == doctest::Approx(120.0f / 255.0f));
}

TEST_CASE("IDX format errors carry the reason") {
    TempDir dir("mnistbad");
    // wrong image magic
    std::vector<unsigned char> img;
    be32(img, 0x804);
    be32(img, 1);
    be32(img, 2);
    be32(img, 2);
    for (int i = 0; i < 4; ++i) img.push_back(0);
    write_bytes(dir.path / "train-images-idx3-ubyte", img);
    std::vector<unsigned char> lab;
    be32(lab, 0x801);
    be32(lab, 1);
    lab.push_back(1);
    write_bytes(dir.path / "train-labels-idx1-ubyte", lab);
    CHECK_THROWS_AS(load_mnist(dir.path.string(), "train"), FormatError);

    // image/label count mismatch
    img[3] = 0x03;  // fix magic back to 0x803
    write_bytes(dir.path / "train-images-idx3-ubyte", img);
    std::vector<unsigned char> lab2;
    be32(lab2, 0x801);
    be32(lab2, 3);
    lab2.insert(lab2.end(), {1, 2, 3});
    write_bytes(dir.path / "train-labels-idx1-ubyte", lab2);
    CHECK_THROWS_AS(load_mnist(dir.path.string(), "train"), FormatError);

    CHECK_THROWS_AS(load_mnist((dir.path / "missing").string(), "train"), FormatError);
}

TEST_CASE("binary batch decode, raw and normalized") {
    TempDir dir("cifar");
    write_bytes(dir.path / "test_batch.bin", synth_cifar_batch());

    auto raw = load_cifar10(dir.path.string(), "test", /*normalize=*/false);
    REQUIRE(raw.size() == 10000);
    CHECK(raw.items[0].label == 0);
    CHECK(raw.items[123].label == 3);
    REQUIRE(raw.items[0].pixels.shape() == Shape{3, 32, 32});
    // record 5: planes are (35, 36, 37) / 255
    CHECK(raw.items[5].pixels.at(0, 0, 0) == doctest::Approx(35.0f / 255.0f));
    CHECK(raw.items[5].pixels.at(1, 17, 30) == doctest::Approx(36.0f / 255.0f));
    CHECK(raw.items[5].pixels.at(2, 31, 31) == doctest::Approx(37.0f / 255.0f));

    auto norm = load_cifar10(dir.path.string(), "test", /*normalize=*/true);
    float expect = static_cast<float>((35.0 / 255.0 - kCifar10Means[0]) / kCifar10Stds[0]);
    CHECK(norm.items[5].pixels.at(0, 0, 0) == doctest::Approx(expect).epsilon(1e-5));
}

TEST_CASE("binary batch size and label validation") {
    TempDir dir("cifarbad");
    auto bytes = synth_cifar_batch();
    bytes.pop_back();
    write_bytes(dir.path / "test_batch.bin", bytes);
    CHECK_THROWS_AS(load_cifar10(dir.path.string(), "test"), FormatError);

    auto bad = synth_cifar_batch();
    bad[3073 * 42] = 11;  // label byte out of range
    write_bytes(dir.path / "test_batch.bin", bad);
    CHECK_THROWS_AS(load_cifar10(dir.path.string(), "test"), FormatError);
}

TEST_CASE("channel statistics on a synthetic set") {
    Dataset d;
    d.items.resize(2);
    d.items[0].pixels = Tensor::from_values({2, 1, 2}, {0.0f, 1.0f, 4.0f, 4.0f});
    d.items[1].pixels = Tensor::from_values({2, 1, 2}, {1.0f, 2.0f, 4.0f, 4.0f});
    auto stats = compute_channel_stats(d);
    REQUIRE(stats.mean.size() == 2);
    CHECK(stats.mean[0] == doctest::Approx(1.0));
    CHECK(stats.mean[1] == doctest::Approx(4.0));
    CHECK(stats.stddev[0] == doctest::Approx(std::sqrt(0.5)));  // biased
    CHECK(stats.stddev[1] == doctest::Approx(0.0));
}

TEST_CASE("augmentation output is always a padded crop or its mirror") {
    LabeledImage img;
    img.pixels = Tensor({3, 32, 32});
    for (std::size_t i = 0; i < img.pixels.size(); ++i)
        img.pixels[i] = static_cast<float>(i % 97) * 0.01f;
    img.label = 4;

    auto padded = pad2d(
        Tensor::from_values({1, 3, 32, 32},
                            std::vector<float>(img.pixels.data(),
                                               img.pixels.data() + img.pixels.size())),
        4);

    auto matches = [&](const Tensor& out, int offy, int offx, bool flip_w) {
        for (int c = 0; c < 3; ++c)
            for (int y = 0; y < 32; ++y)
                for (int x = 0; x < 32; ++x) {
                    int sx = flip_w ? 31 - x : x;
                    if (out.at(c, y, x) != padded.at(0, c, y + offy, sx + offx))
                        return false;
                }
        return true;
    };

    Rng rng(2024);
    std::map<std::tuple<int, int, bool>, int> hits;
    const int draws = 400;
    for (int t = 0; t < draws; ++t) {
        auto out = augment(img, rng);
        CHECK(out.label == 4);
        REQUIRE(out.pixels.shape() == Shape{3, 32, 32});
        bool found = false;
        for (int offy = 0; offy < 9 && !found; ++offy)
            for (int offx = 0; offx < 9 && !found; ++offx)
                for (int f = 0; f < 2 && !found; ++f)
                    if (matches(out.pixels, offy, offx, f == 1)) {
                        hits[{offy, offx, f == 1}]++;
                        found = true;
                    }
        CHECK(found);
    }
    // the 9x9x2 combinations should all be reachable; with 400 draws we at
    // least see a healthy spread and both mirror states
    CHECK(hits.size() > 60);
    int flipped = 0;
    for (const auto& [key, count] : hits)
        if (std::get<2>(key)) flipped += count;
    CHECK(flipped > draws / 4);
    CHECK(flipped < draws * 3 / 4);

    LabeledImage wrong;
    wrong.pixels = Tensor({1, 28, 28});
    Rng r2(1);
    CHECK_THROWS_AS(augment(wrong, r2), ShapeError);
}

TEST_CASE("subset: deterministic, size-exact, stratified") {
    std::vector<int> labels;
    for (int c = 0; c < 10; ++c)
        for (int i = 0; i < 10; ++i) labels.push_back(c);
    auto data = tiny_dataset(labels);

    auto a = subset(data, 25, 7, /*stratified=*/true);
    auto b = subset(data, 25, 7, /*stratified=*/true);
    REQUIRE(a.size() == 25);
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(a.items[i].label == b.items[i].label);
        CHECK(a.items[i].pixels[0] == b.items[i].pixels[0]);
    }

    // 25 of 100 with equal classes: 2.5 each, ties to lower ids -> 3 for 0-4
    int per_class[10] = {0};
    for (const auto& item : a.items) per_class[item.label]++;
    for (int c = 0; c < 5; ++c) CHECK(per_class[c] == 3);
    for (int c = 5; c < 10; ++c) CHECK(per_class[c] == 2);

    auto c1 = subset(data, 25, 8, true);
    bool differs = false;
    for (std::size_t i = 0; i < a.size(); ++i)
        differs |= (a.items[i].pixels[0] != c1.items[i].pixels[0]);
    CHECK(differs);  // different seed, different sample

    auto plain = subset(data, 30, 7, /*stratified=*/false);
    CHECK(plain.size() == 30);
    CHECK(subset(data, 100, 1, true).size() == 100);
    CHECK_THROWS_AS(subset(data, 101, 1, true), ConfigError);
}

}  // TEST_SUITE
