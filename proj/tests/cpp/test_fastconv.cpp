#include "doctest.h"

#include <cmath>
#include <vector>

#include "symconv/fastconv.hpp"
#include "symconv/rng.hpp"

using namespace symconv;

namespace {

Tensor randn(Shape shape, Rng& rng) {
    Tensor t(std::move(shape));
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = static_cast<float>(rng.normal());
    return t;
}

ConstrainedConv2dF make_layer(const Conv2dGeometry& g,
                              std::vector<SymmetryClass> classes, Rng& rng) {
    ConstrainedConv2dF layer(g, std::move(classes), false);
    for (auto& w : layer.free_weights()) w = static_cast<float>(rng.normal());
    return layer;
}

float max_rel_dev(const Tensor& a, const Tensor& b) {
    float scale = 0.0f, dev = 0.0f;
    for (std::size_t i = 0; i < a.size(); ++i) scale = std::max(scale, std::abs(a[i]));
    for (std::size_t i = 0; i < a.size(); ++i) dev = std::max(dev, std::abs(a[i] - b[i]));
    return dev / std::max(scale, 1e-12f);
}

}  // namespace

TEST_SUITE("fastconv") {

TEST_CASE("aggregation path matches the direct convolution") {
    Rng rng(2020);
    Conv2dGeometry g{3, 6, 3, 1, 1, false};
    std::vector<SymmetryClass> classes = {
        SymmetryClass::Standard, SymmetryClass::V,   SymmetryClass::H,
        SymmetryClass::D,        SymmetryClass::HVD, SymmetryClass::AntiHVD};
    auto layer = make_layer(g, classes, rng);
    auto x = randn({2, 3, 8, 8}, rng);

    auto naive = layer.forward(x);
    OpCounter counter;
    auto fast = fast_forward(layer, x, counter);
    REQUIRE(fast.shape() == naive.shape());
    CHECK(max_rel_dev(naive, fast) < 1e-5f);
}

TEST_CASE("full-group 3x3 filters need three multiplies per output per slice") {
    Rng rng(11);
    Conv2dGeometry g{1, 1, 3, 1, 0, false};
    auto layer = make_layer(g, {SymmetryClass::HVD}, rng);
    auto x = randn({1, 1, 3, 3}, rng);  // exactly one output element

    OpCounter counter;
    fast_forward(layer, x, counter);
    CHECK(counter.multiplies == 3);

    // and 9 on the unconstrained path
    auto plain = make_layer(g, {SymmetryClass::Standard}, rng);
    counter.reset();
    fast_forward(plain, x, counter);
    CHECK(counter.multiplies == 9);
}

TEST_CASE("instrumented counts equal the closed form") {
    Rng rng(31337);
    struct Case {
        Conv2dGeometry g;
        std::vector<SymmetryClass> classes;
        int h, w;
    };
    std::vector<Case> cases = {
        {{3, 4, 3, 1, 1, false},
         {SymmetryClass::V, SymmetryClass::HVD, SymmetryClass::AntiHVD, SymmetryClass::HV},
         9, 9},
        {{2, 5, 5, 2, 2, false},
         {SymmetryClass::D, SymmetryClass::H, SymmetryClass::Standard, SymmetryClass::HVD,
          SymmetryClass::AntiHVD},
         11, 9},
        {{4, 4, 3, 1, 1, true},
         {SymmetryClass::HVD, SymmetryClass::Standard, SymmetryClass::V, SymmetryClass::D},
         7, 8},
        {{1, 3, 1, 1, 0, false},
         {SymmetryClass::Standard, SymmetryClass::HVD, SymmetryClass::AntiHVD},
         5, 5},
    };
    for (const auto& c : cases) {
        auto layer = make_layer(c.g, c.classes, rng);
        auto x = randn({2, static_cast<std::size_t>(c.g.in_channels),
                        static_cast<std::size_t>(c.h), static_cast<std::size_t>(c.w)},
                       rng);
        OpCounter counter;
        auto y = fast_forward(layer, x, counter);
        int oh = static_cast<int>(y.dim(2));
        int ow = static_cast<int>(y.dim(3));
        CHECK(counter.multiplies == multiply_count(layer, 2, oh, ow));
    }
}

TEST_CASE("closed form is free-count times output volume") {
    Rng rng(7);
    Conv2dGeometry g{3, 2, 3, 1, 0, false};
    auto layer = make_layer(g, {SymmetryClass::HVD, SymmetryClass::V}, rng);
    // per output element and slice: 3 multiplies for the full-group filter,
    // 6 for the mirrored one
    std::uint64_t expect = (3ULL + 6ULL) * 3 /*slices*/ * 4 * 5 /*H'xW'*/ * 2 /*batch*/;
    CHECK(multiply_count(layer, 2, 4, 5) == expect);
    CHECK(naive_multiply_count(g, 2, 4, 5) == 2ULL * 2 * 3 * 9 * 4 * 5);
}

TEST_CASE("a balanced four-class mix halves the multiplies") {
    Rng rng(404);
    Conv2dGeometry g{3, 8, 3, 1, 1, false};
    std::vector<SymmetryClass> mix;
    for (int i = 0; i < 2; ++i) mix.push_back(SymmetryClass::H);
    for (int i = 0; i < 2; ++i) mix.push_back(SymmetryClass::V);
    for (int i = 0; i < 2; ++i) mix.push_back(SymmetryClass::HVD);
    for (int i = 0; i < 2; ++i) mix.push_back(SymmetryClass::AntiHVD);
    auto layer = make_layer(g, mix, rng);

    auto x = randn({1, 3, 10, 10}, rng);
    OpCounter counter;
    auto y = fast_forward(layer, x, counter);
    auto naive = naive_multiply_count(g, 1, static_cast<int>(y.dim(2)),
                                      static_cast<int>(y.dim(3)));
    CHECK(counter.multiplies * 2 == naive);
}

TEST_CASE("strided and padded cases stay equivalent") {
    Rng rng(606);
    for (int k : {1, 3, 5}) {
        for (int stride : {1, 2}) {
            Conv2dGeometry g{2, 3, k, stride, k / 2, false};
            std::vector<SymmetryClass> classes = {SymmetryClass::AntiHVD,
                                                  SymmetryClass::HV, SymmetryClass::D};
            auto layer = make_layer(g, classes, rng);
            auto x = randn({2, 2, 9, 7}, rng);
            auto naive = layer.forward(x);
            OpCounter counter;
            auto fast = fast_forward(layer, x, counter);
            CHECK(max_rel_dev(naive, fast) < 1e-5f);
            CHECK(counter.multiplies ==
                  multiply_count(layer, 2, static_cast<int>(naive.dim(2)),
                                 static_cast<int>(naive.dim(3))));
        }
    }
}

}  // TEST_SUITE
