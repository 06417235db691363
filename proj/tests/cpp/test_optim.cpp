#include "doctest.h"

#include <cmath>
#include <memory>
#include <vector>

#include "symconv/error.hpp"
#include "symconv/nn.hpp"
#include "symconv/optim.hpp"
#include "symconv/rng.hpp"

using namespace symconv;

TEST_SUITE("optim") {

TEST_CASE("momentum unrolls to the textbook two-step values") {
    // constant gradient g: step 1 moves by lr*g, step 2 by lr*(1+m)*g
    std::vector<float> w = {1.0f, -2.0f};
    std::vector<float> g = {0.5f, 0.25f};
    ParamRef ref{"w", &w, &g, false};
    SgdConfig cfg;
    cfg.momentum = 0.9;
    cfg.weight_decay = 0.0;  // decay off: pure momentum arithmetic
    SgdOptimizer opt({ref}, cfg);

    opt.step(0.1);
    CHECK(w[0] == doctest::Approx(1.0 - 0.1 * 0.5).epsilon(1e-7));
    CHECK(w[1] == doctest::Approx(-2.0 - 0.1 * 0.25).epsilon(1e-7));
    opt.step(0.1);
    CHECK(w[0] == doctest::Approx(1.0 - 0.1 * 0.5 - 0.19 * 0.5).epsilon(1e-7));
    CHECK(w[1] == doctest::Approx(-2.0 - 0.1 * 0.25 - 0.19 * 0.25).epsilon(1e-7));
}

TEST_CASE("weight decay only touches params that opt in") {
    std::vector<float> w1 = {1.0f}, g1 = {0.0f};
    std::vector<float> w2 = {1.0f}, g2 = {0.0f};
    SgdConfig cfg;
    cfg.momentum = 0.0;
    cfg.weight_decay = 0.1;
    SgdOptimizer opt({{"a", &w1, &g1, true}, {"b", &w2, &g2, false}}, cfg);
    opt.step(1.0);
    CHECK(w1[0] == doctest::Approx(0.9).epsilon(1e-7));  // 1 - 1*(0 + 0.1*1)
    CHECK(w2[0] == 1.0f);
}

TEST_CASE("learning-rate schedule lookup") {
    SgdConfig cfg;
    cfg.lr = 0.1;
    SUBCASE("no boundaries: base rate everywhere") {
        CHECK(lr_at(0, cfg) == 0.1);
        CHECK(lr_at(299, cfg) == 0.1);
    }
    SUBCASE("two drops") {
        cfg.schedule = {{150, 0.01}, {225, 0.001}};
        CHECK(lr_at(0, cfg) == 0.1);
        CHECK(lr_at(149, cfg) == 0.1);
        CHECK(lr_at(150, cfg) == 0.01);
        CHECK(lr_at(224, cfg) == 0.01);
        CHECK(lr_at(225, cfg) == 0.001);
        CHECK(lr_at(299, cfg) == 0.001);
    }
    SUBCASE("a boundary at zero overrides the base rate") {
        cfg.schedule = {{0, 0.05}};
        CHECK(lr_at(0, cfg) == 0.05);
        CHECK(lr_at(10, cfg) == 0.05);
    }
}

TEST_CASE("config validation") {
    SgdConfig cfg;
    cfg.schedule = {{100, 0.01}, {50, 0.001}};  // out of order
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg.schedule = {{100, 0.01}, {100, 0.001}};  // duplicate boundary
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg.schedule = {{100, -0.01}};
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg.schedule.clear();
    cfg.batch_size = 0;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
}

TEST_CASE("config JSON round-trip") {
    SgdConfig cfg;
    cfg.lr = 0.2;
    cfg.momentum = 0.85;
    cfg.weight_decay = 1e-4;
    cfg.schedule = {{150, 0.01}, {225, 0.001}};
    cfg.batch_size = 64;
    cfg.epochs = 7;
    cfg.seed = 999;
    auto back = SgdConfig::from_json(cfg.to_json());
    CHECK(back == cfg);

    // boundaries also accepted as objects
    auto alt = SgdConfig::from_json(
        R"({"lr":0.1,"schedule":[{"epoch":5,"lr":0.01}]})");
    REQUIRE(alt.schedule.size() == 1);
    CHECK(alt.schedule[0].epoch == 5);
    CHECK(alt.schedule[0].lr == 0.01);

    CHECK_THROWS_AS(SgdConfig::from_json("not json"), FormatError);
}

TEST_CASE("init: projected draws keep the per-orbit mean variance") {
    // a free coefficient of an orbit of size s is the mean of s iid normals,
    // so its variance is (2/fan_in)/s
    Conv2dGeometry g{2, 1, 3, 1, 1, false};
    const double fan_in = 2.0 * 9.0;
    Rng rng(1234);
    double sum_corner = 0.0, sq_corner = 0.0;  // hvd corner orbit, size 4
    double sum_centre = 0.0, sq_centre = 0.0;  // singleton
    const int trials = 8000;
    for (int t = 0; t < trials; ++t) {
        ConvLayer layer(g, {SymmetryClass::HVD}, false);
        layer.init_params(rng);
        const auto& free = layer.impl().free_weights();
        // free layout per slice: corner orbit, edge orbit, centre
        double corner = free[0];
        double centre = free[2];
        sum_corner += corner;
        sq_corner += corner * corner;
        sum_centre += centre;
        sq_centre += centre * centre;
    }
    double var_corner = sq_corner / trials - std::pow(sum_corner / trials, 2);
    double var_centre = sq_centre / trials - std::pow(sum_centre / trials, 2);
    CHECK(var_corner == doctest::Approx(2.0 / fan_in / 4.0).epsilon(0.08));
    CHECK(var_centre == doctest::Approx(2.0 / fan_in).epsilon(0.08));
}

TEST_CASE("init draws are in model order and reproducible") {
    Model a, b;
    for (Model* m : {&a, &b}) {
        Conv2dGeometry g{1, 2, 3, 1, 1, false};
        m->add(std::make_unique<ConvLayer>(
            g, std::vector<SymmetryClass>{SymmetryClass::V, SymmetryClass::HVD}, false));
        m->add(std::make_unique<FcLayer>(8, 2));
    }
    Rng r1(42), r2(42);
    kaiming_init(a, r1);
    kaiming_init(b, r2);
    auto pa = a.params(), pb = b.params();
    REQUIRE(pa.size() == pb.size());
    for (std::size_t i = 0; i < pa.size(); ++i) {
        REQUIRE(pa[i].value->size() == pb[i].value->size());
        for (std::size_t j = 0; j < pa[i].value->size(); ++j)
            CHECK((*pa[i].value)[j] == (*pb[i].value)[j]);
    }
    // fc bias stays zero
    auto* fc = dynamic_cast<FcLayer*>(a.layers()[1].get());
    REQUIRE(fc != nullptr);
    for (float v : fc->bias_values()) CHECK(v == 0.0f);
}

TEST_CASE("steps preserve the tied structure") {
    // train a constrained conv on junk gradients; the expanded kernels must
    // stay inside the class subspace the whole way
    Conv2dGeometry g{1, 3, 3, 1, 1, false};
    Model model;
    model.add(std::make_unique<ConvLayer>(
        g, std::vector<SymmetryClass>{SymmetryClass::V, SymmetryClass::HVD,
                                      SymmetryClass::AntiHVD}, false));
    Rng rng(5);
    kaiming_init(model, rng);
    SgdConfig cfg;
    SgdOptimizer opt(model.params(), cfg);

    Rng data(6);
    for (int step = 0; step < 20; ++step) {
        Tensor x({2, 1, 5, 5});
        for (std::size_t i = 0; i < x.size(); ++i)
            x[i] = static_cast<float>(data.normal());
        auto y = model.forward(x, true);
        Tensor gy(y.shape());
        for (std::size_t i = 0; i < gy.size(); ++i)
            gy[i] = static_cast<float>(data.normal());
        model.backward(gy);
        opt.step(0.05);
    }
    auto* conv = model.conv_layers()[0];
    auto kernels = conv->impl().expand_kernels();
    for (int f = 0; f < 3; ++f) {
        const auto& map = conv->impl().map_for_filter(f);
        for (const auto& orbit : map.orbits()) {
            // every member equals sign * the representative's unsigned value
            auto [rep, rep_sign] = orbit.members.front();
            float base = kernels[f * 9 + rep] / static_cast<float>(rep_sign);
            for (auto [p, s] : orbit.members)
                CHECK(kernels[f * 9 + p] == static_cast<float>(s) * base);
        }
    }
}

}  // TEST_SUITE
