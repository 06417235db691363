#include "doctest.h"

#include <cmath>

#include "symconv/error.hpp"
#include "symconv/rng.hpp"
#include "symconv/symmetry.hpp"

using namespace symconv;

namespace {

Tensor64 random_free(const TyingMap& map, Rng& rng) {
    Tensor64 f({static_cast<std::size_t>(map.free_count())});
    for (std::size_t i = 0; i < f.size(); ++i) f[i] = rng.normal();
    return f;
}

double dot(const Tensor64& a, const Tensor64& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

}  // namespace

TEST_SUITE("symmetry") {

TEST_CASE("token round-trip") {
    const char* tokens[] = {"standard", "v", "h", "d", "hv", "hvd", "anti_hvd"};
    int i = 0;
    for (SymmetryClass cls : kAllSymmetryClasses) {
        CHECK(to_token(cls) == tokens[i]);
        CHECK(class_from_token(tokens[i]) == cls);
        ++i;
    }
    CHECK_THROWS_AS(class_from_token("diag"), ConfigError);
    CHECK_THROWS_AS(class_from_token(""), ConfigError);
}

TEST_CASE("free parameter counts, k = 1 / 3 / 5") {
    struct Row {
        SymmetryClass cls;
        int k1, k3, k5;
    };
    const Row rows[] = {
        {SymmetryClass::Standard, 1, 9, 25}, {SymmetryClass::V, 1, 6, 15},
        {SymmetryClass::H, 1, 6, 15},        {SymmetryClass::D, 1, 6, 15},
        {SymmetryClass::HV, 1, 4, 9},        {SymmetryClass::HVD, 1, 3, 6},
        {SymmetryClass::AntiHVD, 1, 3, 6},
    };
    for (const auto& r : rows) {
        CHECK(free_param_count(r.cls, 1) == r.k1);
        CHECK(free_param_count(r.cls, 3) == r.k3);
        CHECK(free_param_count(r.cls, 5) == r.k5);
    }
    CHECK(compression_ratio(SymmetryClass::HVD, 3) == doctest::Approx(1.0 / 3.0));
    CHECK(compression_ratio(SymmetryClass::V, 3) == doctest::Approx(2.0 / 3.0));
}

TEST_CASE("even kernel sizes are rejected") {
    CHECK_THROWS_AS(build_tying_map(SymmetryClass::HVD, 2), ConfigError);
    CHECK_THROWS_AS(build_tying_map(SymmetryClass::V, 4), ConfigError);
    CHECK_THROWS_AS(build_tying_map(SymmetryClass::Standard, 0), ConfigError);
}

TEST_CASE("orbit structure: sizes in representative order") {
    // full-group class at k = 5: one 8-orbit, four 4-orbits, the centre
    TyingMap m(SymmetryClass::HVD, 5);
    REQUIRE(m.free_count() == 6);
    const int expect[] = {4, 8, 4, 4, 4, 1};
    for (int o = 0; o < 6; ++o) CHECK(m.orbits()[o].size() == expect[o]);
    // representatives are lexicographically sorted
    for (int o = 1; o < 6; ++o)
        CHECK(m.orbits()[o - 1].representative() < m.orbits()[o].representative());
    // every cell belongs to exactly one orbit
    int cells = 0;
    for (const auto& orb : m.orbits()) cells += orb.size();
    CHECK(cells == 25);
}

TEST_CASE("expansion layouts, k = 3") {
    auto expanded = [](SymmetryClass cls, std::vector<double> f) {
        TyingMap m(cls, 3);
        const std::size_t n = f.size();
        return m.expand(Tensor64::from_values({n}, std::move(f)));
    };
    // mirror about the vertical axis
    auto v = expanded(SymmetryClass::V, {1, 2, 3, 4, 5, 6});
    std::vector<double> vexp = {1, 2, 1, 3, 4, 3, 5, 6, 5};
    for (int i = 0; i < 9; ++i) CHECK(v[i] == vexp[i]);
    // mirror about the horizontal axis
    auto h = expanded(SymmetryClass::H, {1, 2, 3, 4, 5, 6});
    std::vector<double> hexp = {1, 2, 3, 4, 5, 6, 1, 2, 3};
    for (int i = 0; i < 9; ++i) CHECK(h[i] == hexp[i]);
    // symmetric matrix
    auto d = expanded(SymmetryClass::D, {1, 2, 3, 4, 5, 6});
    std::vector<double> dexp = {1, 2, 3, 2, 4, 5, 3, 5, 6};
    for (int i = 0; i < 9; ++i) CHECK(d[i] == dexp[i]);
    auto hv = expanded(SymmetryClass::HV, {1, 2, 3, 4});
    std::vector<double> hvexp = {1, 2, 1, 3, 4, 3, 1, 2, 1};
    for (int i = 0; i < 9; ++i) CHECK(hv[i] == hvexp[i]);
    auto hvd = expanded(SymmetryClass::HVD, {1, 2, 3});
    std::vector<double> hvdexp = {1, 2, 1, 2, 3, 2, 1, 2, 1};
    for (int i = 0; i < 9; ++i) CHECK(hvd[i] == hvdexp[i]);
}

TEST_CASE("sign-masked class: centre positive, rest negated") {
    TyingMap m(SymmetryClass::AntiHVD, 3);
    REQUIRE(m.free_count() == 3);
    auto w = m.expand(Tensor64::from_values({3}, {1, 2, 3}));
    std::vector<double> expect = {-1, -2, -1, -2, 3, -2, -1, -2, -1};
    for (int i = 0; i < 9; ++i) CHECK(w[i] == expect[i]);
    for (int p = 0; p < 9; ++p) CHECK(m.sign_of(p) == (p == 4 ? 1 : -1));

    // the unmasked classes carry no signs
    TyingMap plain(SymmetryClass::HVD, 3);
    for (int p = 0; p < 9; ++p) CHECK(plain.sign_of(p) == 1);

    // k = 1: a single positive centre
    TyingMap one(SymmetryClass::AntiHVD, 1);
    CHECK(one.free_count() == 1);
    CHECK(one.sign_of(0) == 1);
}

TEST_CASE("project inverts expand") {
    Rng rng(31);
    for (SymmetryClass cls : kAllSymmetryClasses) {
        for (int k : {1, 3, 5}) {
            TyingMap m(cls, k);
            auto f = random_free(m, rng);
            auto back = m.project(m.expand(f));
            REQUIRE(back.size() == f.size());
            for (std::size_t i = 0; i < f.size(); ++i)
                CHECK(back[i] == doctest::Approx(f[i]).epsilon(1e-14));
        }
    }
}

TEST_CASE("project is idempotent and expansion is a fixed point") {
    Rng rng(77);
    TyingMap m(SymmetryClass::AntiHVD, 5);
    Tensor64 full({5, 5});
    for (std::size_t i = 0; i < full.size(); ++i) full[i] = rng.normal();
    auto once = m.expand(m.project(full));
    auto twice = m.expand(m.project(once));
    for (std::size_t i = 0; i < once.size(); ++i)
        CHECK(twice[i] == doctest::Approx(once[i]).epsilon(1e-14));
}

TEST_CASE("fold_gradient is the adjoint of expand") {
    Rng rng(5150);
    for (SymmetryClass cls : kAllSymmetryClasses) {
        for (int k : {3, 5}) {
            TyingMap m(cls, k);
            auto f = random_free(m, rng);
            Tensor64 g({static_cast<std::size_t>(k), static_cast<std::size_t>(k)});
            for (std::size_t i = 0; i < g.size(); ++i) g[i] = rng.normal();
            double lhs = dot(m.expand(f), g);
            Tensor64 folded = m.fold_gradient(g);
            double rhs = dot(f, folded);
            CHECK(lhs == doctest::Approx(rhs).epsilon(1e-12));
        }
    }
}

TEST_CASE("orbit_of covers the kernel consistently") {
    TyingMap m(SymmetryClass::HV, 5);
    for (int p = 0; p < 25; ++p) {
        int o = m.orbit_of(p);
        REQUIRE(o >= 0);
        REQUIRE(o < m.free_count());
        bool found = false;
        for (auto [q, s] : m.orbits()[o].members) found |= (q == p);
        CHECK(found);
    }
}

TEST_CASE("shape guards on expand / project / fold") {
    TyingMap m(SymmetryClass::HVD, 3);
    CHECK_THROWS_AS(m.expand(Tensor64::ones({4})), ShapeError);
    CHECK_THROWS_AS(m.project(Tensor64::ones({2, 2})), ShapeError);
    CHECK_THROWS_AS(m.fold_gradient(Tensor64::ones({3, 4})), ShapeError);
}

}  // TEST_SUITE
