#include "symconv/symmetry.hpp"

#include <algorithm>
#include <array>

#include "symconv/error.hpp"

namespace symconv {

const char* to_token(SymmetryClass c) {
    switch (c) {
        case SymmetryClass::Standard: return "standard";
        case SymmetryClass::V: return "v";
        case SymmetryClass::H: return "h";
        case SymmetryClass::D: return "d";
        case SymmetryClass::HV: return "hv";
        case SymmetryClass::HVD: return "hvd";
        case SymmetryClass::AntiHVD: return "anti_hvd";
    }
    throw ConfigError("invalid SymmetryClass value");
}

SymmetryClass class_from_token(const std::string& token) {
    for (SymmetryClass c : kAllSymmetryClasses)
        if (token == to_token(c)) return c;
    throw ConfigError("unknown symmetry class token: \"" + token +
                      "\" (expected standard, v, h, d, hv, hvd, anti_hvd)");
}

namespace {

using Point = std::pair<int, int>;

Point reflect_v(Point p, int k) { return {p.first, k - 1 - p.second}; }
Point reflect_h(Point p, int k) { return {k - 1 - p.first, p.second}; }
Point reflect_d(Point p, int k) { return {p.second, p.first}; }

std::vector<Point (*)(Point, int)> generators_for(SymmetryClass cls) {
    switch (cls) {
        case SymmetryClass::Standard: return {};
        case SymmetryClass::V: return {reflect_v};
        case SymmetryClass::H: return {reflect_h};
        case SymmetryClass::D: return {reflect_d};
        case SymmetryClass::HV: return {reflect_h, reflect_v};
        case SymmetryClass::HVD:
        case SymmetryClass::AntiHVD: return {reflect_h, reflect_v, reflect_d};
    }
    throw ConfigError("invalid SymmetryClass value");
}

}  // namespace

TyingMap::TyingMap(SymmetryClass cls, int kernel_size) : cls_(cls), k_(kernel_size) {
    if (k_ < 1 || k_ % 2 == 0) {
        throw ConfigError("unsupported kernel size " + std::to_string(k_) +
                          ": symmetry classes are defined for odd k only");
    }
    const int n = k_ * k_;
    const int center = (k_ / 2) * k_ + (k_ / 2);
    orbit_of_.assign(n, -1);
    sign_of_.assign(n, 1);
    if (cls_ == SymmetryClass::AntiHVD) {
        for (int p = 0; p < n; ++p) sign_of_[p] = (p == center) ? 1 : -1;
    }

    const auto gens = generators_for(cls_);
    // Scanning positions in row-major order and closing each unvisited one
    // under the generators makes the representative the lexicographic
    // minimum and leaves orbits sorted by representative.
    for (int start = 0; start < n; ++start) {
        if (orbit_of_[start] >= 0) continue;
        const int oi = static_cast<int>(orbits_.size());
        std::vector<int> frontier = {start};
        orbit_of_[start] = oi;
        std::vector<int> members = {start};
        while (!frontier.empty()) {
            const int p = frontier.back();
            frontier.pop_back();
            const Point pt{p / k_, p % k_};
            for (auto g : gens) {
                const Point q = g(pt, k_);
                const int qf = q.first * k_ + q.second;
                if (orbit_of_[qf] < 0) {
                    orbit_of_[qf] = oi;
                    members.push_back(qf);
                    frontier.push_back(qf);
                }
            }
        }
        std::sort(members.begin(), members.end());
        Orbit orbit;
        orbit.members.reserve(members.size());
        for (int p : members) orbit.members.emplace_back(p, sign_of_[p]);
        orbits_.push_back(std::move(orbit));
    }
}

template <typename T>
TensorT<T> TyingMap::expand(const TensorT<T>& free) const {
    if (free.size() != static_cast<std::size_t>(free_count())) {
        throw ShapeError("expand: got " + std::to_string(free.size()) +
                         " free coefficients, map has " +
                         std::to_string(free_count()) + " orbits");
    }
    TensorT<T> kernel({static_cast<std::size_t>(k_), static_cast<std::size_t>(k_)});
    expand_into(free.data(), kernel.data());
    return kernel;
}

template <typename T>
TensorT<T> TyingMap::project(const TensorT<T>& full) const {
    if (full.rank() != 2 || full.dim(0) != static_cast<std::size_t>(k_) ||
        full.dim(1) != static_cast<std::size_t>(k_)) {
        throw ShapeError("project: expected " + std::to_string(k_) + "x" +
                         std::to_string(k_) + " kernel, got shape " +
                         shape_to_string(full.shape()));
    }
    TensorT<T> free({static_cast<std::size_t>(free_count())});
    for (int o = 0; o < free_count(); ++o) {
        T acc = T(0);
        for (auto [p, s] : orbits_[o].members) acc += static_cast<T>(s) * full[p];
        free[o] = acc / static_cast<T>(orbits_[o].size());
    }
    return free;
}

template <typename T>
TensorT<T> TyingMap::fold_gradient(const TensorT<T>& grad_full) const {
    if (grad_full.rank() != 2 || grad_full.dim(0) != static_cast<std::size_t>(k_) ||
        grad_full.dim(1) != static_cast<std::size_t>(k_)) {
        throw ShapeError("fold_gradient: expected " + std::to_string(k_) + "x" +
                         std::to_string(k_) + " gradient, got shape " +
                         shape_to_string(grad_full.shape()));
    }
    TensorT<T> grad_free({static_cast<std::size_t>(free_count())});
    fold_gradient_into(grad_full.data(), grad_free.data());
    return grad_free;
}

template TensorT<float> TyingMap::expand(const TensorT<float>&) const;
template TensorT<double> TyingMap::expand(const TensorT<double>&) const;
template TensorT<float> TyingMap::project(const TensorT<float>&) const;
template TensorT<double> TyingMap::project(const TensorT<double>&) const;
template TensorT<float> TyingMap::fold_gradient(const TensorT<float>&) const;
template TensorT<double> TyingMap::fold_gradient(const TensorT<double>&) const;

TyingMap build_tying_map(SymmetryClass cls, int kernel_size) {
    return TyingMap(cls, kernel_size);
}

int free_param_count(SymmetryClass cls, int kernel_size) {
    return TyingMap(cls, kernel_size).free_count();
}

double compression_ratio(SymmetryClass cls, int kernel_size) {
    return static_cast<double>(free_param_count(cls, kernel_size)) /
           static_cast<double>(kernel_size * kernel_size);
}

}  // namespace symconv
