#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "symconv/tensor.hpp"

namespace symconv {

// Kernel constraint classes. V mirrors about the central vertical axis,
// H about the horizontal axis, D about the main diagonal; HV and HVD are the
// groups generated by combining those reflections (HVD is the full dihedral
// group of the square). AntiHVD shares HVD's orbit structure but applies a
// fixed sign mask: +1 at the center cell, -1 everywhere else.
enum class SymmetryClass : std::uint8_t {
    Standard,
    V,
    H,
    D,
    HV,
    HVD,
    AntiHVD,
};

constexpr SymmetryClass kAllSymmetryClasses[] = {
    SymmetryClass::Standard, SymmetryClass::V,   SymmetryClass::H,
    SymmetryClass::D,        SymmetryClass::HV,  SymmetryClass::HVD,
    SymmetryClass::AntiHVD,
};

// Wire tokens: "standard","v","h","d","hv","hvd","anti_hvd".
const char* to_token(SymmetryClass c);
SymmetryClass class_from_token(const std::string& token);

// One group of kernel positions forced to share a single free coefficient
// (up to sign). Positions are flat row-major indices into the k*k grid;
// members are sorted ascending, so the representative is the first member
// and the lexicographically smallest (i,j) of the orbit.
struct Orbit {
    std::vector<std::pair<int, int>> members;  // (flat position, sign)
    int representative() const { return members.front().first; }
    int size() const { return static_cast<int>(members.size()); }
};

// Linear map between a class's free coefficients and the full k x k kernel.
// Immutable after construction; all operations are pure.
class TyingMap {
public:
    TyingMap(SymmetryClass cls, int kernel_size);

    SymmetryClass symmetry_class() const { return cls_; }
    int kernel_size() const { return k_; }
    int free_count() const { return static_cast<int>(orbits_.size()); }
    const std::vector<Orbit>& orbits() const { return orbits_; }

    int orbit_of(int flat_pos) const { return orbit_of_[flat_pos]; }
    int sign_of(int flat_pos) const { return sign_of_[flat_pos]; }

    // W[p] = sign(p) * free[orbit(p)]
    template <typename T>
    TensorT<T> expand(const TensorT<T>& free) const;

    template <typename T>
    void expand_into(const T* free, T* kernel) const {
        const int n = k_ * k_;
        for (int p = 0; p < n; ++p)
            kernel[p] = static_cast<T>(sign_of_[p]) * free[orbit_of_[p]];
    }

    // Orthogonal projection onto the class subspace in free coordinates:
    // free[o] = mean over the orbit of sign(p) * full[p].
    template <typename T>
    TensorT<T> project(const TensorT<T>& full) const;

    // Adjoint of expand (sum, not mean): the chain rule through tied copies.
    template <typename T>
    TensorT<T> fold_gradient(const TensorT<T>& grad_full) const;

    template <typename T>
    void fold_gradient_into(const T* grad_full, T* grad_free) const {
        for (int o = 0; o < free_count(); ++o) {
            T acc = T(0);
            for (auto [p, s] : orbits_[o].members)
                acc += static_cast<T>(s) * grad_full[p];
            grad_free[o] = acc;
        }
    }

private:
    SymmetryClass cls_;
    int k_;
    std::vector<Orbit> orbits_;
    std::vector<int> orbit_of_;      // flat position -> orbit index
    std::vector<std::int8_t> sign_of_;  // flat position -> +1/-1
};

TyingMap build_tying_map(SymmetryClass cls, int kernel_size);

// Number of free coefficients for (class, k); equals the orbit count.
int free_param_count(SymmetryClass cls, int kernel_size);

// free_param_count / k^2.
double compression_ratio(SymmetryClass cls, int kernel_size);

}  // namespace symconv
