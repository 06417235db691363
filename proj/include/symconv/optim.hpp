#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "symconv/nn.hpp"
#include "symconv/rng.hpp"

namespace symconv {

struct LrPoint {
    int epoch = 0;  // the new rate applies from this epoch onward
    double lr = 0.0;
    bool operator==(const LrPoint&) const = default;
};

struct SgdConfig {
    double lr = 0.1;
    double momentum = 0.9;
    double weight_decay = 0.0005;
    std::vector<LrPoint> schedule;  // boundaries strictly increasing
    int batch_size = 128;
    int epochs = 10;
    std::uint64_t seed = 1;

    void validate() const;
    std::string to_json() const;
    static SgdConfig from_json(const std::string& text);
    static SgdConfig load(const std::string& path);
    bool operator==(const SgdConfig&) const = default;
};

// Piecewise-constant lookup: the base rate until the first boundary, then the
// rate of the last boundary at or before `epoch`.
double lr_at(int epoch, const SgdConfig& cfg);

// v <- momentum*v + (grad + weight_decay*param); param <- param - lr*v.
// Decay applies only where the ParamRef says so (conv free coefficients and
// fc weights; never biases or normalization parameters).
class SgdOptimizer {
public:
    SgdOptimizer(std::vector<ParamRef> params, const SgdConfig& cfg);
    void step(double lr);
    const std::vector<ParamRef>& params() const { return params_; }

private:
    std::vector<ParamRef> params_;
    float momentum_;
    float weight_decay_;
    std::vector<std::vector<float>> velocity_;
};

// He-style init for every layer with weights, in model order. Constrained
// convs draw full kernels and project them, so their expanded scale tracks
// the unconstrained baseline.
void kaiming_init(Model& model, Rng& rng);

}  // namespace symconv
