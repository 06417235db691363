#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace symconv {

// In-process verification suites behind the `verify` CLI command. Each check
// reports the worst observed error so regressions show up as numbers, not
// just pass/fail flips.
struct CheckResult {
    std::string name;
    bool pass = false;
    bool skipped = false;  // prerequisite data absent; never counts as failure
    double max_error = 0.0;
    std::string detail;
};

// Central finite differences (64-bit) against analytic free-coefficient and
// bias gradients on random constrained layers covering every symmetry class,
// k in {1,3,5}, strides 1-2, and depthwise cases.
std::vector<CheckResult> verify_gradcheck(int layer_count, std::uint64_t seed);

// Flip/transpose equivariances of single-class layers (stride 1, symmetric
// padding), evaluated in 64-bit.
std::vector<CheckResult> verify_equivariance(std::uint64_t seed);

// Fast path vs naive forward on random layers + exact multiply-count checks.
std::vector<CheckResult> verify_fastconv(int cases, std::uint64_t seed);

// Synthetic decode fixtures (always) and real-data statistics when the files
// exist under data_dir.
std::vector<CheckResult> verify_data(const std::string& data_dir);

// suite: gradcheck | equivariance | fastconv | data | all.
std::vector<CheckResult> run_verify_suite(const std::string& suite,
                                          const std::string& data_dir,
                                          std::uint64_t seed);

}  // namespace symconv
