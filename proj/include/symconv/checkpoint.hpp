#pragma once

#include <cstdint>
#include <string>

#include "symconv/arch.hpp"
#include "symconv/nn.hpp"

namespace symconv {

// Container layout: "SYMC" magic, u32 format version, u32 manifest length,
// manifest JSON (architecture, filter config token, provenance, named state
// entry list), then one rank-1 tensor blob per state entry in manifest order.
// Writing the same trained model twice yields identical bytes.

struct CheckpointMeta {
    ArchSpec arch;
    std::string filter_config = "standard";
    std::string dataset;
    std::uint64_t seed = 0;
    int epochs_trained = 0;
};

void save_checkpoint(const std::string& path, Model& model,
                     const CheckpointMeta& meta);

struct LoadedCheckpoint {
    CheckpointMeta meta;
    Model model;
};

// Rebuilds the model from the stored architecture + filter config and fills
// its state. Name or size mismatches raise FormatError.
LoadedCheckpoint load_checkpoint(const std::string& path);

struct ProjectionRow {
    std::string layer;
    std::string class_mix;
    double residual = 0.0;  // Frobenius norm of (kernel - nearest symmetric kernel)
    double relative = 0.0;  // residual / kernel norm
};

// Projects an unconstrained checkpoint onto the symmetry classes the target
// filter config assigns, writes the constrained checkpoint to out_path, and
// reports the per-layer projection residuals. The source must have been
// trained with the standard (unconstrained) config.
std::vector<ProjectionRow> project_checkpoint(const std::string& src_path,
                                              const FilterConfig& target,
                                              const std::string& out_path);

// "h:16;v:16;hvd:32" style summary of a layer's filter-class assignment.
std::string class_mix_summary(const std::vector<SymmetryClass>& assignments);

}  // namespace symconv
