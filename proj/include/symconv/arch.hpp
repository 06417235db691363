#pragma once

#include <array>
#include <string>
#include <vector>

#include "symconv/nn.hpp"

namespace symconv {

// Declarative model description. Layer kinds: conv, batchnorm, relu, maxpool,
// avgpool, fc, block (residual; nested layers + implicit shortcut). Channel
// counts for batchnorm and input features for fc are inferred while building,
// so descriptions stay free of redundant numbers.
struct LayerDesc {
    std::string kind;
    // conv
    int out_channels = 0;
    int kernel_size = 3;
    int stride = 1;
    int padding = 0;
    bool depthwise = false;
    bool bias = false;
    bool symmetrizable = false;
    // pooling
    bool global = false;
    int size = 2;
    // fc
    int out_features = 0;
    // block
    std::vector<LayerDesc> layers;
};

struct ArchSpec {
    std::string name;
    std::array<int, 3> input_shape{};  // channels, height, width
    int classes = 0;
    std::vector<LayerDesc> layers;

    std::string to_json() const;
    static ArchSpec from_json(const std::string& text);
    static ArchSpec load(const std::string& path);
};

// Instantiates the description, assigning symmetry classes from the filter
// config to every symmetrizable conv. Throws ConfigError on shape breaks.
Model build_model(const ArchSpec& spec, const FilterConfig& config);

// Built-in families. Residual nets follow the classic small-image pattern:
// a 3x3 stem, three stages of n = (depth-2)/6 two-conv blocks at widths
// 16/32/64, stride 2 entering stages two and three, parameter-free shortcuts,
// global average pooling and a linear head. Convs carry no bias.
ArchSpec resnet_cifar_spec(int depth, const std::string& dataset, int classes);

// conv-bn-relu-maxpool twice, then a linear head.
ArchSpec small_cnn_spec(const std::string& dataset, int classes);

// Depthwise-separable stack: a strided stem, four depthwise+pointwise pairs,
// global average pooling and a linear head. Only the depthwise convs are
// symmetrizable; replace_up_to limits that to the first k of them.
ArchSpec depthwise_net_spec(const std::string& dataset, int classes,
                            int replace_up_to = 4);

// Built-in names: resnet20/32/44/56, small_cnn, dwnet. Throws ConfigError on
// unknown names, listing the choices.
ArchSpec builtin_arch(const std::string& name, const std::string& dataset,
                      int classes, int replace_up_to = 4);
bool is_builtin_arch(const std::string& name);

// (channels, height, width) of dataset samples: cifar10 -> 3x32x32,
// mnist -> 1x28x28.
std::array<int, 3> dataset_input_shape(const std::string& dataset);

}  // namespace symconv
