#include "symconv/arch.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

#include "symconv/error.hpp"

namespace symconv {

namespace {

using Json = nlohmann::ordered_json;

Json layer_to_json(const LayerDesc& d) {
    Json j;
    j["kind"] = d.kind;
    if (d.kind == "conv") {
        j["out_channels"] = d.out_channels;
        j["kernel_size"] = d.kernel_size;
        j["stride"] = d.stride;
        j["padding"] = d.padding;
        j["depthwise"] = d.depthwise;
        j["bias"] = d.bias;
        j["symmetrizable"] = d.symmetrizable;
    } else if (d.kind == "maxpool") {
        j["size"] = d.size;
        j["stride"] = d.stride;
    } else if (d.kind == "avgpool") {
        j["global"] = d.global;
        if (!d.global) {
            j["size"] = d.size;
            j["stride"] = d.stride;
        }
    } else if (d.kind == "fc") {
        j["out_features"] = d.out_features;
    } else if (d.kind == "block") {
        Json inner = Json::array();
        for (const auto& l : d.layers) inner.push_back(layer_to_json(l));
        j["layers"] = std::move(inner);
    } else if (d.kind != "batchnorm" && d.kind != "relu") {
        throw ConfigError("unknown layer kind: " + d.kind);
    }
    return j;
}

LayerDesc layer_from_json(const Json& j) {
    if (!j.is_object() || !j.contains("kind"))
        throw FormatError("architecture layer entry needs a \"kind\" field");
    LayerDesc d;
    d.kind = j.at("kind").get<std::string>();
    if (d.kind == "conv") {
        d.out_channels = j.value("out_channels", 0);
        d.kernel_size = j.value("kernel_size", 3);
        d.stride = j.value("stride", 1);
        d.padding = j.value("padding", 0);
        d.depthwise = j.value("depthwise", false);
        d.bias = j.value("bias", false);
        d.symmetrizable = j.value("symmetrizable", false);
    } else if (d.kind == "maxpool" || d.kind == "avgpool") {
        d.global = j.value("global", false);
        d.size = j.value("size", 2);
        d.stride = j.value("stride", d.size);
    } else if (d.kind == "fc") {
        d.out_features = j.value("out_features", 0);
    } else if (d.kind == "block") {
        if (!j.contains("layers"))
            throw FormatError("block layer needs a \"layers\" array");
        for (const auto& e : j.at("layers")) d.layers.push_back(layer_from_json(e));
    } else if (d.kind != "batchnorm" && d.kind != "relu") {
        throw FormatError("unknown layer kind in architecture json: " + d.kind);
    }
    return d;
}

struct ShapeCursor {
    int c = 0, h = 0, w = 0;
};

std::vector<std::unique_ptr<Layer>> build_layers(const std::vector<LayerDesc>& descs,
                                                 const FilterConfig& config,
                                                 ShapeCursor& cur);

std::unique_ptr<Layer> build_one(const LayerDesc& d, const FilterConfig& config,
                                 ShapeCursor& cur) {
    if (d.kind == "conv") {
        Conv2dGeometry geom;
        geom.in_channels = cur.c;
        geom.out_channels = d.depthwise
                                ? (d.out_channels > 0 ? d.out_channels : cur.c)
                                : d.out_channels;
        geom.kernel_size = d.kernel_size;
        geom.stride = d.stride;
        geom.padding = d.padding;
        geom.depthwise = d.depthwise;
        geom.validate();
        int oh = (cur.h + 2 * d.padding - d.kernel_size) / d.stride + 1;
        int ow = (cur.w + 2 * d.padding - d.kernel_size) / d.stride + 1;
        if (cur.h + 2 * d.padding < d.kernel_size || oh <= 0 || ow <= 0)
            throw ConfigError("conv output would be empty at " +
                              std::to_string(cur.h) + "x" + std::to_string(cur.w));
        std::vector<SymmetryClass> assignments =
            d.symmetrizable
                ? allocate_filters(config, geom.out_channels)
                : std::vector<SymmetryClass>(geom.out_channels, SymmetryClass::Standard);
        auto layer =
            std::make_unique<ConvLayer>(geom, std::move(assignments), d.bias);
        cur.c = geom.out_channels;
        cur.h = oh;
        cur.w = ow;
        return layer;
    }
    if (d.kind == "batchnorm") return std::make_unique<BatchNormLayer>(cur.c);
    if (d.kind == "relu") return std::make_unique<ReluLayer>();
    if (d.kind == "maxpool" || d.kind == "avgpool") {
        if (d.kind == "avgpool" && d.global) {
            cur.h = 1;
            cur.w = 1;
            return std::make_unique<AvgPoolLayer>();
        }
        if (cur.h < d.size || cur.w < d.size)
            throw ConfigError(d.kind + " window larger than its input " +
                              std::to_string(cur.h) + "x" + std::to_string(cur.w));
        cur.h = (cur.h - d.size) / d.stride + 1;
        cur.w = (cur.w - d.size) / d.stride + 1;
        if (d.kind == "maxpool")
            return std::make_unique<MaxPoolLayer>(d.size, d.stride);
        return std::make_unique<AvgPoolLayer>(d.size, d.stride);
    }
    if (d.kind == "fc") {
        int in_features = cur.c * cur.h * cur.w;
        auto layer = std::make_unique<FcLayer>(in_features, d.out_features);
        cur.c = d.out_features;
        cur.h = 1;
        cur.w = 1;
        return layer;
    }
    if (d.kind == "block") {
        const int in_c = cur.c, in_h = cur.h, in_w = cur.w;
        auto inner = build_layers(d.layers, config, cur);
        ResidualBlock::Shortcut sc = ResidualBlock::Shortcut::Identity;
        int stride = 1;
        if (cur.c != in_c || cur.h != in_h || cur.w != in_w) {
            sc = ResidualBlock::Shortcut::PadSubsample;
            stride = (cur.h == in_h) ? 1 : 2;
            if (cur.h != (in_h + stride - 1) / stride ||
                cur.w != (in_w + stride - 1) / stride || cur.c < in_c)
                throw ConfigError(
                    "residual block shape change is not a stride-2 subsample with "
                    "channel growth");
        }
        return std::make_unique<ResidualBlock>(std::move(inner), sc, in_c, cur.c,
                                               stride);
    }
    throw ConfigError("unknown layer kind: " + d.kind);
}

std::vector<std::unique_ptr<Layer>> build_layers(const std::vector<LayerDesc>& descs,
                                                 const FilterConfig& config,
                                                 ShapeCursor& cur) {
    std::vector<std::unique_ptr<Layer>> out;
    out.reserve(descs.size());
    for (const auto& d : descs) out.push_back(build_one(d, config, cur));
    return out;
}

LayerDesc conv_desc(int out_channels, int k, int stride, int padding, bool sym,
                    bool depthwise = false) {
    LayerDesc d;
    d.kind = "conv";
    d.out_channels = out_channels;
    d.kernel_size = k;
    d.stride = stride;
    d.padding = padding;
    d.depthwise = depthwise;
    d.bias = false;
    d.symmetrizable = sym;
    return d;
}

LayerDesc plain(const char* kind) {
    LayerDesc d;
    d.kind = kind;
    return d;
}

}  // namespace

std::string ArchSpec::to_json() const {
    Json j;
    j["name"] = name;
    j["input_shape"] = input_shape;
    j["classes"] = classes;
    Json arr = Json::array();
    for (const auto& l : layers) arr.push_back(layer_to_json(l));
    j["layers"] = std::move(arr);
    return j.dump(2);
}

ArchSpec ArchSpec::from_json(const std::string& text) {
    Json j;
    try {
        j = Json::parse(text);
    } catch (const std::exception& e) {
        throw FormatError(std::string("architecture json does not parse: ") + e.what());
    }
    ArchSpec spec;
    spec.name = j.value("name", "");
    if (!j.contains("input_shape") || !j.at("input_shape").is_array() ||
        j.at("input_shape").size() != 3)
        throw FormatError("architecture json needs input_shape = [channels, h, w]");
    for (int i = 0; i < 3; ++i) spec.input_shape[i] = j.at("input_shape")[i].get<int>();
    spec.classes = j.value("classes", 0);
    if (spec.classes <= 0)
        throw FormatError("architecture json needs a positive class count");
    if (!j.contains("layers") || !j.at("layers").is_array())
        throw FormatError("architecture json needs a layers array");
    for (const auto& e : j.at("layers")) spec.layers.push_back(layer_from_json(e));
    return spec;
}

ArchSpec ArchSpec::load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("cannot open architecture file: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return from_json(ss.str());
}

Model build_model(const ArchSpec& spec, const FilterConfig& config) {
    if (spec.input_shape[0] <= 0 || spec.input_shape[1] <= 0 || spec.input_shape[2] <= 0)
        throw ConfigError("architecture input shape must be positive");
    ShapeCursor cur{spec.input_shape[0], spec.input_shape[1], spec.input_shape[2]};
    Model model;
    for (const auto& d : spec.layers) model.add(build_one(d, config, cur));
    return model;
}

std::array<int, 3> dataset_input_shape(const std::string& dataset) {
    if (dataset == "cifar10") return {3, 32, 32};
    if (dataset == "mnist") return {1, 28, 28};
    throw ConfigError("unknown dataset: " + dataset + " (choices: cifar10, mnist)");
}

ArchSpec resnet_cifar_spec(int depth, const std::string& dataset, int classes) {
    if (depth < 8 || (depth - 2) % 6 != 0)
        throw ConfigError("residual depth must be 6n+2, got " + std::to_string(depth));
    const int n = (depth - 2) / 6;
    ArchSpec spec;
    spec.name = "resnet" + std::to_string(depth);
    spec.input_shape = dataset_input_shape(dataset);
    spec.classes = classes;

    spec.layers.push_back(conv_desc(16, 3, 1, 1, true));
    spec.layers.push_back(plain("batchnorm"));
    spec.layers.push_back(plain("relu"));
    const int widths[3] = {16, 32, 64};
    for (int stage = 0; stage < 3; ++stage) {
        for (int b = 0; b < n; ++b) {
            LayerDesc block = plain("block");
            const int stride = (stage > 0 && b == 0) ? 2 : 1;
            block.layers.push_back(conv_desc(widths[stage], 3, stride, 1, true));
            block.layers.push_back(plain("batchnorm"));
            block.layers.push_back(plain("relu"));
            block.layers.push_back(conv_desc(widths[stage], 3, 1, 1, true));
            block.layers.push_back(plain("batchnorm"));
            spec.layers.push_back(std::move(block));
        }
    }
    LayerDesc gap = plain("avgpool");
    gap.global = true;
    spec.layers.push_back(std::move(gap));
    LayerDesc fc = plain("fc");
    fc.out_features = classes;
    spec.layers.push_back(std::move(fc));
    return spec;
}

ArchSpec small_cnn_spec(const std::string& dataset, int classes) {
    ArchSpec spec;
    spec.name = "small_cnn";
    spec.input_shape = dataset_input_shape(dataset);
    spec.classes = classes;
    for (int rep = 0; rep < 2; ++rep) {
        spec.layers.push_back(conv_desc(16, 3, 1, 1, true));
        spec.layers.push_back(plain("batchnorm"));
        spec.layers.push_back(plain("relu"));
        LayerDesc pool = plain("maxpool");
        pool.size = 2;
        pool.stride = 2;
        spec.layers.push_back(std::move(pool));
    }
    LayerDesc fc = plain("fc");
    fc.out_features = classes;
    spec.layers.push_back(std::move(fc));
    return spec;
}

ArchSpec depthwise_net_spec(const std::string& dataset, int classes,
                            int replace_up_to) {
    constexpr int kDepthwiseLayers = 4;
    if (replace_up_to < 0 || replace_up_to > kDepthwiseLayers)
        throw ConfigError("replace_up_to must be in [0, " +
                          std::to_string(kDepthwiseLayers) + "], got " +
                          std::to_string(replace_up_to));
    ArchSpec spec;
    spec.name = "dwnet";
    spec.input_shape = dataset_input_shape(dataset);
    spec.classes = classes;

    spec.layers.push_back(conv_desc(16, 3, 2, 1, false));
    spec.layers.push_back(plain("batchnorm"));
    spec.layers.push_back(plain("relu"));

    struct Pair {
        int dw_in, dw_stride, pw_out;
    };
    const Pair pairs[kDepthwiseLayers] = {
        {16, 1, 64}, {64, 2, 128}, {128, 1, 256}, {256, 2, 256}};
    for (int i = 0; i < kDepthwiseLayers; ++i) {
        spec.layers.push_back(conv_desc(pairs[i].dw_in, 3, pairs[i].dw_stride, 1,
                                        i < replace_up_to, /*depthwise=*/true));
        spec.layers.push_back(plain("batchnorm"));
        spec.layers.push_back(plain("relu"));
        spec.layers.push_back(conv_desc(pairs[i].pw_out, 1, 1, 0, false));
        spec.layers.push_back(plain("batchnorm"));
        spec.layers.push_back(plain("relu"));
    }
    LayerDesc gap = plain("avgpool");
    gap.global = true;
    spec.layers.push_back(std::move(gap));
    LayerDesc fc = plain("fc");
    fc.out_features = classes;
    spec.layers.push_back(std::move(fc));
    return spec;
}

bool is_builtin_arch(const std::string& name) {
    if (name == "small_cnn" || name == "dwnet") return true;
    if (name.rfind("resnet", 0) == 0 && name.size() > 6)
        return name.find_first_not_of("0123456789", 6) == std::string::npos;
    return false;
}

ArchSpec builtin_arch(const std::string& name, const std::string& dataset,
                      int classes, int replace_up_to) {
    if (name == "small_cnn") return small_cnn_spec(dataset, classes);
    if (name == "dwnet") return depthwise_net_spec(dataset, classes, replace_up_to);
    if (name.rfind("resnet", 0) == 0 && name.size() > 6 &&
        name.find_first_not_of("0123456789", 6) == std::string::npos)
        return resnet_cifar_spec(std::stoi(name.substr(6)), dataset, classes);
    throw ConfigError("unknown architecture '" + name +
                      "'; built-ins: resnet20, resnet32, resnet44, resnet56, "
                      "small_cnn, dwnet (or pass a path to an architecture json)");
}

}  // namespace symconv
