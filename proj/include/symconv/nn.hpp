#pragma once

#include <memory>
#include <string>
#include <vector>

#include "symconv/conv.hpp"
#include "symconv/rng.hpp"
#include "symconv/symmetry.hpp"
#include "symconv/tensor.hpp"

namespace symconv {

// Per-layer allocation of filters to symmetry classes, as ordered blocks of
// fractions. Named schemes:
//   type_i    = h 1/4, v 1/4, hvd 1/4, anti_hvd 1/4
//   type_iia  = hvd 1/2, anti_hvd 1/2      type_iib = anti_hvd    type_iic = hvd
//   type_iiia = h 1/2, v 1/2               type_iiib = h          type_iiic = v
// plus "standard" and custom mixes written "class:frac,class:frac,...".
struct FilterConfig {
    std::vector<std::pair<SymmetryClass, double>> blocks;
    std::string token = "standard";

    bool is_standard() const;
    static FilterConfig standard();
    static FilterConfig from_token(const std::string& token);
};

// Contiguous class blocks in the listed order; non-divisible counts are
// settled by largest remainder, ties to earlier blocks.
std::vector<SymmetryClass> allocate_filters(const FilterConfig& config,
                                            int out_channels);

// ---------------------------------------------------------------------------
// Layers. Forward caches whatever backward needs; backward consumes the cache
// from the latest forward and returns the input gradient. Backward passes are
// hand-written per layer.

struct ParamRef {
    std::string name;
    std::vector<float>* value;
    std::vector<float>* grad;
    bool decay;  // weight decay applies to conv free coefficients and fc weights only
};

// Named per-layer vectors persisted in checkpoints (params + BN running stats).
struct StateRef {
    std::string name;
    std::vector<float>* data;
};

class ConvLayer;

class Layer {
public:
    virtual ~Layer() = default;
    virtual const char* kind() const = 0;
    virtual Tensor forward(const Tensor& x, bool training) = 0;
    virtual Tensor backward(const Tensor& grad_out) = 0;
    virtual void collect_params(const std::string& prefix, std::vector<ParamRef>& out) {}
    virtual void collect_state(const std::string& prefix, std::vector<StateRef>& out) {}
    virtual void collect_convs(std::vector<ConvLayer*>& out) {}
    // He-style normal init where the layer has weights to draw; layers are
    // visited in model order so the draw sequence is reproducible.
    virtual void init_params(Rng& rng) {}
};

class ConvLayer : public Layer {
public:
    ConvLayer(Conv2dGeometry geom, std::vector<SymmetryClass> assignments, bool bias);
    const char* kind() const override { return "conv"; }
    Tensor forward(const Tensor& x, bool training) override;
    Tensor backward(const Tensor& grad_out) override;
    void collect_params(const std::string& prefix, std::vector<ParamRef>& out) override;
    void collect_state(const std::string& prefix, std::vector<StateRef>& out) override;
    void collect_convs(std::vector<ConvLayer*>& out) override { out.push_back(this); }
    // Draws each filter slice as a full k x k kernel from
    // N(0, 2 / (in_slices * k^2)) and projects it onto the free coefficients.
    void init_params(Rng& rng) override;

    ConstrainedConv2dF& impl() { return impl_; }
    const ConstrainedConv2dF& impl() const { return impl_; }
    // Input of the latest forward; lets callers probe per-layer shapes.
    const Tensor& cached_input() const { return cached_x_; }

private:
    ConstrainedConv2dF impl_;
    Tensor cached_x_;
    std::vector<float> grad_free_;
    std::vector<float> grad_bias_;
};

template <typename T>
struct BatchNormCache {
    TensorT<T> xhat;
    std::vector<T> invstd;
    std::vector<T> mean;
    std::vector<T> var;  // biased batch variance
};

// Batch-statistics normalization over (N,H,W) per channel, biased variance.
template <typename T>
TensorT<T> batchnorm_forward(const TensorT<T>& x, const std::vector<T>& gamma,
                             const std::vector<T>& beta, T eps,
                             BatchNormCache<T>* cache);

template <typename T>
struct BatchNormGrads {
    TensorT<T> grad_x;
    std::vector<T> grad_gamma;
    std::vector<T> grad_beta;
};

template <typename T>
BatchNormGrads<T> batchnorm_backward(const TensorT<T>& grad_out,
                                     const BatchNormCache<T>& cache,
                                     const std::vector<T>& gamma);

class BatchNormLayer : public Layer {
public:
    explicit BatchNormLayer(int channels);
    const char* kind() const override { return "batchnorm"; }
    // Training mode normalizes with batch statistics and updates the running
    // estimates as running = 0.9*running + 0.1*batch; inference mode uses the
    // running estimates. eps = 1e-5.
    Tensor forward(const Tensor& x, bool training) override;
    Tensor backward(const Tensor& grad_out) override;
    void collect_params(const std::string& prefix, std::vector<ParamRef>& out) override;
    void collect_state(const std::string& prefix, std::vector<StateRef>& out) override;

    int channels() const { return channels_; }
    std::vector<float>& gamma() { return gamma_; }
    std::vector<float>& beta() { return beta_; }
    std::vector<float>& running_mean() { return running_mean_; }
    std::vector<float>& running_var() { return running_var_; }

    static constexpr float kEps = 1e-5f;
    static constexpr float kRunningKeep = 0.9f;

private:
    int channels_;
    std::vector<float> gamma_, beta_, running_mean_, running_var_;
    std::vector<float> grad_gamma_, grad_beta_;
    BatchNormCache<float> cache_;
};

class ReluLayer : public Layer {
public:
    const char* kind() const override { return "relu"; }
    Tensor forward(const Tensor& x, bool training) override;
    Tensor backward(const Tensor& grad_out) override;

private:
    std::vector<char> mask_;
    Shape shape_;
};

class MaxPoolLayer : public Layer {
public:
    MaxPoolLayer(int size, int stride);
    const char* kind() const override { return "maxpool"; }
    Tensor forward(const Tensor& x, bool training) override;
    Tensor backward(const Tensor& grad_out) override;

private:
    int size_, stride_;
    Shape in_shape_;
    std::vector<std::size_t> argmax_;  // flat input index per output element
};

class AvgPoolLayer : public Layer {
public:
    // Global pooling when global=true; otherwise a size x size window.
    AvgPoolLayer();  // global
    AvgPoolLayer(int size, int stride);
    const char* kind() const override { return "avgpool"; }
    Tensor forward(const Tensor& x, bool training) override;
    Tensor backward(const Tensor& grad_out) override;

private:
    bool global_;
    int size_ = 0, stride_ = 0;
    Shape in_shape_;
};

// Fully connected layer; flattens all but the batch dimension.
class FcLayer : public Layer {
public:
    FcLayer(int in_features, int out_features);
    const char* kind() const override { return "fc"; }
    Tensor forward(const Tensor& x, bool training) override;
    Tensor backward(const Tensor& grad_out) override;
    void collect_params(const std::string& prefix, std::vector<ParamRef>& out) override;
    void collect_state(const std::string& prefix, std::vector<StateRef>& out) override;
    void init_params(Rng& rng) override;  // N(0, 2/in_features) weights, zero bias

    int in_features() const { return in_; }
    int out_features() const { return out_; }
    std::vector<float>& weights() { return w_; }  // out x in, row-major
    std::vector<float>& bias_values() { return b_; }

private:
    int in_, out_;
    std::vector<float> w_, b_;
    std::vector<float> grad_w_, grad_b_;
    Tensor cached_x_;
    Shape in_shape_;
};

// Residual block: out = relu(inner(x) + shortcut(x)). The shortcut is either
// the identity or, when the inner path changes shape, a stride-2 spatial
// subsample whose extra output channels are zero (no projection convs).
class ResidualBlock : public Layer {
public:
    enum class Shortcut { Identity, PadSubsample };
    ResidualBlock(std::vector<std::unique_ptr<Layer>> inner, Shortcut shortcut,
                  int in_channels, int out_channels, int spatial_stride);
    const char* kind() const override { return "block"; }
    Tensor forward(const Tensor& x, bool training) override;
    Tensor backward(const Tensor& grad_out) override;
    void collect_params(const std::string& prefix, std::vector<ParamRef>& out) override;
    void collect_state(const std::string& prefix, std::vector<StateRef>& out) override;
    void collect_convs(std::vector<ConvLayer*>& out) override;
    void init_params(Rng& rng) override;

    const std::vector<std::unique_ptr<Layer>>& inner() const { return inner_; }

private:
    Tensor shortcut_forward(const Tensor& x) const;
    Tensor shortcut_backward(const Tensor& grad) const;

    std::vector<std::unique_ptr<Layer>> inner_;
    Shortcut shortcut_;
    int in_channels_, out_channels_, stride_;
    Shape in_shape_;
    std::vector<char> relu_mask_;
};

// ---------------------------------------------------------------------------

template <typename T>
struct SoftmaxCEResult {
    T loss = T(0);          // mean over the batch
    TensorT<T> grad_logits; // d(mean loss)/d logits
    int correct = 0;        // argmax == label count
};

template <typename T>
SoftmaxCEResult<T> softmax_crossentropy(const TensorT<T>& logits,
                                        const std::vector<int>& labels);

// ---------------------------------------------------------------------------

struct ModelParamCount {
    long long total_free = 0;           // trainable params with tying in effect
    long long total_standard = 0;       // same model with all convs unconstrained
    long long conv_free_weights = 0;
    long long conv_standard_weights = 0;
    double total_ratio() const {
        return static_cast<double>(total_free) / static_cast<double>(total_standard);
    }
    double conv_weight_ratio() const {
        return static_cast<double>(conv_free_weights) /
               static_cast<double>(conv_standard_weights);
    }
};

class Model {
public:
    Model() = default;
    Model(Model&&) = default;
    Model& operator=(Model&&) = default;

    void add(std::unique_ptr<Layer> layer) { layers_.push_back(std::move(layer)); }
    const std::vector<std::unique_ptr<Layer>>& layers() const { return layers_; }

    Tensor forward(const Tensor& x, bool training);
    Tensor backward(const Tensor& grad_logits);

    std::vector<ParamRef> params();
    std::vector<StateRef> state();
    std::vector<ConvLayer*> conv_layers();

    ModelParamCount count_params();

private:
    std::vector<std::unique_ptr<Layer>> layers_;
};

}  // namespace symconv
