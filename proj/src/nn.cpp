#include "symconv/nn.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <sstream>

#include "symconv/error.hpp"

namespace symconv {

namespace {

const std::vector<std::pair<std::string, std::vector<std::pair<SymmetryClass, double>>>>
    kNamedConfigs = {
        {"standard", {{SymmetryClass::Standard, 1.0}}},
        {"type_i",
         {{SymmetryClass::H, 0.25},
          {SymmetryClass::V, 0.25},
          {SymmetryClass::HVD, 0.25},
          {SymmetryClass::AntiHVD, 0.25}}},
        {"type_iia", {{SymmetryClass::HVD, 0.5}, {SymmetryClass::AntiHVD, 0.5}}},
        {"type_iib", {{SymmetryClass::AntiHVD, 1.0}}},
        {"type_iic", {{SymmetryClass::HVD, 1.0}}},
        {"type_iiia", {{SymmetryClass::H, 0.5}, {SymmetryClass::V, 0.5}}},
        {"type_iiib", {{SymmetryClass::H, 1.0}}},
        {"type_iiic", {{SymmetryClass::V, 1.0}}},
};

void validate_blocks(const std::vector<std::pair<SymmetryClass, double>>& blocks) {
    if (blocks.empty()) throw ConfigError("filter config has no blocks");
    double sum = 0.0;
    for (const auto& [cls, frac] : blocks) {
        if (!(frac > 0.0) || frac > 1.0) {
            std::ostringstream os;
            os << "filter config fraction out of range for " << to_token(cls) << ": "
               << frac;
            throw ConfigError(os.str());
        }
        sum += frac;
    }
    if (std::abs(sum - 1.0) > 1e-6) {
        std::ostringstream os;
        os << "filter config fractions sum to " << sum << ", expected 1";
        throw ConfigError(os.str());
    }
}

}  // namespace

bool FilterConfig::is_standard() const {
    return std::all_of(blocks.begin(), blocks.end(), [](const auto& b) {
        return b.first == SymmetryClass::Standard;
    });
}

FilterConfig FilterConfig::standard() {
    return from_token("standard");
}

FilterConfig FilterConfig::from_token(const std::string& token) {
    FilterConfig cfg;
    cfg.token = token;
    for (const auto& [name, blocks] : kNamedConfigs) {
        if (name == token) {
            cfg.blocks = blocks;
            return cfg;
        }
    }
    // Custom mix: "class:frac,class:frac,...".
    std::stringstream ss(token);
    std::string part;
    while (std::getline(ss, part, ',')) {
        auto colon = part.find(':');
        if (colon == std::string::npos)
            throw ConfigError("bad filter config token: " + token);
        SymmetryClass cls = class_from_token(part.substr(0, colon));
        double frac = 0.0;
        try {
            frac = std::stod(part.substr(colon + 1));
        } catch (const std::exception&) {
            throw ConfigError("bad fraction in filter config token: " + token);
        }
        cfg.blocks.emplace_back(cls, frac);
    }
    validate_blocks(cfg.blocks);
    return cfg;
}

std::vector<SymmetryClass> allocate_filters(const FilterConfig& config,
                                            int out_channels) {
    if (out_channels <= 0)
        throw ConfigError("allocate_filters needs a positive filter count");
    validate_blocks(config.blocks);

    const std::size_t n = config.blocks.size();
    std::vector<int> counts(n);
    std::vector<double> remainders(n);
    int assigned = 0;
    for (std::size_t i = 0; i < n; ++i) {
        double exact = config.blocks[i].second * out_channels;
        counts[i] = static_cast<int>(std::floor(exact));
        remainders[i] = exact - counts[i];
        assigned += counts[i];
    }
    int leftover = out_channels - assigned;
    if (leftover < 0 || leftover > static_cast<int>(n))
        throw ConfigError("filter config fractions do not partition the layer");
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    // Largest remainder first; ties go to earlier blocks (stable sort keeps
    // the listed order for equal remainders).
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return remainders[a] > remainders[b];
    });
    for (int i = 0; i < leftover; ++i) counts[order[i]] += 1;

    std::vector<SymmetryClass> assignments;
    assignments.reserve(out_channels);
    for (std::size_t i = 0; i < n; ++i)
        assignments.insert(assignments.end(), counts[i], config.blocks[i].first);
    return assignments;
}

// ---------------------------------------------------------------------------
// ConvLayer

ConvLayer::ConvLayer(Conv2dGeometry geom, std::vector<SymmetryClass> assignments,
                     bool bias)
    : impl_(geom, std::move(assignments), bias) {}

Tensor ConvLayer::forward(const Tensor& x, bool) {
    cached_x_ = x;
    return impl_.forward(x);
}

Tensor ConvLayer::backward(const Tensor& grad_out) {
    auto grads = impl_.backward(cached_x_, grad_out);
    grad_free_ = std::move(grads.grad_free);
    grad_bias_ = std::move(grads.grad_bias);
    return std::move(grads.grad_x);
}

void ConvLayer::collect_params(const std::string& prefix, std::vector<ParamRef>& out) {
    grad_free_.resize(impl_.free_weights().size(), 0.0f);
    out.push_back({prefix + "free", &impl_.free_weights(), &grad_free_, true});
    if (impl_.has_bias()) {
        grad_bias_.resize(impl_.bias().size(), 0.0f);
        out.push_back({prefix + "bias", &impl_.bias(), &grad_bias_, false});
    }
}

void ConvLayer::collect_state(const std::string& prefix, std::vector<StateRef>& out) {
    out.push_back({prefix + "free", &impl_.free_weights()});
    if (impl_.has_bias()) out.push_back({prefix + "bias", &impl_.bias()});
}

void ConvLayer::init_params(Rng& rng) {
    const auto& geom = impl_.geometry();
    const int kk = geom.kernel_size * geom.kernel_size;
    const int slices = geom.in_slices();
    const double stddev = std::sqrt(2.0 / (static_cast<double>(slices) * kk));
    std::vector<float> full(kk);
    for (int f = 0; f < geom.out_channels; ++f) {
        const TyingMap& map = impl_.map_for_filter(f);
        float* free = impl_.free_weights().data() + impl_.filter_offset(f);
        for (int s = 0; s < slices; ++s) {
            for (int p = 0; p < kk; ++p)
                full[p] = static_cast<float>(rng.normal() * stddev);
            float* slot = free + static_cast<std::size_t>(s) * map.free_count();
            for (int o = 0; o < map.free_count(); ++o) {
                float acc = 0.0f;
                for (auto [pos, sign] : map.orbits()[o].members)
                    acc += static_cast<float>(sign) * full[pos];
                slot[o] = acc / static_cast<float>(map.orbits()[o].size());
            }
        }
    }
    if (impl_.has_bias()) std::fill(impl_.bias().begin(), impl_.bias().end(), 0.0f);
}

// ---------------------------------------------------------------------------
// Batch normalization

template <typename T>
TensorT<T> batchnorm_forward(const TensorT<T>& x, const std::vector<T>& gamma,
                             const std::vector<T>& beta, T eps,
                             BatchNormCache<T>* cache) {
    if (x.shape().size() != 4)
        throw ShapeError("batchnorm expects a rank-4 input, got rank " +
                         std::to_string(x.shape().size()));
    const std::size_t N = x.shape()[0], C = x.shape()[1], H = x.shape()[2],
                      W = x.shape()[3];
    if (gamma.size() != C || beta.size() != C)
        throw ShapeError("batchnorm parameter size " + std::to_string(gamma.size()) +
                         " does not match channel count " + std::to_string(C));
    const std::size_t plane = H * W;
    const std::size_t sample = C * plane;
    const T m = static_cast<T>(N * plane);

    std::vector<T> mean(C), var(C), invstd(C);
    for (std::size_t c = 0; c < C; ++c) {
        T sum = 0;
        for (std::size_t n = 0; n < N; ++n) {
            const T* p = x.data() + n * sample + c * plane;
            for (std::size_t i = 0; i < plane; ++i) sum += p[i];
        }
        mean[c] = sum / m;
        T sq = 0;
        for (std::size_t n = 0; n < N; ++n) {
            const T* p = x.data() + n * sample + c * plane;
            for (std::size_t i = 0; i < plane; ++i) {
                T d = p[i] - mean[c];
                sq += d * d;
            }
        }
        var[c] = sq / m;  // biased
        invstd[c] = T(1) / std::sqrt(var[c] + eps);
    }

    TensorT<T> xhat = TensorT<T>::zeros(x.shape());
    TensorT<T> y = TensorT<T>::zeros(x.shape());
    for (std::size_t n = 0; n < N; ++n) {
        for (std::size_t c = 0; c < C; ++c) {
            const T* p = x.data() + n * sample + c * plane;
            T* xh = xhat.data() + n * sample + c * plane;
            T* yo = y.data() + n * sample + c * plane;
            const T g = gamma[c], b = beta[c], is = invstd[c], mu = mean[c];
            for (std::size_t i = 0; i < plane; ++i) {
                xh[i] = (p[i] - mu) * is;
                yo[i] = g * xh[i] + b;
            }
        }
    }
    if (cache) {
        cache->xhat = std::move(xhat);
        cache->invstd = std::move(invstd);
        cache->mean = std::move(mean);
        cache->var = std::move(var);
    }
    return y;
}

template <typename T>
BatchNormGrads<T> batchnorm_backward(const TensorT<T>& grad_out,
                                     const BatchNormCache<T>& cache,
                                     const std::vector<T>& gamma) {
    const auto& xhat = cache.xhat;
    if (grad_out.shape() != xhat.shape())
        throw ShapeError("batchnorm backward shape mismatch");
    const std::size_t N = xhat.shape()[0], C = xhat.shape()[1], H = xhat.shape()[2],
                      W = xhat.shape()[3];
    const std::size_t plane = H * W;
    const std::size_t sample = C * plane;
    const T m = static_cast<T>(N * plane);

    BatchNormGrads<T> out;
    out.grad_x = TensorT<T>::zeros(xhat.shape());
    out.grad_gamma.assign(C, T(0));
    out.grad_beta.assign(C, T(0));

    for (std::size_t c = 0; c < C; ++c) {
        T sum_dy = 0, sum_dy_xhat = 0;
        for (std::size_t n = 0; n < N; ++n) {
            const T* dy = grad_out.data() + n * sample + c * plane;
            const T* xh = xhat.data() + n * sample + c * plane;
            for (std::size_t i = 0; i < plane; ++i) {
                sum_dy += dy[i];
                sum_dy_xhat += dy[i] * xh[i];
            }
        }
        out.grad_beta[c] = sum_dy;
        out.grad_gamma[c] = sum_dy_xhat;
        const T scale = gamma[c] * cache.invstd[c];
        const T mean_dy = sum_dy / m;
        const T mean_dy_xhat = sum_dy_xhat / m;
        for (std::size_t n = 0; n < N; ++n) {
            const T* dy = grad_out.data() + n * sample + c * plane;
            const T* xh = xhat.data() + n * sample + c * plane;
            T* dx = out.grad_x.data() + n * sample + c * plane;
            for (std::size_t i = 0; i < plane; ++i)
                dx[i] = scale * (dy[i] - mean_dy - xh[i] * mean_dy_xhat);
        }
    }
    return out;
}

template TensorT<float> batchnorm_forward<float>(const TensorT<float>&,
                                                 const std::vector<float>&,
                                                 const std::vector<float>&, float,
                                                 BatchNormCache<float>*);
template TensorT<double> batchnorm_forward<double>(const TensorT<double>&,
                                                   const std::vector<double>&,
                                                   const std::vector<double>&, double,
                                                   BatchNormCache<double>*);
template BatchNormGrads<float> batchnorm_backward<float>(const TensorT<float>&,
                                                         const BatchNormCache<float>&,
                                                         const std::vector<float>&);
template BatchNormGrads<double> batchnorm_backward<double>(
    const TensorT<double>&, const BatchNormCache<double>&, const std::vector<double>&);

BatchNormLayer::BatchNormLayer(int channels) : channels_(channels) {
    if (channels <= 0)
        throw ConfigError("batchnorm needs a positive channel count");
    gamma_.assign(channels, 1.0f);
    beta_.assign(channels, 0.0f);
    running_mean_.assign(channels, 0.0f);
    running_var_.assign(channels, 1.0f);
    grad_gamma_.assign(channels, 0.0f);
    grad_beta_.assign(channels, 0.0f);
}

Tensor BatchNormLayer::forward(const Tensor& x, bool training) {
    if (x.shape().size() != 4 || x.shape()[1] != static_cast<std::size_t>(channels_))
        throw ShapeError("batchnorm channel mismatch: layer has " +
                         std::to_string(channels_) + " channels");
    if (training) {
        Tensor y = batchnorm_forward<float>(x, gamma_, beta_, kEps, &cache_);
        for (int c = 0; c < channels_; ++c) {
            running_mean_[c] =
                kRunningKeep * running_mean_[c] + (1.0f - kRunningKeep) * cache_.mean[c];
            running_var_[c] =
                kRunningKeep * running_var_[c] + (1.0f - kRunningKeep) * cache_.var[c];
        }
        return y;
    }
    const std::size_t N = x.shape()[0], C = x.shape()[1], plane = x.shape()[2] * x.shape()[3];
    Tensor y = Tensor::zeros(x.shape());
    for (std::size_t n = 0; n < N; ++n) {
        for (std::size_t c = 0; c < C; ++c) {
            const float is = 1.0f / std::sqrt(running_var_[c] + kEps);
            const float g = gamma_[c], b = beta_[c], mu = running_mean_[c];
            const float* p = x.data() + (n * C + c) * plane;
            float* yo = y.data() + (n * C + c) * plane;
            for (std::size_t i = 0; i < plane; ++i) yo[i] = g * (p[i] - mu) * is + b;
        }
    }
    return y;
}

Tensor BatchNormLayer::backward(const Tensor& grad_out) {
    if (cache_.xhat.size() == 0)
        throw Error("batchnorm backward called without a training-mode forward");
    auto grads = batchnorm_backward<float>(grad_out, cache_, gamma_);
    grad_gamma_ = std::move(grads.grad_gamma);
    grad_beta_ = std::move(grads.grad_beta);
    return std::move(grads.grad_x);
}

void BatchNormLayer::collect_params(const std::string& prefix,
                                    std::vector<ParamRef>& out) {
    out.push_back({prefix + "gamma", &gamma_, &grad_gamma_, false});
    out.push_back({prefix + "beta", &beta_, &grad_beta_, false});
}

void BatchNormLayer::collect_state(const std::string& prefix,
                                   std::vector<StateRef>& out) {
    out.push_back({prefix + "gamma", &gamma_});
    out.push_back({prefix + "beta", &beta_});
    out.push_back({prefix + "running_mean", &running_mean_});
    out.push_back({prefix + "running_var", &running_var_});
}

// ---------------------------------------------------------------------------
// ReLU

Tensor ReluLayer::forward(const Tensor& x, bool) {
    shape_ = x.shape();
    mask_.assign(x.size(), 0);
    Tensor y = Tensor::zeros(x.shape());
    for (std::size_t i = 0; i < x.size(); ++i) {
        if (x[i] > 0.0f) {
            y[i] = x[i];
            mask_[i] = 1;
        }
    }
    return y;
}

Tensor ReluLayer::backward(const Tensor& grad_out) {
    if (grad_out.shape() != shape_)
        throw ShapeError("relu backward shape mismatch");
    Tensor g = Tensor::zeros(shape_);
    for (std::size_t i = 0; i < g.size(); ++i)
        if (mask_[i]) g[i] = grad_out[i];
    return g;
}

// ---------------------------------------------------------------------------
// Pooling

MaxPoolLayer::MaxPoolLayer(int size, int stride) : size_(size), stride_(stride) {
    if (size <= 0 || stride <= 0)
        throw ConfigError("maxpool needs positive size and stride");
}

Tensor MaxPoolLayer::forward(const Tensor& x, bool) {
    if (x.shape().size() != 4)
        throw ShapeError("maxpool expects a rank-4 input");
    const std::size_t N = x.shape()[0], C = x.shape()[1], H = x.shape()[2],
                      W = x.shape()[3];
    if (H < static_cast<std::size_t>(size_) || W < static_cast<std::size_t>(size_))
        throw ShapeError("maxpool window larger than input");
    in_shape_ = x.shape();
    const std::size_t oh = (H - size_) / stride_ + 1;
    const std::size_t ow = (W - size_) / stride_ + 1;
    Tensor y = Tensor::zeros({N, C, oh, ow});
    argmax_.assign(y.size(), 0);
    std::size_t oi = 0;
    for (std::size_t n = 0; n < N; ++n) {
        for (std::size_t c = 0; c < C; ++c) {
            const float* plane = x.data() + (n * C + c) * H * W;
            for (std::size_t py = 0; py < oh; ++py) {
                for (std::size_t px = 0; px < ow; ++px, ++oi) {
                    // Ties keep the first maximum in row-major window order.
                    std::size_t best = (py * stride_) * W + px * stride_;
                    float bv = plane[best];
                    for (int i = 0; i < size_; ++i) {
                        for (int j = 0; j < size_; ++j) {
                            std::size_t idx = (py * stride_ + i) * W + px * stride_ + j;
                            if (plane[idx] > bv) {
                                bv = plane[idx];
                                best = idx;
                            }
                        }
                    }
                    y[oi] = bv;
                    argmax_[oi] = (n * C + c) * H * W + best;
                }
            }
        }
    }
    return y;
}

Tensor MaxPoolLayer::backward(const Tensor& grad_out) {
    if (grad_out.size() != argmax_.size())
        throw ShapeError("maxpool backward shape mismatch");
    Tensor g = Tensor::zeros(in_shape_);
    for (std::size_t i = 0; i < grad_out.size(); ++i)
        g[argmax_[i]] += grad_out[i];
    return g;
}

AvgPoolLayer::AvgPoolLayer() : global_(true) {}

AvgPoolLayer::AvgPoolLayer(int size, int stride)
    : global_(false), size_(size), stride_(stride) {
    if (size <= 0 || stride <= 0)
        throw ConfigError("avgpool needs positive size and stride");
}

Tensor AvgPoolLayer::forward(const Tensor& x, bool) {
    if (x.shape().size() != 4)
        throw ShapeError("avgpool expects a rank-4 input");
    in_shape_ = x.shape();
    const std::size_t N = x.shape()[0], C = x.shape()[1], H = x.shape()[2],
                      W = x.shape()[3];
    if (global_) {
        Tensor y = Tensor::zeros({N, C, 1, 1});
        const float inv = 1.0f / static_cast<float>(H * W);
        for (std::size_t n = 0; n < N; ++n) {
            for (std::size_t c = 0; c < C; ++c) {
                const float* plane = x.data() + (n * C + c) * H * W;
                float sum = 0.0f;
                for (std::size_t i = 0; i < H * W; ++i) sum += plane[i];
                y[n * C + c] = sum * inv;
            }
        }
        return y;
    }
    if (H < static_cast<std::size_t>(size_) || W < static_cast<std::size_t>(size_))
        throw ShapeError("avgpool window larger than input");
    const std::size_t oh = (H - size_) / stride_ + 1;
    const std::size_t ow = (W - size_) / stride_ + 1;
    Tensor y = Tensor::zeros({N, C, oh, ow});
    const float inv = 1.0f / static_cast<float>(size_ * size_);
    std::size_t oi = 0;
    for (std::size_t n = 0; n < N; ++n) {
        for (std::size_t c = 0; c < C; ++c) {
            const float* plane = x.data() + (n * C + c) * H * W;
            for (std::size_t py = 0; py < oh; ++py) {
                for (std::size_t px = 0; px < ow; ++px, ++oi) {
                    float sum = 0.0f;
                    for (int i = 0; i < size_; ++i)
                        for (int j = 0; j < size_; ++j)
                            sum += plane[(py * stride_ + i) * W + px * stride_ + j];
                    y[oi] = sum * inv;
                }
            }
        }
    }
    return y;
}

Tensor AvgPoolLayer::backward(const Tensor& grad_out) {
    const std::size_t N = in_shape_[0], C = in_shape_[1], H = in_shape_[2],
                      W = in_shape_[3];
    Tensor g = Tensor::zeros(in_shape_);
    if (global_) {
        if (grad_out.size() != N * C)
            throw ShapeError("avgpool backward shape mismatch");
        const float inv = 1.0f / static_cast<float>(H * W);
        for (std::size_t n = 0; n < N; ++n) {
            for (std::size_t c = 0; c < C; ++c) {
                float v = grad_out[n * C + c] * inv;
                float* plane = g.data() + (n * C + c) * H * W;
                for (std::size_t i = 0; i < H * W; ++i) plane[i] += v;
            }
        }
        return g;
    }
    const std::size_t oh = (H - size_) / stride_ + 1;
    const std::size_t ow = (W - size_) / stride_ + 1;
    if (grad_out.size() != N * C * oh * ow)
        throw ShapeError("avgpool backward shape mismatch");
    const float inv = 1.0f / static_cast<float>(size_ * size_);
    std::size_t oi = 0;
    for (std::size_t n = 0; n < N; ++n) {
        for (std::size_t c = 0; c < C; ++c) {
            float* plane = g.data() + (n * C + c) * H * W;
            for (std::size_t py = 0; py < oh; ++py)
                for (std::size_t px = 0; px < ow; ++px, ++oi) {
                    float v = grad_out[oi] * inv;
                    for (int i = 0; i < size_; ++i)
                        for (int j = 0; j < size_; ++j)
                            plane[(py * stride_ + i) * W + px * stride_ + j] += v;
                }
        }
    }
    return g;
}

// ---------------------------------------------------------------------------
// Fully connected

FcLayer::FcLayer(int in_features, int out_features)
    : in_(in_features), out_(out_features) {
    if (in_features <= 0 || out_features <= 0)
        throw ConfigError("fc needs positive feature counts");
    w_.assign(static_cast<std::size_t>(in_) * out_, 0.0f);
    b_.assign(out_, 0.0f);
    grad_w_.assign(w_.size(), 0.0f);
    grad_b_.assign(b_.size(), 0.0f);
}

Tensor FcLayer::forward(const Tensor& x, bool) {
    if (x.shape().empty()) throw ShapeError("fc expects a batched input");
    const std::size_t N = x.shape()[0];
    const std::size_t feat = x.size() / std::max<std::size_t>(N, 1);
    if (feat != static_cast<std::size_t>(in_))
        throw ShapeError("fc input has " + std::to_string(feat) +
                         " features per sample, layer expects " + std::to_string(in_));
    in_shape_ = x.shape();
    cached_x_ = x;
    Tensor y = Tensor::zeros({N, static_cast<std::size_t>(out_)});
    for (std::size_t n = 0; n < N; ++n) {
        const float* xs = x.data() + n * in_;
        for (int o = 0; o < out_; ++o) {
            const float* wr = w_.data() + static_cast<std::size_t>(o) * in_;
            float acc = b_[o];
            for (int i = 0; i < in_; ++i) acc += wr[i] * xs[i];
            y[n * out_ + o] = acc;
        }
    }
    return y;
}

Tensor FcLayer::backward(const Tensor& grad_out) {
    const std::size_t N = in_shape_[0];
    if (grad_out.shape().size() != 2 || grad_out.shape()[0] != N ||
        grad_out.shape()[1] != static_cast<std::size_t>(out_))
        throw ShapeError("fc backward shape mismatch");
    std::fill(grad_w_.begin(), grad_w_.end(), 0.0f);
    std::fill(grad_b_.begin(), grad_b_.end(), 0.0f);
    Tensor gx = Tensor::zeros(in_shape_);
    for (std::size_t n = 0; n < N; ++n) {  // samples outer: fixed accumulation order
        const float* xs = cached_x_.data() + n * in_;
        float* gxs = gx.data() + n * in_;
        for (int o = 0; o < out_; ++o) {
            const float g = grad_out[n * out_ + o];
            const float* wr = w_.data() + static_cast<std::size_t>(o) * in_;
            float* gwr = grad_w_.data() + static_cast<std::size_t>(o) * in_;
            grad_b_[o] += g;
            for (int i = 0; i < in_; ++i) {
                gwr[i] += g * xs[i];
                gxs[i] += g * wr[i];
            }
        }
    }
    return gx;
}

void FcLayer::collect_params(const std::string& prefix, std::vector<ParamRef>& out) {
    out.push_back({prefix + "weight", &w_, &grad_w_, true});
    out.push_back({prefix + "bias", &b_, &grad_b_, false});
}

void FcLayer::collect_state(const std::string& prefix, std::vector<StateRef>& out) {
    out.push_back({prefix + "weight", &w_});
    out.push_back({prefix + "bias", &b_});
}

void FcLayer::init_params(Rng& rng) {
    const double stddev = std::sqrt(2.0 / static_cast<double>(in_));
    for (auto& v : w_) v = static_cast<float>(rng.normal() * stddev);
    std::fill(b_.begin(), b_.end(), 0.0f);
}

// ---------------------------------------------------------------------------
// Residual block

ResidualBlock::ResidualBlock(std::vector<std::unique_ptr<Layer>> inner,
                             Shortcut shortcut, int in_channels, int out_channels,
                             int spatial_stride)
    : inner_(std::move(inner)),
      shortcut_(shortcut),
      in_channels_(in_channels),
      out_channels_(out_channels),
      stride_(spatial_stride) {
    if (inner_.empty()) throw ConfigError("residual block has no inner layers");
    if (shortcut_ == Shortcut::Identity &&
        (in_channels_ != out_channels_ || stride_ != 1))
        throw ConfigError("identity shortcut requires matching shape");
    if (out_channels_ < in_channels_)
        throw ConfigError("residual block cannot shrink channels");
}

Tensor ResidualBlock::shortcut_forward(const Tensor& x) const {
    if (shortcut_ == Shortcut::Identity) return x;
    const std::size_t N = x.shape()[0], H = x.shape()[2], W = x.shape()[3];
    const std::size_t oh = (H + stride_ - 1) / stride_;
    const std::size_t ow = (W + stride_ - 1) / stride_;
    Tensor s = Tensor::zeros({N, static_cast<std::size_t>(out_channels_), oh, ow});
    // The first in_channels carry the subsampled identity; the rest stay zero.
    for (std::size_t n = 0; n < N; ++n) {
        for (int c = 0; c < in_channels_; ++c) {
            const float* src = x.data() + (n * in_channels_ + c) * H * W;
            float* dst = s.data() + (n * out_channels_ + c) * oh * ow;
            for (std::size_t y = 0; y < oh; ++y)
                for (std::size_t xx = 0; xx < ow; ++xx)
                    dst[y * ow + xx] = src[(y * stride_) * W + xx * stride_];
        }
    }
    return s;
}

Tensor ResidualBlock::shortcut_backward(const Tensor& grad) const {
    if (shortcut_ == Shortcut::Identity) return grad;
    const std::size_t N = in_shape_[0], H = in_shape_[2], W = in_shape_[3];
    const std::size_t oh = (H + stride_ - 1) / stride_;
    const std::size_t ow = (W + stride_ - 1) / stride_;
    Tensor g = Tensor::zeros(in_shape_);
    for (std::size_t n = 0; n < N; ++n) {
        for (int c = 0; c < in_channels_; ++c) {
            float* dst = g.data() + (n * in_channels_ + c) * H * W;
            const float* src = grad.data() + (n * out_channels_ + c) * oh * ow;
            for (std::size_t y = 0; y < oh; ++y)
                for (std::size_t xx = 0; xx < ow; ++xx)
                    dst[(y * stride_) * W + xx * stride_] += src[y * ow + xx];
        }
    }
    return g;
}

Tensor ResidualBlock::forward(const Tensor& x, bool training) {
    if (x.shape().size() != 4 ||
        x.shape()[1] != static_cast<std::size_t>(in_channels_))
        throw ShapeError("residual block channel mismatch");
    in_shape_ = x.shape();
    Tensor h = x;
    for (auto& layer : inner_) h = layer->forward(h, training);
    Tensor s = shortcut_forward(x);
    if (h.shape() != s.shape())
        throw ShapeError("residual branch shapes diverge");
    relu_mask_.assign(h.size(), 0);
    for (std::size_t i = 0; i < h.size(); ++i) {
        float v = h[i] + s[i];
        if (v > 0.0f) {
            h[i] = v;
            relu_mask_[i] = 1;
        } else {
            h[i] = 0.0f;
        }
    }
    return h;
}

Tensor ResidualBlock::backward(const Tensor& grad_out) {
    if (grad_out.size() != relu_mask_.size())
        throw ShapeError("residual block backward shape mismatch");
    Tensor g = Tensor::zeros(grad_out.shape());
    for (std::size_t i = 0; i < g.size(); ++i)
        if (relu_mask_[i]) g[i] = grad_out[i];
    Tensor gs = shortcut_backward(g);
    Tensor gh = g;
    for (auto it = inner_.rbegin(); it != inner_.rend(); ++it)
        gh = (*it)->backward(gh);
    if (gh.shape() != gs.shape())
        throw ShapeError("residual block gradient shapes diverge");
    for (std::size_t i = 0; i < gh.size(); ++i) gh[i] += gs[i];
    return gh;
}

void ResidualBlock::collect_params(const std::string& prefix,
                                   std::vector<ParamRef>& out) {
    for (std::size_t i = 0; i < inner_.size(); ++i)
        inner_[i]->collect_params(prefix + "b" + std::to_string(i) + ".", out);
}

void ResidualBlock::collect_state(const std::string& prefix,
                                  std::vector<StateRef>& out) {
    for (std::size_t i = 0; i < inner_.size(); ++i)
        inner_[i]->collect_state(prefix + "b" + std::to_string(i) + ".", out);
}

void ResidualBlock::collect_convs(std::vector<ConvLayer*>& out) {
    for (auto& layer : inner_) layer->collect_convs(out);
}

void ResidualBlock::init_params(Rng& rng) {
    for (auto& layer : inner_) layer->init_params(rng);
}

// ---------------------------------------------------------------------------
// Softmax cross-entropy

template <typename T>
SoftmaxCEResult<T> softmax_crossentropy(const TensorT<T>& logits,
                                        const std::vector<int>& labels) {
    if (logits.shape().size() != 2)
        throw ShapeError("softmax_crossentropy expects logits of shape (N, classes)");
    const std::size_t N = logits.shape()[0], C = logits.shape()[1];
    if (labels.size() != N)
        throw ShapeError("label count " + std::to_string(labels.size()) +
                         " does not match batch size " + std::to_string(N));
    SoftmaxCEResult<T> r;
    r.grad_logits = TensorT<T>::zeros(logits.shape());
    double loss = 0.0;
    for (std::size_t n = 0; n < N; ++n) {
        const int label = labels[n];
        if (label < 0 || static_cast<std::size_t>(label) >= C)
            throw FormatError("label " + std::to_string(label) + " outside [0, " +
                              std::to_string(C) + ")");
        const T* row = logits.data() + n * C;
        T mx = row[0];
        std::size_t arg = 0;
        for (std::size_t j = 1; j < C; ++j) {
            if (row[j] > mx) {  // first maximum wins ties
                mx = row[j];
                arg = j;
            }
        }
        T sum = 0;
        for (std::size_t j = 0; j < C; ++j) sum += std::exp(row[j] - mx);
        const T logz = mx + std::log(sum);
        loss += static_cast<double>(logz - row[label]);
        if (static_cast<int>(arg) == label) ++r.correct;
        T* grow = r.grad_logits.data() + n * C;
        const T invn = T(1) / static_cast<T>(N);
        for (std::size_t j = 0; j < C; ++j) {
            T p = std::exp(row[j] - logz);
            grow[j] = (p - (static_cast<int>(j) == label ? T(1) : T(0))) * invn;
        }
    }
    r.loss = static_cast<T>(loss / static_cast<double>(N));
    return r;
}

template SoftmaxCEResult<float> softmax_crossentropy<float>(const TensorT<float>&,
                                                            const std::vector<int>&);
template SoftmaxCEResult<double> softmax_crossentropy<double>(const TensorT<double>&,
                                                              const std::vector<int>&);

// ---------------------------------------------------------------------------
// Model

Tensor Model::forward(const Tensor& x, bool training) {
    Tensor h = x;
    for (auto& layer : layers_) h = layer->forward(h, training);
    return h;
}

Tensor Model::backward(const Tensor& grad_logits) {
    Tensor g = grad_logits;
    for (auto it = layers_.rbegin(); it != layers_.rend(); ++it)
        g = (*it)->backward(g);
    return g;
}

std::vector<ParamRef> Model::params() {
    std::vector<ParamRef> out;
    for (std::size_t i = 0; i < layers_.size(); ++i)
        layers_[i]->collect_params("l" + std::to_string(i) + ".", out);
    return out;
}

std::vector<StateRef> Model::state() {
    std::vector<StateRef> out;
    for (std::size_t i = 0; i < layers_.size(); ++i)
        layers_[i]->collect_state("l" + std::to_string(i) + ".", out);
    return out;
}

std::vector<ConvLayer*> Model::conv_layers() {
    std::vector<ConvLayer*> out;
    for (auto& layer : layers_) layer->collect_convs(out);
    return out;
}

ModelParamCount Model::count_params() {
    ModelParamCount count;
    long long param_total = 0;
    for (const auto& p : params())
        param_total += static_cast<long long>(p.value->size());
    for (ConvLayer* conv : conv_layers()) {
        LayerParamCount lc = conv->impl().count_params();
        count.conv_free_weights += lc.free_weights;
        count.conv_standard_weights += lc.standard_weights;
    }
    count.total_free = param_total;
    count.total_standard =
        param_total - count.conv_free_weights + count.conv_standard_weights;
    return count;
}

}  // namespace symconv
