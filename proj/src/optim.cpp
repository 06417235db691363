#include "symconv/optim.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

#include "symconv/error.hpp"

namespace symconv {

namespace {
using Json = nlohmann::ordered_json;
}

void SgdConfig::validate() const {
    if (!(lr > 0.0)) throw ConfigError("lr must be positive");
    if (momentum < 0.0 || momentum >= 1.0)
        throw ConfigError("momentum must be in [0, 1)");
    if (weight_decay < 0.0) throw ConfigError("weight_decay must be non-negative");
    if (batch_size <= 0) throw ConfigError("batch_size must be positive");
    if (epochs <= 0) throw ConfigError("epochs must be positive");
    int prev = -1;
    for (const auto& p : schedule) {
        if (p.epoch <= prev)
            throw ConfigError("schedule boundaries must be strictly increasing");
        if (!(p.lr > 0.0)) throw ConfigError("schedule rates must be positive");
        prev = p.epoch;
    }
}

std::string SgdConfig::to_json() const {
    Json j;
    j["lr"] = lr;
    j["momentum"] = momentum;
    j["weight_decay"] = weight_decay;
    Json sched = Json::array();
    for (const auto& p : schedule) sched.push_back(Json::array({p.epoch, p.lr}));
    j["schedule"] = std::move(sched);
    j["batch_size"] = batch_size;
    j["epochs"] = epochs;
    j["seed"] = seed;
    return j.dump(2);
}

SgdConfig SgdConfig::from_json(const std::string& text) {
    Json j;
    try {
        j = Json::parse(text);
    } catch (const std::exception& e) {
        throw FormatError(std::string("training config does not parse: ") + e.what());
    }
    SgdConfig cfg;
    cfg.lr = j.value("lr", cfg.lr);
    cfg.momentum = j.value("momentum", cfg.momentum);
    cfg.weight_decay = j.value("weight_decay", cfg.weight_decay);
    cfg.batch_size = j.value("batch_size", cfg.batch_size);
    cfg.epochs = j.value("epochs", cfg.epochs);
    cfg.seed = j.value("seed", cfg.seed);
    if (j.contains("schedule")) {
        for (const auto& e : j.at("schedule")) {
            LrPoint p;
            if (e.is_array() && e.size() == 2) {
                p.epoch = e[0].get<int>();
                p.lr = e[1].get<double>();
            } else if (e.is_object()) {
                p.epoch = e.at("epoch").get<int>();
                p.lr = e.at("lr").get<double>();
            } else {
                throw FormatError(
                    "schedule entries must be [epoch, lr] pairs or {epoch, lr} objects");
            }
            cfg.schedule.push_back(p);
        }
    }
    cfg.validate();
    return cfg;
}

SgdConfig SgdConfig::load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("cannot open training config: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return from_json(ss.str());
}

double lr_at(int epoch, const SgdConfig& cfg) {
    double rate = cfg.lr;
    for (const auto& p : cfg.schedule) {
        if (p.epoch <= epoch) rate = p.lr;
        else break;
    }
    return rate;
}

SgdOptimizer::SgdOptimizer(std::vector<ParamRef> params, const SgdConfig& cfg)
    : params_(std::move(params)),
      momentum_(static_cast<float>(cfg.momentum)),
      weight_decay_(static_cast<float>(cfg.weight_decay)) {
    velocity_.reserve(params_.size());
    for (const auto& p : params_) velocity_.emplace_back(p.value->size(), 0.0f);
}

void SgdOptimizer::step(double lr) {
    const float flr = static_cast<float>(lr);
    for (std::size_t i = 0; i < params_.size(); ++i) {
        const ParamRef& p = params_[i];
        if (p.grad->size() != p.value->size())
            throw ShapeError("gradient size mismatch for " + p.name);
        float* v = velocity_[i].data();
        float* w = p.value->data();
        const float* g = p.grad->data();
        const float wd = p.decay ? weight_decay_ : 0.0f;
        const std::size_t n = p.value->size();
        for (std::size_t k = 0; k < n; ++k) {
            v[k] = momentum_ * v[k] + (g[k] + wd * w[k]);
            w[k] -= flr * v[k];
        }
    }
}

void kaiming_init(Model& model, Rng& rng) {
    for (auto& layer : model.layers()) layer->init_params(rng);
}

}  // namespace symconv
