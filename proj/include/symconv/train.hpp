#pragma once

#include <string>

#include "symconv/arch.hpp"
#include "symconv/data.hpp"
#include "symconv/nn.hpp"
#include "symconv/optim.hpp"
#include "symconv/report.hpp"

namespace symconv {

struct EvalMetrics {
    double loss = 0.0;
    double error = 0.0;  // percent
};

// Inference-mode pass over the whole dataset in storage order.
EvalMetrics evaluate(Model& model, const Dataset& data, int batch_size);

// Momentum SGD over shuffled mini-batches. Every random choice (init,
// per-epoch shuffle, per-sample augmentation) comes from streams derived
// from cfg.seed, so repeated runs produce bit-identical models. Expects an
// un-initialized model; initializes it before the first epoch. Fills
// report.history / final metrics; augmentation (train split only) is applied
// when `augment_train` is set.
void train_model(Model& model, const SgdConfig& cfg, const Dataset& train,
                 const Dataset& val, bool augment_train, RunReport& report);

}  // namespace symconv
