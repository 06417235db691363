#include "symconv/train.hpp"

#include <chrono>
#include <numeric>

#include "symconv/error.hpp"

namespace symconv {

namespace {

// Copies items [first, first+count) of `order` into a batch tensor, running
// each image through augmentation streams keyed by (epoch, dataset index)
// when requested.
Tensor assemble_batch(const Dataset& data, const std::vector<std::size_t>& order,
                      std::size_t first, std::size_t count, bool augmented,
                      const Rng& epoch_aug, std::vector<int>& labels) {
    const auto& shape = data.items.front().pixels.shape();
    Tensor batch = Tensor::zeros({count, shape[0], shape[1], shape[2]});
    const std::size_t stride = shape[0] * shape[1] * shape[2];
    labels.resize(count);
    for (std::size_t b = 0; b < count; ++b) {
        const std::size_t ix = order[first + b];
        const LabeledImage& item = data.items[ix];
        labels[b] = item.label;
        if (augmented) {
            Rng sample_rng = epoch_aug.derive(static_cast<std::uint64_t>(ix));
            LabeledImage aug = augment(item, sample_rng);
            std::copy(aug.pixels.data(), aug.pixels.data() + stride,
                      batch.data() + b * stride);
        } else {
            std::copy(item.pixels.data(), item.pixels.data() + stride,
                      batch.data() + b * stride);
        }
    }
    return batch;
}

}  // namespace

EvalMetrics evaluate(Model& model, const Dataset& data, int batch_size) {
    if (data.items.empty()) throw ConfigError("cannot evaluate on an empty dataset");
    std::vector<std::size_t> order(data.size());
    std::iota(order.begin(), order.end(), 0);
    Rng unused(0);
    double loss_sum = 0.0;
    std::size_t correct = 0;
    std::vector<int> labels;
    for (std::size_t first = 0; first < data.size();
         first += static_cast<std::size_t>(batch_size)) {
        const std::size_t count =
            std::min<std::size_t>(batch_size, data.size() - first);
        Tensor batch = assemble_batch(data, order, first, count, false, unused, labels);
        Tensor logits = model.forward(batch, /*training=*/false);
        auto ce = softmax_crossentropy<float>(logits, labels);
        loss_sum += static_cast<double>(ce.loss) * static_cast<double>(count);
        correct += static_cast<std::size_t>(ce.correct);
    }
    EvalMetrics m;
    m.loss = loss_sum / static_cast<double>(data.size());
    m.error = 100.0 * (1.0 - static_cast<double>(correct) /
                                 static_cast<double>(data.size()));
    return m;
}

void train_model(Model& model, const SgdConfig& cfg, const Dataset& train,
                 const Dataset& val, bool augment_train, RunReport& report) {
    cfg.validate();
    if (train.items.empty()) throw ConfigError("cannot train on an empty dataset");
    const auto wall_start = std::chrono::steady_clock::now();

    Rng root(cfg.seed);
    Rng init_rng = root.derive("init");
    kaiming_init(model, init_rng);

    SgdOptimizer opt(model.params(), cfg);
    const Rng shuffle_root = root.derive("shuffle");
    const Rng augment_root = root.derive("augment");

    std::vector<std::size_t> order(train.size());
    std::vector<int> labels;
    report.history.clear();
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        const double lr = lr_at(epoch, cfg);
        std::iota(order.begin(), order.end(), 0);
        Rng shuffle_rng = shuffle_root.derive(static_cast<std::uint64_t>(epoch));
        for (std::size_t i = order.size(); i > 1; --i)
            std::swap(order[i - 1], order[shuffle_rng.uniform_int(i)]);
        const Rng epoch_aug = augment_root.derive(static_cast<std::uint64_t>(epoch));

        double loss_sum = 0.0;
        std::size_t correct = 0;
        for (std::size_t first = 0; first < train.size();
             first += static_cast<std::size_t>(cfg.batch_size)) {
            const std::size_t count =
                std::min<std::size_t>(cfg.batch_size, train.size() - first);
            Tensor batch = assemble_batch(train, order, first, count, augment_train,
                                          epoch_aug, labels);
            Tensor logits = model.forward(batch, /*training=*/true);
            auto ce = softmax_crossentropy<float>(logits, labels);
            loss_sum += static_cast<double>(ce.loss) * static_cast<double>(count);
            correct += static_cast<std::size_t>(ce.correct);
            model.backward(ce.grad_logits);
            opt.step(lr);
        }

        EpochRecord rec;
        rec.epoch = epoch;
        rec.lr = lr;
        rec.train_loss = loss_sum / static_cast<double>(train.size());
        rec.train_error = 100.0 * (1.0 - static_cast<double>(correct) /
                                             static_cast<double>(train.size()));
        rec.val_error = evaluate(model, val, cfg.batch_size).error;
        report.history.push_back(rec);
    }

    const auto& last = report.history.back();
    report.final_train_loss = last.train_loss;
    report.final_train_error = last.train_error;
    report.final_val_error = last.val_error;
    report.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - wall_start)
            .count();
}

}  // namespace symconv
