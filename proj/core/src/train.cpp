#include "scalpnet/train.hpp"

#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "scalpnet/error.hpp"
#include "scalpnet/rng.hpp"

namespace scalpnet {

namespace {

struct PassStats {
    double loss_sum = 0.0;  // batch loss * batch size
    uint64_t correct = 0;
    uint64_t samples = 0;

    float mean_loss() const {
        return samples ? static_cast<float>(loss_sum / static_cast<double>(samples)) : 0.0f;
    }
    float mean_acc() const {
        return samples ? static_cast<float>(static_cast<double>(correct) /
                                            static_cast<double>(samples))
                       : 0.0f;
    }
};

uint64_t count_correct(const Tensor& probs, std::span<const int> labels) {
    const size_t n = probs.shape()[0];
    const size_t k = probs.shape()[1];
    uint64_t correct = 0;
    for (size_t i = 0; i < n; ++i) {
        size_t best = 0;
        for (size_t j = 1; j < k; ++j)
            if (probs[i * k + j] > probs[i * k + best]) best = j;
        if (best == static_cast<size_t>(labels[i])) ++correct;
    }
    return correct;
}

// Loss/accuracy of one inference pass over a dataset.
PassStats run_inference_pass(const Model& model, const LabeledDataset& ds, const TrainConfig& cfg,
                             const std::shared_ptr<DecodedImageCache>& cache) {
    PassStats stats;
    BatchLoader loader(ds, {cfg.batch_size, 0, cfg.image_size}, cache);
    while (auto batch = loader.next()) {
        auto fwd = forward(model, batch->images, false);
        auto cce = sparse_cce_from_logits(fwd.logits, batch->labels);
        stats.loss_sum += static_cast<double>(cce.loss) * static_cast<double>(batch->labels.size());
        stats.correct += count_correct(cce.probs, batch->labels);
        stats.samples += batch->labels.size();
    }
    return stats;
}

}  // namespace

TrainResult train(const std::filesystem::path& data_root, const TrainConfig& cfg,
                  const std::optional<ModelSpec>& custom_spec) {
    if (cfg.epochs < 0) throw Error("epoch count must be >= 0");
    if (cfg.batch_size < 1) throw Error("batch size must be >= 1");
    if (cfg.image_size < 1) throw Error("image size must be >= 1");
    if (cfg.channels != 3) throw Error("only 3-channel training is supported");

    const LabeledDataset ds = scan_dataset_dir(data_root);
    const size_t n_classes = ds.class_names.size();

    ModelSpec spec;
    if (custom_spec) {
        spec = *custom_spec;
        spec.input_shape = {cfg.image_size, cfg.image_size, cfg.channels};
        spec.class_names = ds.class_names;
        if (spec.layers.size() >= 2) {
            if (const auto* dense = std::get_if<DenseSpec>(&spec.layers[spec.layers.size() - 2]);
                dense && static_cast<size_t>(dense->units) != n_classes)
                throw Error("model spec final dense layer has " + std::to_string(dense->units) +
                            " units but the dataset has " + std::to_string(n_classes) + " classes");
        }
    } else {
        spec = default_model_spec(cfg.image_size, ds.class_names);
    }
    validate_spec(spec);

    const SplitResult split = split_dataset(ds, cfg.split);

    TrainResult result;
    result.model = init_model(spec, cfg.seed);
    AdamState adam = init_adam(result.model.params, cfg.adam);

    auto cache = std::make_shared<DecodedImageCache>(cfg.image_size, cfg.preproc, cfg.cache);

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        const uint64_t epoch_seed = mix_seed(cfg.seed, static_cast<uint64_t>(epoch));
        PassStats train_stats;

        BatchLoader loader(split.train, {cfg.batch_size, epoch_seed, cfg.image_size}, cache);
        size_t batch_index = 0;
        while (auto batch = loader.next()) {
            Batch b = cfg.augment ? augment_batch(*batch, mix_seed(epoch_seed, batch_index))
                                  : std::move(*batch);
            ++batch_index;

            auto fwd = forward(result.model, b.images, true);
            auto cce = sparse_cce_from_logits(fwd.logits, b.labels);
            if (!std::isfinite(cce.loss))
                throw Error("non-finite loss at epoch " + std::to_string(epoch + 1) + ", batch " +
                            std::to_string(batch_index));

            Gradients grads = backward(result.model, fwd.cache, cce.grad_logits);
            adam_step(result.model.params, grads, adam);

            train_stats.loss_sum +=
                static_cast<double>(cce.loss) * static_cast<double>(b.labels.size());
            train_stats.correct += count_correct(cce.probs, b.labels);
            train_stats.samples += b.labels.size();
        }

        EpochRecord rec;
        rec.epoch = epoch + 1;
        rec.train_loss = train_stats.mean_loss();
        rec.train_acc = train_stats.mean_acc();
        if (!split.val.items.empty()) {
            const PassStats val_stats = run_inference_pass(result.model, split.val, cfg, cache);
            rec.val_loss = val_stats.mean_loss();
            rec.val_acc = val_stats.mean_acc();
        }
        result.history.push_back(rec);
    }
    return result;
}

EvalReport evaluate(const Model& model, const LabeledDataset& ds, const TrainConfig& cfg) {
    if (ds.items.empty()) throw Error("cannot evaluate on an empty dataset");
    if (ds.class_names.size() != model.spec.class_names.size())
        throw Error("dataset has " + std::to_string(ds.class_names.size()) +
                    " classes but the model was trained with " +
                    std::to_string(model.spec.class_names.size()));

    const int image_size = model.spec.input_shape[0];
    auto cache = std::make_shared<DecodedImageCache>(image_size, cfg.preproc, cfg.cache);
    BatchLoader loader(ds, {cfg.batch_size, 0, image_size}, cache);

    std::vector<int> actual, predicted;
    while (auto batch = loader.next()) {
        const auto fwd = forward(model, batch->images, false);
        const size_t n = batch->labels.size();
        const size_t k = model.spec.class_names.size();
        for (size_t i = 0; i < n; ++i) {
            size_t best = 0;
            for (size_t j = 1; j < k; ++j)
                if (fwd.probs[i * k + j] > fwd.probs[i * k + best]) best = j;
            actual.push_back(batch->labels[i]);
            predicted.push_back(static_cast<int>(best));
        }
    }

    ConfusionMatrix cm =
        confusion_matrix(actual, predicted, static_cast<int>(model.spec.class_names.size()));
    cm.class_names = model.spec.class_names;
    return summarize(cm);
}

Prediction predict(const Model& model, std::span<const uint8_t> image_bytes,
                   const PreprocOptions& preproc) {
    const RawImage img = decode_image(image_bytes);
    const Tensor hwc = preprocess_image(img, model.spec.input_shape[0], preproc);
    const Tensor batch =
        hwc.reshaped({1, hwc.shape()[0], hwc.shape()[1], hwc.shape()[2]});
    const auto fwd = forward(model, batch, false);

    const size_t k = model.spec.class_names.size();
    size_t best = 0;
    for (size_t j = 1; j < k; ++j)
        if (fwd.probs[j] > fwd.probs[best]) best = j;

    Prediction p;
    p.class_name = model.spec.class_names[best];
    p.confidence = 100.0f * fwd.probs[best];
    p.probabilities.assign(fwd.probs.data().begin(), fwd.probs.data().end());
    return p;
}

void write_history_csv(const History& history, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw Error("cannot write history file: " + path.string());
    out << "epoch,train_loss,train_acc,val_loss,val_acc\n";
    char line[256];
    for (const EpochRecord& r : history) {
        std::snprintf(line, sizeof(line), "%d,%.9g,%.9g,%.9g,%.9g\n", r.epoch,
                      static_cast<double>(r.train_loss), static_cast<double>(r.train_acc),
                      static_cast<double>(r.val_loss), static_cast<double>(r.val_acc));
        out << line;
    }
    if (!out) throw Error("failed writing history file: " + path.string());
}

std::string display_class_name(const std::string& raw) {
    std::string out;
    out.reserve(raw.size());
    bool start_of_word = true;
    for (char c : raw) {
        if (c == '_') {
            out.push_back(' ');
            start_of_word = true;
        } else if (start_of_word) {
            out.push_back(static_cast<char>(std::toupper(static_cast<unsigned char>(c))));
            start_of_word = false;
        } else {
            out.push_back(c);
        }
    }
    return out;
}

}  // namespace scalpnet
