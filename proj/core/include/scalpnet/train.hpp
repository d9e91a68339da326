#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "scalpnet/data.hpp"
#include "scalpnet/metrics.hpp"
#include "scalpnet/nn.hpp"
#include "scalpnet/optim.hpp"

namespace scalpnet {

struct TrainConfig {
    int batch_size = 32;
    int image_size = 256;
    int channels = 3;
    int epochs = 50;
    SplitSpec split;  // 0.8 / 0.1 / 0.1
    uint64_t seed = 42;
    AdamConfig adam;
    bool augment = true;
    PreprocOptions preproc;
    bool cache = true;
};

struct EpochRecord {
    int epoch = 0;  // 1-based
    float train_loss = 0.0f;
    float train_acc = 0.0f;
    float val_loss = 0.0f;
    float val_acc = 0.0f;
};

// One record per epoch. Training metrics are sample-weighted means over the
// epoch's batches as they were trained; validation metrics come from a full
// pass at epoch end. An empty validation split records zeros.
using History = std::vector<EpochRecord>;

struct TrainResult {
    Model model;
    History history;
};

// The end-to-end training loop: scan, split, init, then per epoch shuffle /
// augment / forward / loss / backward / Adam, with validation at each epoch
// end. Deterministic for a fixed config.
TrainResult train(const std::filesystem::path& data_root, const TrainConfig& cfg,
                  const std::optional<ModelSpec>& custom_spec = std::nullopt);

// Inference over a dataset: confusion matrix plus summary metrics.
EvalReport evaluate(const Model& model, const LabeledDataset& ds, const TrainConfig& cfg);

struct Prediction {
    std::string class_name;  // raw class name, e.g. "head_lice"
    float confidence = 0.0f;  // 100 * max probability
    std::vector<float> probabilities;
};

// decode -> preprocess -> forward -> argmax for a single image.
Prediction predict(const Model& model, std::span<const uint8_t> image_bytes,
                   const PreprocOptions& preproc = {});

// CSV with header epoch,train_loss,train_acc,val_loss,val_acc.
void write_history_csv(const History& history, const std::filesystem::path& path);

// "head_lice" -> "Head Lice"; used wherever class names face a person.
std::string display_class_name(const std::string& raw);

}  // namespace scalpnet
