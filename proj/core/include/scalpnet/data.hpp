#pragma once

#include <atomic>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <filesystem>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <unordered_map>
#include <vector>

#include "scalpnet/image.hpp"
#include "scalpnet/tensor.hpp"

namespace scalpnet {

// Images on disk paired with integer class labels. class_names are the
// sorted class directory names; every item index points into them.
struct LabeledDataset {
    struct Item {
        std::filesystem::path path;
        int class_index = 0;
    };
    std::vector<Item> items;
    std::vector<std::string> class_names;
};

struct SplitSpec {
    double train_frac = 0.8;
    double val_frac = 0.1;
    double test_frac = 0.1;
    uint64_t seed = 42;
};

struct Batch {
    Tensor images;  // B x H x W x 3, values in [0,1]
    std::vector<int> labels;
};

// Optional pre-processing applied between decode and batching; off by
// default so the plain pipeline is decode -> resize -> rescale.
struct PreprocOptions {
    std::optional<float> lowpass_sigma;
    bool equalize = false;
};

// Walks root/<class_name>/<image>.{png,jpg,jpeg} (case-insensitive
// extensions). Class names sorted byte-lexicographically, files likewise
// within each class.
LabeledDataset scan_dataset_dir(const std::filesystem::path& root);

struct SplitResult {
    LabeledDataset train;
    LabeledDataset val;
    LabeledDataset test;
};

// Fisher-Yates shuffle under the seeded generator, then slices
// [train | val | test] with n_val = floor(val_frac*n),
// n_test = floor(test_frac*n) and the remainder in train.
SplitResult split_dataset(const LabeledDataset& ds, const SplitSpec& spec);

// decode -> (equalize) -> resize -> rescale -> (lowpass), shared by the
// batch pipeline and single-image prediction.
Tensor preprocess_image(const RawImage& img, int image_size, const PreprocOptions& preproc);
Tensor load_image_tensor(const std::filesystem::path& path, int image_size,
                         const PreprocOptions& preproc);

// Write-once-read-many store of preprocessed image tensors, shared across
// epochs. file_reads counts actual disk reads so the caching contract is
// observable.
class DecodedImageCache {
public:
    DecodedImageCache(int image_size, PreprocOptions preproc, bool enabled)
        : image_size_(image_size), preproc_(std::move(preproc)), enabled_(enabled) {}

    Tensor get(const std::filesystem::path& path);
    uint64_t file_reads() const { return file_reads_.load(); }

private:
    int image_size_;
    PreprocOptions preproc_;
    bool enabled_;
    std::mutex mutex_;
    std::unordered_map<std::string, Tensor> store_;
    std::atomic<uint64_t> file_reads_{0};
};

struct BatchOptions {
    int batch_size = 32;
    uint64_t epoch_seed = 0;
    int image_size = 256;
};

// One epoch of batches: items reshuffled under epoch_seed, images pulled
// through the cache, batches prepared ahead of consumption on a worker
// thread (bounded queue, capacity 2) and yielded in shuffled order.
class BatchLoader {
public:
    BatchLoader(const LabeledDataset& ds, const BatchOptions& opts,
                std::shared_ptr<DecodedImageCache> cache);
    ~BatchLoader();

    BatchLoader(const BatchLoader&) = delete;
    BatchLoader& operator=(const BatchLoader&) = delete;

    // Next batch in shuffled order, or nullopt at end of epoch. Rethrows
    // any producer-side failure (e.g. an undecodable file).
    std::optional<Batch> next();

private:
    void produce(std::vector<LabeledDataset::Item> order, int batch_size);

    std::shared_ptr<DecodedImageCache> cache_;
    std::mutex mutex_;
    std::condition_variable cv_;
    std::deque<Batch> queue_;
    bool done_ = false;
    std::exception_ptr failure_;
    std::thread worker_;
    static constexpr size_t kQueueCapacity = 2;
};

// Convenience wrapper collecting a whole epoch; small datasets and tests.
std::vector<Batch> make_batches(const LabeledDataset& ds, const BatchOptions& opts,
                                std::shared_ptr<DecodedImageCache> cache);

// Per image: horizontal flip (p=1/2), vertical flip (p=1/2) and a uniform
// rotation from {0,90,180,270} degrees, drawn in that order from the seeded
// generator. Labels unchanged.
Batch augment_batch(const Batch& b, uint64_t seed);

}  // namespace scalpnet
