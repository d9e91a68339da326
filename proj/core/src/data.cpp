#include "scalpnet/data.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>

#include "scalpnet/error.hpp"
#include "scalpnet/rng.hpp"

namespace scalpnet {

namespace fs = std::filesystem;

namespace {

bool has_image_extension(const fs::path& p) {
    std::string ext = p.extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return ext == ".png" || ext == ".jpg" || ext == ".jpeg";
}

std::vector<uint8_t> read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open file: " + path.string());
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace

LabeledDataset scan_dataset_dir(const fs::path& root) {
    if (!fs::exists(root) || !fs::is_directory(root))
        throw Error("dataset root does not exist: " + root.string());

    std::vector<std::string> class_names;
    for (const auto& entry : fs::directory_iterator(root))
        if (entry.is_directory()) class_names.push_back(entry.path().filename().string());
    std::sort(class_names.begin(), class_names.end());
    if (class_names.empty())
        throw Error("dataset root has no class directories: " + root.string());

    LabeledDataset ds;
    ds.class_names = class_names;
    for (size_t ci = 0; ci < class_names.size(); ++ci) {
        std::vector<fs::path> files;
        for (const auto& entry : fs::directory_iterator(root / class_names[ci]))
            if (entry.is_regular_file() && has_image_extension(entry.path()))
                files.push_back(entry.path());
        std::sort(files.begin(), files.end(),
                  [](const fs::path& a, const fs::path& b) { return a.string() < b.string(); });
        if (files.empty())
            throw Error("class directory has no images: " + (root / class_names[ci]).string());
        for (auto& f : files) ds.items.push_back({std::move(f), static_cast<int>(ci)});
    }
    return ds;
}

SplitResult split_dataset(const LabeledDataset& ds, const SplitSpec& spec) {
    const auto check_frac = [](double f, const char* name) {
        if (f < 0.0 || f > 1.0) throw Error(std::string("split fraction out of range: ") + name);
    };
    check_frac(spec.train_frac, "train");
    check_frac(spec.val_frac, "val");
    check_frac(spec.test_frac, "test");
    if (std::abs(spec.train_frac + spec.val_frac + spec.test_frac - 1.0) > 1e-9)
        throw Error("split fractions must sum to 1");
    if (ds.items.empty()) throw Error("cannot split an empty dataset");

    std::vector<LabeledDataset::Item> shuffled = ds.items;
    Xoshiro256ss rng(spec.seed);
    fisher_yates_shuffle(shuffled, rng);

    const size_t n = shuffled.size();
    const auto n_val = static_cast<size_t>(std::floor(spec.val_frac * static_cast<double>(n)));
    const auto n_test = static_cast<size_t>(std::floor(spec.test_frac * static_cast<double>(n)));
    const size_t n_train = n - n_val - n_test;

    SplitResult out;
    out.train.class_names = out.val.class_names = out.test.class_names = ds.class_names;
    out.train.items.assign(shuffled.begin(), shuffled.begin() + n_train);
    out.val.items.assign(shuffled.begin() + n_train, shuffled.begin() + n_train + n_val);
    out.test.items.assign(shuffled.begin() + n_train + n_val, shuffled.end());
    return out;
}

Tensor preprocess_image(const RawImage& img, int image_size, const PreprocOptions& preproc) {
    const RawImage* src = &img;
    RawImage equalized;
    if (preproc.equalize) {
        equalized = equalize_hist(img);
        src = &equalized;
    }
    const RawImage resized = resize_bilinear(*src, image_size, image_size);
    Tensor t = rescale_to_tensor(resized);
    if (preproc.lowpass_sigma) t = gaussian_lowpass(t, *preproc.lowpass_sigma);
    return t;
}

Tensor load_image_tensor(const fs::path& path, int image_size, const PreprocOptions& preproc) {
    const auto bytes = read_file(path);
    RawImage img;
    try {
        img = decode_image(bytes);
    } catch (const Error& e) {
        throw Error(std::string(e.what()) + ": " + path.string());
    }
    return preprocess_image(img, image_size, preproc);
}

Tensor DecodedImageCache::get(const fs::path& path) {
    const std::string key = path.string();
    if (enabled_) {
        std::lock_guard<std::mutex> lock(mutex_);
        auto it = store_.find(key);
        if (it != store_.end()) return it->second;
    }
    file_reads_.fetch_add(1);
    Tensor t = load_image_tensor(path, image_size_, preproc_);
    if (enabled_) {
        std::lock_guard<std::mutex> lock(mutex_);
        store_.emplace(key, t);
    }
    return t;
}

BatchLoader::BatchLoader(const LabeledDataset& ds, const BatchOptions& opts,
                         std::shared_ptr<DecodedImageCache> cache)
    : cache_(std::move(cache)) {
    if (opts.batch_size < 1) throw Error("batch size must be >= 1");
    if (!cache_) cache_ = std::make_shared<DecodedImageCache>(opts.image_size, PreprocOptions{}, false);

    std::vector<LabeledDataset::Item> order = ds.items;
    Xoshiro256ss rng(opts.epoch_seed);
    fisher_yates_shuffle(order, rng);
    worker_ = std::thread(&BatchLoader::produce, this, std::move(order), opts.batch_size);
}

BatchLoader::~BatchLoader() {
    {
        std::lock_guard<std::mutex> lock(mutex_);
        done_ = true;  // consumer is gone; let the producer drain out
        queue_.clear();
    }
    cv_.notify_all();
    if (worker_.joinable()) worker_.join();
}

void BatchLoader::produce(std::vector<LabeledDataset::Item> order, int batch_size) {
    try {
        const size_t n = order.size();
        for (size_t start = 0; start < n; start += batch_size) {
            const size_t count = std::min(static_cast<size_t>(batch_size), n - start);
            std::vector<Tensor> images;
            images.reserve(count);
            Batch batch;
            batch.labels.reserve(count);
            for (size_t i = 0; i < count; ++i) {
                images.push_back(cache_->get(order[start + i].path));
                batch.labels.push_back(order[start + i].class_index);
            }
            const Shape& hwc = images.front().shape();
            batch.images = Tensor::zeros({count, hwc[0], hwc[1], hwc[2]});
            const size_t per = images.front().size();
            for (size_t i = 0; i < count; ++i)
                std::copy(images[i].data().begin(), images[i].data().end(),
                          batch.images.data().begin() + i * per);

            std::unique_lock<std::mutex> lock(mutex_);
            cv_.wait(lock, [&] { return queue_.size() < kQueueCapacity || done_; });
            if (done_) return;
            queue_.push_back(std::move(batch));
            lock.unlock();
            cv_.notify_all();
        }
    } catch (...) {
        std::lock_guard<std::mutex> lock(mutex_);
        failure_ = std::current_exception();
    }
    {
        std::lock_guard<std::mutex> lock(mutex_);
        done_ = true;
    }
    cv_.notify_all();
}

std::optional<Batch> BatchLoader::next() {
    std::unique_lock<std::mutex> lock(mutex_);
    cv_.wait(lock, [&] { return !queue_.empty() || done_; });
    if (failure_) std::rethrow_exception(failure_);
    if (queue_.empty()) return std::nullopt;
    Batch b = std::move(queue_.front());
    queue_.pop_front();
    lock.unlock();
    cv_.notify_all();
    return b;
}

std::vector<Batch> make_batches(const LabeledDataset& ds, const BatchOptions& opts,
                                std::shared_ptr<DecodedImageCache> cache) {
    BatchLoader loader(ds, opts, std::move(cache));
    std::vector<Batch> out;
    while (auto b = loader.next()) out.push_back(std::move(*b));
    return out;
}

namespace {

void flip_horizontal(float* img, size_t h, size_t w, size_t c) {
    for (size_t y = 0; y < h; ++y)
        for (size_t x = 0; x < w / 2; ++x)
            for (size_t ch = 0; ch < c; ++ch)
                std::swap(img[(y * w + x) * c + ch], img[(y * w + (w - 1 - x)) * c + ch]);
}

void flip_vertical(float* img, size_t h, size_t w, size_t c) {
    for (size_t y = 0; y < h / 2; ++y)
        for (size_t x = 0; x < w; ++x)
            for (size_t ch = 0; ch < c; ++ch)
                std::swap(img[(y * w + x) * c + ch], img[((h - 1 - y) * w + x) * c + ch]);
}

// Clockwise quarter turn; requires a square image.
void rotate90_cw(float* img, size_t h, size_t w, size_t c, std::vector<float>& scratch) {
    scratch.assign(img, img + h * w * c);
    for (size_t y = 0; y < h; ++y)
        for (size_t x = 0; x < w; ++x)
            for (size_t ch = 0; ch < c; ++ch)
                img[(y * w + x) * c + ch] = scratch[((h - 1 - x) * w + y) * c + ch];
}

}  // namespace

Batch augment_batch(const Batch& b, uint64_t seed) {
    if (b.images.rank() != 4)
        throw Error("augment_batch expects a BxHxWxC batch, got " +
                    shape_to_string(b.images.shape()));
    const size_t n = b.images.shape()[0];
    const size_t h = b.images.shape()[1];
    const size_t w = b.images.shape()[2];
    const size_t c = b.images.shape()[3];

    Batch out;
    out.images = b.images;
    out.labels = b.labels;

    Xoshiro256ss rng(seed);
    std::vector<float> scratch;
    const size_t per = h * w * c;
    for (size_t i = 0; i < n; ++i) {
        float* img = out.images.raw() + i * per;
        const bool hflip = rng.next_below(2) == 1;
        const bool vflip = rng.next_below(2) == 1;
        const auto quarter_turns = static_cast<int>(rng.next_below(4));
        if (hflip) flip_horizontal(img, h, w, c);
        if (vflip) flip_vertical(img, h, w, c);
        if (quarter_turns % 2 == 1) {
            if (h != w) throw Error("90/270 degree rotation requires square images");
            rotate90_cw(img, h, w, c, scratch);
        }
        if (quarter_turns >= 2) {  // 180 degrees, valid for any shape
            flip_horizontal(img, h, w, c);
            flip_vertical(img, h, w, c);
        }
    }
    return out;
}

}  // namespace scalpnet
