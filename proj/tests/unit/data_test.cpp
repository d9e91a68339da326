#include <doctest.h>

#include <algorithm>
#include <map>
#include <set>

#include "../support/testutil.hpp"
#include "scalpnet/data.hpp"
#include "scalpnet/error.hpp"
#include "scalpnet/rng.hpp"

using namespace scalpnet;
namespace fs = std::filesystem;

TEST_CASE("scan sorts classes lexicographically and indexes items") {
    testutil::TempDir dir;
    testutil::write_solid_dataset(dir.path(),
                                  {{"head_lice", {200, 0, 0}}, {"alopecia_areata", {0, 200, 0}}},
                                  2, 8);
    const auto ds = scan_dataset_dir(dir.path());
    CHECK(ds.class_names == std::vector<std::string>{"alopecia_areata", "head_lice"});
    REQUIRE(ds.items.size() == 4);
    for (const auto& item : ds.items) {
        const std::string parent = item.path.parent_path().filename().string();
        CHECK(parent == ds.class_names[item.class_index]);
    }
}

TEST_CASE("scan rejects empty or degenerate roots") {
    testutil::TempDir dir;
    CHECK_THROWS_AS(scan_dataset_dir(dir.path() / "missing"), Error);
    CHECK_THROWS_AS(scan_dataset_dir(dir.path()), Error);  // zero class directories

    fs::create_directories(dir.path() / "empty_class");
    CHECK_THROWS_AS(scan_dataset_dir(dir.path()), Error);  // class with zero images
}

TEST_CASE("scan matches an independent filesystem walk") {
    testutil::TempDir dir;
    testutil::write_solid_dataset(
        dir.path(), {{"a", {1, 2, 3}}, {"b", {4, 5, 6}}, {"c", {7, 8, 9}}}, 5, 8);
    // Mix in files that must be ignored.
    testutil::write_file(dir.path() / "a" / "notes.txt", {1, 2, 3});
    testutil::write_file(dir.path() / "stray.png", {1, 2, 3});

    const auto ds = scan_dataset_dir(dir.path());
    CHECK(ds.items.size() == 15);

    std::map<std::string, std::set<std::string>> walked;
    for (const auto& entry : fs::recursive_directory_iterator(dir.path())) {
        if (!entry.is_regular_file()) continue;
        const auto ext = entry.path().extension().string();
        if (ext != ".png" && ext != ".jpg" && ext != ".jpeg") continue;
        const auto parent = entry.path().parent_path().filename().string();
        if (entry.path().parent_path() == dir.path()) continue;
        walked[parent].insert(entry.path().string());
    }
    for (const auto& item : ds.items) {
        const std::string parent = ds.class_names[item.class_index];
        CHECK(walked[parent].count(item.path.string()) == 1);
    }

    // Case-insensitive extensions are picked up.
    testutil::write_file(dir.path() / "a" / "upper.PNG",
                         encode_png(testutil::solid_image(4, 4, 9, 9, 9)));
    CHECK(scan_dataset_dir(dir.path()).items.size() == 16);
}

namespace {

LabeledDataset fake_dataset(size_t n) {
    LabeledDataset ds;
    ds.class_names = {"x"};
    for (size_t i = 0; i < n; ++i)
        ds.items.push_back({fs::path("item_" + std::to_string(i)), 0});
    return ds;
}

}  // namespace

TEST_CASE("split produces the 80/10/10 sizes") {
    const auto ds = fake_dataset(100);
    const auto split = split_dataset(ds, {0.8, 0.1, 0.1, 7});
    CHECK(split.train.items.size() == 80);
    CHECK(split.val.items.size() == 10);
    CHECK(split.test.items.size() == 10);

    std::set<std::string> seen;
    for (const auto* part : {&split.train, &split.val, &split.test})
        for (const auto& item : part->items) CHECK(seen.insert(item.path.string()).second);
    CHECK(seen.size() == 100);  // disjoint and exhaustive
}

TEST_CASE("split floors the validation and test sizes") {
    const auto split = split_dataset(fake_dataset(10), {0.8, 0.1, 0.1, 7});
    CHECK(split.train.items.size() == 8);
    CHECK(split.val.items.size() == 1);
    CHECK(split.test.items.size() == 1);

    const auto tiny = split_dataset(fake_dataset(3), {0.8, 0.1, 0.1, 7});
    CHECK(tiny.train.items.size() == 3);
    CHECK(tiny.val.items.empty());
    CHECK(tiny.test.items.empty());
}

TEST_CASE("split is deterministic per seed") {
    const auto ds = fake_dataset(100);
    const auto a = split_dataset(ds, {0.8, 0.1, 0.1, 42});
    const auto b = split_dataset(ds, {0.8, 0.1, 0.1, 42});
    const auto c = split_dataset(ds, {0.8, 0.1, 0.1, 43});

    for (size_t i = 0; i < a.train.items.size(); ++i)
        CHECK(a.train.items[i].path == b.train.items[i].path);

    bool differs = false;
    for (size_t i = 0; i < a.train.items.size(); ++i)
        if (a.train.items[i].path != c.train.items[i].path) differs = true;
    CHECK(differs);
}

TEST_CASE("split validates its fractions") {
    const auto ds = fake_dataset(10);
    CHECK_THROWS_AS(split_dataset(ds, {0.5, 0.1, 0.1, 1}), Error);
    CHECK_THROWS_AS(split_dataset(ds, {-0.2, 0.6, 0.6, 1}), Error);
    CHECK_THROWS_AS(split_dataset(fake_dataset(0), {0.8, 0.1, 0.1, 1}), Error);
}

TEST_CASE("batch sizes divide the dataset with a remainder") {
    testutil::TempDir dir;
    testutil::write_solid_dataset(dir.path(), {{"a", {10, 0, 0}}, {"b", {0, 10, 0}}}, 35, 8);
    const auto ds = scan_dataset_dir(dir.path());
    REQUIRE(ds.items.size() == 70);

    const auto batches = make_batches(ds, {32, 1, 8}, nullptr);
    REQUIRE(batches.size() == 3);
    CHECK(batches[0].labels.size() == 32);
    CHECK(batches[1].labels.size() == 32);
    CHECK(batches[2].labels.size() == 6);
    for (const auto& b : batches) {
        CHECK(b.images.shape()[1] == 8);
        CHECK(b.images.shape()[2] == 8);
        CHECK(b.images.shape()[3] == 3);
        for (float v : b.images.data()) {
            CHECK(v >= 0.0f);
            CHECK(v <= 1.0f);
        }
    }
}

TEST_CASE("an epoch covers every item exactly once") {
    testutil::TempDir dir;
    testutil::write_solid_dataset(dir.path(), {{"a", {10, 0, 0}}, {"b", {0, 10, 0}}}, 9, 8);
    const auto ds = scan_dataset_dir(dir.path());
    const auto batches = make_batches(ds, {4, 99, 8}, nullptr);

    std::map<int, int> label_counts;
    size_t total = 0;
    for (const auto& b : batches) {
        total += b.labels.size();
        for (int y : b.labels) label_counts[y]++;
    }
    CHECK(total == 18);
    CHECK(label_counts[0] == 9);
    CHECK(label_counts[1] == 9);
}

TEST_CASE("the cache eliminates second-epoch reads") {
    testutil::TempDir dir;
    testutil::write_solid_dataset(dir.path(), {{"a", {10, 0, 0}}}, 6, 8);
    const auto ds = scan_dataset_dir(dir.path());

    auto cache = std::make_shared<DecodedImageCache>(8, PreprocOptions{}, true);
    (void)make_batches(ds, {4, 1, 8}, cache);
    CHECK(cache->file_reads() == 6);
    (void)make_batches(ds, {4, 2, 8}, cache);
    CHECK(cache->file_reads() == 6);  // second epoch served from memory

    auto no_cache = std::make_shared<DecodedImageCache>(8, PreprocOptions{}, false);
    (void)make_batches(ds, {4, 1, 8}, no_cache);
    (void)make_batches(ds, {4, 2, 8}, no_cache);
    CHECK(no_cache->file_reads() == 12);
}

TEST_CASE("a fixed epoch seed reproduces batch contents") {
    testutil::TempDir dir;
    testutil::write_solid_dataset(dir.path(), {{"a", {10, 0, 0}}, {"b", {0, 10, 0}}}, 8, 8);
    const auto ds = scan_dataset_dir(dir.path());

    const auto run1 = make_batches(ds, {4, 1234, 8}, nullptr);
    const auto run2 = make_batches(ds, {4, 1234, 8}, nullptr);
    REQUIRE(run1.size() == run2.size());
    for (size_t i = 0; i < run1.size(); ++i) {
        CHECK(run1[i].labels == run2[i].labels);
        for (size_t j = 0; j < run1[i].images.size(); ++j)
            CHECK(run1[i].images[j] == run2[i].images[j]);
    }
}

TEST_CASE("loader surfaces undecodable files with their path") {
    testutil::TempDir dir;
    testutil::write_solid_dataset(dir.path(), {{"a", {10, 0, 0}}}, 2, 8);
    testutil::write_file(dir.path() / "a" / "broken.png", {0x89, 'P', 'N', 'G', 0, 0});
    const auto ds = scan_dataset_dir(dir.path());
    CHECK(ds.items.size() == 3);

    try {
        (void)make_batches(ds, {4, 1, 8}, nullptr);
        FAIL("expected a decode error");
    } catch (const Error& e) {
        CHECK(std::string(e.what()).find("broken.png") != std::string::npos);
    }
}

TEST_CASE("preprocessing applies equalize on raw pixels and lowpass on the tensor") {
    const RawImage img = testutil::random_image(12, 10, 3, 33);

    // Lowpass runs after resize+rescale.
    const Tensor plain = preprocess_image(img, 8, {});
    PreprocOptions lp;
    lp.lowpass_sigma = 1.0f;
    const Tensor smoothed = preprocess_image(img, 8, lp);
    const Tensor expected_lp = gaussian_lowpass(plain, 1.0f);
    REQUIRE(smoothed.shape() == expected_lp.shape());
    for (size_t i = 0; i < smoothed.size(); ++i) CHECK(smoothed[i] == expected_lp[i]);

    // Equalization runs before resize.
    PreprocOptions eq;
    eq.equalize = true;
    const Tensor equalized = preprocess_image(img, 8, eq);
    const Tensor expected_eq = rescale_to_tensor(resize_bilinear(equalize_hist(img), 8, 8));
    for (size_t i = 0; i < equalized.size(); ++i) CHECK(equalized[i] == expected_eq[i]);
}

namespace {

std::multiset<float> pixel_multiset(const Tensor& images, size_t image, size_t per) {
    std::multiset<float> m;
    for (size_t i = 0; i < per; ++i) m.insert(images[image * per + i]);
    return m;
}

}  // namespace

TEST_CASE("augmentation preserves labels, shape and the pixel multiset") {
    std::mt19937 rng(91);
    std::uniform_real_distribution<float> dist(0.0f, 1.0f);
    Batch b;
    b.images = Tensor::zeros({4, 6, 6, 3});
    for (size_t i = 0; i < b.images.size(); ++i) b.images[i] = dist(rng);
    b.labels = {0, 1, 0, 1};

    const size_t per = 6 * 6 * 3;
    for (uint64_t seed : {1ull, 2ull, 77ull, 12345ull}) {
        const Batch out = augment_batch(b, seed);
        CHECK(out.labels == b.labels);
        CHECK(out.images.shape() == b.images.shape());
        for (size_t img = 0; img < 4; ++img)
            CHECK(pixel_multiset(out.images, img, per) == pixel_multiset(b.images, img, per));
    }
}

TEST_CASE("augmentation is deterministic and has identity draws") {
    Batch b;
    b.images = Tensor::zeros({1, 4, 4, 3});
    for (size_t i = 0; i < b.images.size(); ++i) b.images[i] = static_cast<float>(i);
    b.labels = {0};

    const Batch a1 = augment_batch(b, 555);
    const Batch a2 = augment_batch(b, 555);
    for (size_t i = 0; i < a1.images.size(); ++i) CHECK(a1.images[i] == a2.images[i]);

    // Some seed in a small range must draw (no flip, no flip, 0 turns).
    bool found_identity = false;
    for (uint64_t seed = 0; seed < 512 && !found_identity; ++seed) {
        const Batch out = augment_batch(b, seed);
        bool same = true;
        for (size_t i = 0; i < out.images.size(); ++i)
            if (out.images[i] != b.images[i]) same = false;
        if (same) found_identity = true;
    }
    CHECK(found_identity);
}

TEST_CASE("non-square images rotate 180 but refuse quarter turns") {
    Batch b;
    b.images = Tensor::zeros({1, 2, 3, 1});  // 2x3, non-square
    for (size_t i = 0; i < 6; ++i) b.images[i] = static_cast<float>(i);
    b.labels = {0};

    bool saw_half_turn = false, saw_quarter_turn = false;
    for (uint64_t seed = 0; seed < 4096 && !(saw_half_turn && saw_quarter_turn); ++seed) {
        Xoshiro256ss probe(seed);
        const bool hflip = probe.next_below(2) == 1;
        const bool vflip = probe.next_below(2) == 1;
        const auto turns = probe.next_below(4);
        if (!hflip && !vflip && turns == 2 && !saw_half_turn) {
            saw_half_turn = true;
            const Batch out = augment_batch(b, seed);
            // 180 degrees reverses the flattened pixel order.
            for (size_t i = 0; i < 6; ++i) CHECK(out.images[i] == b.images[5 - i]);
        }
        if (turns % 2 == 1 && !saw_quarter_turn) {
            saw_quarter_turn = true;
            CHECK_THROWS_AS(augment_batch(b, seed), Error);
        }
    }
    CHECK(saw_half_turn);
    CHECK(saw_quarter_turn);
}

TEST_CASE("double horizontal flip restores the image") {
    Batch b;
    b.images = Tensor::zeros({1, 3, 3, 1});
    for (size_t i = 0; i < 9; ++i) b.images[i] = static_cast<float>(i);
    b.labels = {0};

    // Find a seed whose only transform is a horizontal flip.
    for (uint64_t seed = 0; seed < 4096; ++seed) {
        Xoshiro256ss probe(seed);
        const bool hflip = probe.next_below(2) == 1;
        const bool vflip = probe.next_below(2) == 1;
        const auto turns = probe.next_below(4);
        if (hflip && !vflip && turns == 0) {
            const Batch once = augment_batch(b, seed);
            const Batch twice = augment_batch(once, seed);
            for (size_t i = 0; i < 9; ++i) CHECK(twice.images[i] == b.images[i]);
            return;
        }
    }
    FAIL("no pure-hflip seed found in range");
}
