#include <doctest.h>

#include <algorithm>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <set>

#include "ldb/data.hpp"
#include "ldb/error.hpp"
#include "ldb/network.hpp"
#include "ldb/trainer.hpp"

using namespace ldb;

namespace {

namespace fs = std::filesystem;

void write_bytes(const fs::path& path, const std::vector<unsigned char>& bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
}

void push_u32_be(std::vector<unsigned char>& out, std::uint32_t v) {
    out.push_back(static_cast<unsigned char>(v >> 24));
    out.push_back(static_cast<unsigned char>(v >> 16));
    out.push_back(static_cast<unsigned char>(v >> 8));
    out.push_back(static_cast<unsigned char>(v));
}

/// Two 2x3 images with pixel values 0..5 and 250..255.
std::pair<fs::path, fs::path> write_idx_fixture(const std::string& tag, std::uint32_t label_count,
                                                std::uint32_t image_magic = 0x00000803) {
    std::vector<unsigned char> img;
    push_u32_be(img, image_magic);
    push_u32_be(img, 2);
    push_u32_be(img, 2);
    push_u32_be(img, 3);
    for (unsigned char v = 0; v < 6; ++v) img.push_back(v);
    for (int v = 250; v <= 255; ++v) img.push_back(static_cast<unsigned char>(v));

    std::vector<unsigned char> lab;
    push_u32_be(lab, 0x00000801);
    push_u32_be(lab, label_count);
    for (std::uint32_t i = 0; i < label_count; ++i) lab.push_back(static_cast<unsigned char>(i));

    const fs::path dir = fs::temp_directory_path();
    const fs::path img_path = dir / ("ldb_idx_img_" + tag);
    const fs::path lab_path = dir / ("ldb_idx_lab_" + tag);
    write_bytes(img_path, img);
    write_bytes(lab_path, lab);
    return {img_path, lab_path};
}

} // namespace

TEST_CASE("synth_blobs is deterministic and well-formed") {
    Dataset a = synth_blobs(100, 3, 4, 0.5, 42);
    Dataset b = synth_blobs(100, 3, 4, 0.5, 42);
    CHECK(a.size() == 100);
    CHECK(a.num_classes == 3);
    CHECK(a.features.shape() == std::vector<int>{100, 4});
    CHECK(std::memcmp(a.features.data(), b.features.data(), a.features.size() * sizeof(double)) ==
          0);
    CHECK(a.labels == b.labels);
    CHECK(a.train_indices == b.train_indices);
    CHECK(a.train_indices.size() == 80);
    CHECK(a.val_indices.size() == 20);
    for (int label : a.labels) {
        CHECK(label >= 0);
        CHECK(label < 3);
    }
    Dataset c = synth_blobs(100, 3, 4, 0.5, 43);
    CHECK(std::memcmp(a.features.data(), c.features.data(), a.features.size() * sizeof(double)) !=
          0);
}

TEST_CASE("noise-free blobs are linearly separable to 100%") {
    Dataset ds = synth_blobs(150, 3, 4, 0.0, 7);
    Network net;
    net.set_input_shape({4});
    net.add_dense(4, 3);
    net.init_weights(RngStream(1));
    TrainOptions opts;
    opts.epochs = 10;
    opts.schedule = Schedule::Constant;
    TrainReport report = train_baseline(net, ds, 0.05, 16, opts);
    CHECK(report.final_val_accuracy == 1.0);
}

TEST_CASE("idx fixture loads with scaled pixels") {
    auto [img_path, lab_path] = write_idx_fixture("ok", 2);
    Dataset ds = load_idx_images(img_path, lab_path);
    CHECK(ds.features.shape() == std::vector<int>{2, 1, 2, 3});
    CHECK(ds.size() == 2);
    CHECK(ds.labels == std::vector<int>{0, 1});
    CHECK(ds.features[0] == 0.0);
    CHECK(ds.features[5] == 5.0 / 255.0);
    CHECK(ds.features[11] == 1.0); // byte 255 scales to exactly 1.0
    fs::remove(img_path);
    fs::remove(lab_path);
}

TEST_CASE("idx label/image count mismatch is a data error") {
    auto [img_path, lab_path] = write_idx_fixture("mismatch", 3);
    CHECK_THROWS_AS(load_idx_images(img_path, lab_path), DataError);
    fs::remove(img_path);
    fs::remove(lab_path);
}

TEST_CASE("idx bad magic and truncation carry byte offsets") {
    auto [img_path, lab_path] = write_idx_fixture("badmagic", 2, 0x00000805);
    CHECK_THROWS_WITH_AS(load_idx_images(img_path, lab_path), doctest::Contains("magic"),
                         FormatError);
    fs::remove(img_path);

    auto [img2, lab2] = write_idx_fixture("trunc", 2);
    fs::resize_file(img2, 20); // cut into the pixel data
    CHECK_THROWS_WITH_AS(load_idx_images(img2, lab2), doctest::Contains("byte offset"), FormatError);
    fs::remove(img2);
    fs::remove(lab2);

    CHECK_THROWS_AS(load_idx_images("/nonexistent/images", lab_path), IoError);
    fs::remove(lab_path);
}

TEST_CASE("batches chunk a permutation with a short final batch") {
    Dataset ds = synth_blobs(50, 2, 3, 0.1, 9);
    // Use the validation split: exactly 10 rows.
    REQUIRE(ds.val_indices.size() == 10);
    Batcher batcher(ds, Split::Val, 4, 1);
    REQUIRE(batcher.batch_count() == 3);
    CHECK(batcher.get(0).labels.size() == 4);
    CHECK(batcher.get(1).labels.size() == 4);
    CHECK(batcher.get(2).labels.size() == 2);

    // The union of batch rows is the split, each exactly once.
    std::multiset<std::uint32_t> seen(batcher.order().begin(), batcher.order().end());
    std::multiset<std::uint32_t> want(ds.val_indices.begin(), ds.val_indices.end());
    CHECK(seen == want);
}

TEST_CASE("batch order depends on the epoch seed, not the batch size") {
    Dataset ds = synth_blobs(64, 2, 3, 0.1, 11);
    Batcher a(ds, Split::Train, 8, 3);
    Batcher b(ds, Split::Train, 8, 3);
    CHECK(a.order() == b.order());
    Batcher c(ds, Split::Train, 16, 3); // different chunking only
    CHECK(a.order() == c.order());
    Batcher d(ds, Split::Train, 8, 4);
    CHECK(a.order() != d.order());

    // Batch contents follow the order.
    Batch first = a.get(0);
    const auto shape = ds.feature_shape();
    const std::size_t dim = static_cast<std::size_t>(shape[0]);
    for (std::size_t k = 0; k < first.labels.size(); ++k) {
        const std::size_t row = a.order()[k];
        CHECK(first.labels[k] == ds.labels[row]);
        for (std::size_t j = 0; j < dim; ++j) {
            CHECK(first.features[k * dim + j] == ds.features[row * dim + j]);
        }
    }
}

TEST_CASE("prefetching batch stream yields identical batches") {
    Dataset ds = synth_blobs(60, 3, 4, 0.2, 13);
    BatchStream sync(ds, Split::Train, 7, 2, /*prefetch=*/false);
    BatchStream async(ds, Split::Train, 7, 2, /*prefetch=*/true);
    while (true) {
        auto a = sync.next();
        auto b = async.next();
        CHECK(a.has_value() == b.has_value());
        if (!a || !b) break;
        CHECK(a->labels == b->labels);
        CHECK(std::memcmp(a->features.data(), b->features.data(),
                          a->features.size() * sizeof(double)) == 0);
    }
}

TEST_CASE("csv round-trip is element-exact") {
    Dataset ds = synth_blobs(40, 3, 5, 0.7, 17);
    const fs::path path = fs::temp_directory_path() / "ldb_test_roundtrip.csv";
    save_csv(ds, path);
    Dataset back = load_csv(path);
    REQUIRE(back.size() == ds.size());
    REQUIRE(back.features.shape() == ds.features.shape());
    CHECK(std::memcmp(back.features.data(), ds.features.data(),
                      ds.features.size() * sizeof(double)) == 0);
    CHECK(back.labels == ds.labels);
    CHECK(back.num_classes == ds.num_classes);
    fs::remove(path);
}

TEST_CASE("csv loader requires a label column") {
    const fs::path path = fs::temp_directory_path() / "ldb_test_nolabel.csv";
    std::ofstream(path) << "f0,f1\n0.5,0.25\n";
    CHECK_THROWS_WITH_AS(load_csv(path), doctest::Contains("label"), FormatError);
    fs::remove(path);
}

TEST_CASE("standardize validates channel constants") {
    Dataset ds = synth_blobs(10, 2, 4, 0.1, 19);
    const double before = ds.features[0];
    standardize(ds, {1.0}, {2.0});
    CHECK(ds.features[0] == (before - 1.0) / 2.0);
    CHECK_THROWS_AS(standardize(ds, {1.0, 2.0}, {1.0, 1.0}), ConfigError); // flat data: 1 channel
    CHECK_THROWS_AS(standardize(ds, {1.0}, {0.0}), ConfigError);
}

TEST_CASE("prefetch thread cap comes from the environment") {
    // Unset behaves as synchronous.
    unsetenv("LDB_THREADS");
    CHECK(prefetch_threads_from_env() == 1);
    setenv("LDB_THREADS", "4", 1);
    CHECK(prefetch_threads_from_env() == 4);
    setenv("LDB_THREADS", "zebra", 1);
    CHECK_THROWS_AS(prefetch_threads_from_env(), ConfigError);
    unsetenv("LDB_THREADS");
}
