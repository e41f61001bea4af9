#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "ldb/config.hpp"
#include "ldb/error.hpp"

using namespace ldb;

namespace fs = std::filesystem;

TEST_CASE("defaults validate and map onto the method config") {
    RunConfig cfg;
    cfg.validate();
    LdbConfig method = cfg.ldb();
    CHECK(method.p == 0.3);
    CHECK(method.s == 2);
    CHECK(method.kappa == 2.0);
    CHECK(method.base_lr == 0.1);
    CHECK(method.base_batch == 128);
    CHECK(method.keep_head == 4);
    CHECK(method.keep_tail == 1);
}

TEST_CASE("config json round-trips with every field preserved") {
    RunConfig cfg;
    cfg.p = 0.45;
    cfg.s = 3;
    cfg.kappa = 1.5;
    cfg.base_lr = 0.07;
    cfg.base_batch = 48;
    cfg.keep_head = 2;
    cfg.keep_tail = 2;
    cfg.momentum = 0.8;
    cfg.weight_decay = 1e-4;
    cfg.per_iteration_selection = true;
    cfg.preset = "cnn-small";
    cfg.width = 24;
    cfg.input_shape = {1, 8, 8};
    cfg.classes = 5;
    cfg.dataset = "blobs";
    cfg.blobs_n = 512;
    cfg.blobs_dim = 12;
    cfg.blobs_sigma = 0.25;
    cfg.epochs = 11;
    cfg.schedule = "constant";
    cfg.out_dir = "/tmp/ldb-roundtrip";
    cfg.checkpoint_every = 5;
    cfg.seed_data = 101;
    cfg.seed_init = 102;
    cfg.seed_select = 103;

    RunConfig back = RunConfig::from_json_text(cfg.to_json_text(), "inline");
    CHECK(back.to_json_text() == cfg.to_json_text());
}

TEST_CASE("config validation speaks in field names") {
    RunConfig cfg;
    cfg.p = 0.0;
    CHECK_THROWS_WITH_AS(cfg.validate(), "p must be in (0,1]", ConfigError);
    cfg.p = 0.3;
    cfg.dataset = "imagenet";
    CHECK_THROWS_WITH_AS(cfg.validate(), doctest::Contains("dataset"), ConfigError);
    cfg.dataset = "idx";
    CHECK_THROWS_WITH_AS(cfg.validate(), doctest::Contains("idx_images"), ConfigError);
    cfg.dataset = "blobs";
    cfg.epochs = 0;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
}

TEST_CASE("unknown keys and malformed json are rejected") {
    CHECK_THROWS_WITH_AS(RunConfig::from_json_text("{\"pp\": 0.5}", "inline"),
                         doctest::Contains("pp"), ConfigError);
    CHECK_THROWS_AS(RunConfig::from_json_text("{oops", "inline"), ConfigError);
    CHECK_THROWS_AS(RunConfig::from_json_text("[1,2]", "inline"), ConfigError);
    CHECK_THROWS_AS(RunConfig::from_json_text("{\"p\": \"high\"}", "inline"), ConfigError);
    CHECK_THROWS_AS(RunConfig::load("/nonexistent/config.json"), IoError);
}

TEST_CASE("partial config files inherit defaults") {
    const fs::path path = fs::temp_directory_path() / "ldb_test_partial.json";
    std::ofstream(path) << "{\"epochs\": 3, \"p\": 0.5}\n";
    RunConfig cfg = RunConfig::load(path);
    CHECK(cfg.epochs == 3);
    CHECK(cfg.p == 0.5);
    CHECK(cfg.base_batch == 128);
    CHECK(cfg.preset == "mlp-8");
    fs::remove(path);
}

TEST_CASE("make_dataset and make_network agree on shapes") {
    RunConfig cfg;
    cfg.blobs_n = 60;
    cfg.blobs_dim = 5;
    cfg.classes = 3;
    cfg.width = 8;
    Dataset ds = cfg.make_dataset();
    CHECK(ds.feature_shape() == std::vector<int>{5});
    Network net = cfg.make_network(ds);
    CHECK(net.input_shape() == std::vector<int>{5});
    CHECK(net.output_shape() == std::vector<int>{3});
    // Same seeds, same network bits.
    Network again = cfg.make_network(ds);
    for (int id : net.param_layer_ids()) {
        for (std::size_t i = 0; i < net.layer(id).weights.size(); ++i) {
            CHECK(net.layer(id).weights[i] == again.layer(id).weights[i]);
        }
    }
}
