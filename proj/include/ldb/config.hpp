#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "ldb/data.hpp"
#include "ldb/network.hpp"
#include "ldb/scheduler.hpp"

namespace ldb {

/// Everything a run needs, loadable from a flat JSON file (one level, no
/// nesting). Unknown keys are rejected so typos fail loudly.
struct RunConfig {
    // method
    double p = 0.3;
    int s = 2;
    double kappa = 2.0;
    double base_lr = 0.1;
    int base_batch = 128;
    int keep_head = 4;
    int keep_tail = 1;
    double momentum = 0.9;
    double weight_decay = 0.0;
    bool per_iteration_selection = false;

    // model
    std::string preset = "mlp-8";
    int width = 0; // 0 = preset default
    std::vector<int> input_shape; // empty = derived from the dataset
    int classes = 3;

    // data
    std::string dataset = "blobs"; // blobs | idx | csv
    int blobs_n = 2000;
    int blobs_dim = 32;
    double blobs_sigma = 0.5;
    std::string idx_images;
    std::string idx_labels;
    std::string csv_path;
    std::vector<double> norm_mean; // optional per-channel standardization
    std::vector<double> norm_std;

    // run
    int epochs = 30;
    std::string schedule = "cosine";
    std::string out_dir = "ldb-out";
    int checkpoint_every = 0;
    std::uint64_t seed_data = 1;
    std::uint64_t seed_init = 2;
    std::uint64_t seed_select = 3;

    static RunConfig load(const std::filesystem::path& path);
    static RunConfig from_json_text(const std::string& text, const std::string& origin);
    std::string to_json_text() const;
    void save(const std::filesystem::path& path) const;

    void validate() const;
    LdbConfig ldb() const;

    Dataset make_dataset() const;
    /// Preset network for this config's dataset, weights drawn from
    /// seed_init.
    Network make_network(const Dataset& ds) const;
};

} // namespace ldb
