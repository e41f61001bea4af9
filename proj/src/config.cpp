#include "ldb/config.hpp"

#include <fstream>
#include <set>

#include <json.hpp>

#include "ldb/error.hpp"

namespace ldb {

using nlohmann::json;

namespace {

template <typename T>
void read_key(const json& j, const char* key, T& out) {
    if (!j.contains(key)) return;
    try {
        out = j.at(key).get<T>();
    } catch (const json::exception&) {
        throw ConfigError(std::string(key) + ": wrong type in config");
    }
}

const std::set<std::string>& known_keys() {
    static const std::set<std::string> keys = {
        "p", "s", "kappa", "base_lr", "base_batch", "keep_head", "keep_tail",
        "momentum", "weight_decay", "per_iteration_selection",
        "preset", "width", "input_shape", "classes",
        "dataset", "blobs_n", "blobs_dim", "blobs_sigma",
        "idx_images", "idx_labels", "csv_path", "norm_mean", "norm_std",
        "epochs", "schedule", "out_dir", "checkpoint_every",
        "seed_data", "seed_init", "seed_select",
    };
    return keys;
}

} // namespace

RunConfig RunConfig::from_json_text(const std::string& text, const std::string& origin) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw ConfigError(origin + ": invalid JSON: " + e.what());
    }
    if (!j.is_object()) throw ConfigError(origin + ": config must be a JSON object");
    for (const auto& item : j.items()) {
        if (known_keys().count(item.key()) == 0) {
            throw ConfigError(origin + ": unknown config key \"" + item.key() + "\"");
        }
    }
    RunConfig cfg;
    read_key(j, "p", cfg.p);
    read_key(j, "s", cfg.s);
    read_key(j, "kappa", cfg.kappa);
    read_key(j, "base_lr", cfg.base_lr);
    read_key(j, "base_batch", cfg.base_batch);
    read_key(j, "keep_head", cfg.keep_head);
    read_key(j, "keep_tail", cfg.keep_tail);
    read_key(j, "momentum", cfg.momentum);
    read_key(j, "weight_decay", cfg.weight_decay);
    read_key(j, "per_iteration_selection", cfg.per_iteration_selection);
    read_key(j, "preset", cfg.preset);
    read_key(j, "width", cfg.width);
    read_key(j, "input_shape", cfg.input_shape);
    read_key(j, "classes", cfg.classes);
    read_key(j, "dataset", cfg.dataset);
    read_key(j, "blobs_n", cfg.blobs_n);
    read_key(j, "blobs_dim", cfg.blobs_dim);
    read_key(j, "blobs_sigma", cfg.blobs_sigma);
    read_key(j, "idx_images", cfg.idx_images);
    read_key(j, "idx_labels", cfg.idx_labels);
    read_key(j, "csv_path", cfg.csv_path);
    read_key(j, "norm_mean", cfg.norm_mean);
    read_key(j, "norm_std", cfg.norm_std);
    read_key(j, "epochs", cfg.epochs);
    read_key(j, "schedule", cfg.schedule);
    read_key(j, "out_dir", cfg.out_dir);
    read_key(j, "checkpoint_every", cfg.checkpoint_every);
    read_key(j, "seed_data", cfg.seed_data);
    read_key(j, "seed_init", cfg.seed_init);
    read_key(j, "seed_select", cfg.seed_select);
    return cfg;
}

RunConfig RunConfig::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config " + path.string());
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return from_json_text(text, path.string());
}

std::string RunConfig::to_json_text() const {
    json j;
    j["p"] = p;
    j["s"] = s;
    j["kappa"] = kappa;
    j["base_lr"] = base_lr;
    j["base_batch"] = base_batch;
    j["keep_head"] = keep_head;
    j["keep_tail"] = keep_tail;
    j["momentum"] = momentum;
    j["weight_decay"] = weight_decay;
    j["per_iteration_selection"] = per_iteration_selection;
    j["preset"] = preset;
    j["width"] = width;
    j["input_shape"] = input_shape;
    j["classes"] = classes;
    j["dataset"] = dataset;
    j["blobs_n"] = blobs_n;
    j["blobs_dim"] = blobs_dim;
    j["blobs_sigma"] = blobs_sigma;
    j["idx_images"] = idx_images;
    j["idx_labels"] = idx_labels;
    j["csv_path"] = csv_path;
    j["norm_mean"] = norm_mean;
    j["norm_std"] = norm_std;
    j["epochs"] = epochs;
    j["schedule"] = schedule;
    j["out_dir"] = out_dir;
    j["checkpoint_every"] = checkpoint_every;
    j["seed_data"] = seed_data;
    j["seed_init"] = seed_init;
    j["seed_select"] = seed_select;
    return j.dump(2) + "\n";
}

void RunConfig::save(const std::filesystem::path& path) const {
    std::ofstream out(path, std::ios::trunc);
    if (!out || !(out << to_json_text())) {
        throw IoError("cannot write config " + path.string());
    }
}

void RunConfig::validate() const {
    ldb().validate();
    if (epochs < 1) throw ConfigError("epochs must be >= 1");
    if (checkpoint_every < 0) throw ConfigError("checkpoint_every must be >= 0");
    if (!(momentum >= 0.0 && momentum < 1.0)) throw ConfigError("momentum must be in [0,1)");
    schedule_from_string(schedule);
    if (dataset != "blobs" && dataset != "idx" && dataset != "csv") {
        throw ConfigError("dataset must be blobs, idx or csv, got \"" + dataset + "\"");
    }
    if (dataset == "blobs") {
        if (classes < 2) throw ConfigError("classes must be >= 2");
        if (blobs_n < classes) throw ConfigError("blobs_n must be >= classes");
        if (blobs_dim < 1) throw ConfigError("blobs_dim must be >= 1");
        if (blobs_sigma < 0.0) throw ConfigError("blobs_sigma must be >= 0");
    }
    if (dataset == "idx" && (idx_images.empty() || idx_labels.empty())) {
        throw ConfigError("idx dataset needs idx_images and idx_labels paths");
    }
    if (dataset == "csv" && csv_path.empty()) {
        throw ConfigError("csv dataset needs csv_path");
    }
    if (norm_mean.size() != norm_std.size()) {
        throw ConfigError("norm_mean and norm_std must have the same length");
    }
    if (width < 0) throw ConfigError("width must be >= 0");
}

LdbConfig RunConfig::ldb() const {
    LdbConfig cfg;
    cfg.p = p;
    cfg.s = s;
    cfg.kappa = kappa;
    cfg.base_lr = base_lr;
    cfg.base_batch = base_batch;
    cfg.keep_head = keep_head;
    cfg.keep_tail = keep_tail;
    cfg.selection_seed = seed_select;
    cfg.weight_decay = weight_decay;
    cfg.per_iteration_selection = per_iteration_selection;
    return cfg;
}

Dataset RunConfig::make_dataset() const {
    Dataset ds;
    if (dataset == "blobs") {
        ds = synth_blobs(blobs_n, classes, blobs_dim, blobs_sigma, seed_data);
    } else if (dataset == "idx") {
        ds = load_idx_images(idx_images, idx_labels);
        ds.shuffle_seed = seed_data;
    } else if (dataset == "csv") {
        ds = load_csv(csv_path);
        ds.shuffle_seed = seed_data;
    } else {
        throw ConfigError("dataset must be blobs, idx or csv, got \"" + dataset + "\"");
    }
    if (!norm_mean.empty()) standardize(ds, norm_mean, norm_std);
    return ds;
}

Network RunConfig::make_network(const Dataset& ds) const {
    const std::vector<int> shape = input_shape.empty() ? ds.feature_shape() : input_shape;
    Network net = build_preset(preset, shape, ds.num_classes, width);
    net.init_weights(RngStream(seed_init));
    return net;
}

} // namespace ldb
